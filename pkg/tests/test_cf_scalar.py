import numpy as np
import pytest

from cfgreen.cf_scalar import (ScalarCFData, denominator_polynomial,
                               eval_scalar_cf, eval_scalar_recurrence,
                               jones_thron_experiment, scalar_recursion,
                               theorem1_bound, theorem1_bound_scan)
from cfgreen.errors import DegeneracyError, DomainError, RecursionInapplicableError
from cfgreen.exact_reference import DensityState, Spectrum, lehmann_green
from cfgreen.expectation_backends import (ExactBackend, PerturbedBackend,
                                          inner, make_sigma)
from cfgreen.lattice_models import (build_dimer_compact, dimer_ground_state,
                                    dimer_number_operator)
from cfgreen.operator_algebra import OperatorSum


@pytest.fixture(scope="module")
def single_pole_chain():
    h = OperatorSum.from_label(1.0, "Z")
    spectrum = Spectrum.diagonalize(h)
    rho = DensityState.pure(np.array([1.0, 0.0]), hamiltonian=spectrum.dense_h)
    data = scalar_recursion(h, OperatorSum.from_label(1.0, "X"), 4,
                            ExactBackend(), rho)
    return spectrum, rho, data


def dimer_chain(ratio, n=4):
    h = build_dimer_compact(ratio, 1.0)
    spectrum = Spectrum.diagonalize(h)
    rho = DensityState.pure(dimer_ground_state(ratio, 1.0),
                            hamiltonian=spectrum.dense_h)
    data = scalar_recursion(h, dimer_number_operator(), n, ExactBackend(), rho)
    return spectrum, rho, data


def test_single_pole_coefficients(single_pole_chain):
    # Hand algebra: Gamma=[1, 0], Delta=[2], chain closes immediately.
    _, _, data = single_pole_chain
    assert data.gammas[0] == pytest.approx(1.0, abs=1e-14)
    assert data.deltas[0] == pytest.approx(2.0, abs=1e-14)
    assert data.terminated_at == 1
    assert data.gammas[1] == pytest.approx(0.0, abs=1e-12)


def test_identity_operator_trivial_chain():
    h = OperatorSum.from_label(1.0, "Z")
    spectrum = Spectrum.diagonalize(h)
    rho = DensityState.pure(np.array([1.0, 0.0]), hamiltonian=spectrum.dense_h)
    data = scalar_recursion(h, OperatorSum.identity(1), 3, ExactBackend(), rho)
    assert data.gammas[0] == pytest.approx(1.0)
    assert data.deltas[0] == pytest.approx(0.0, abs=1e-14)
    assert data.terminated_at == 1


def test_null_operator_rejected():
    h = OperatorSum.from_label(1.0, "Z")
    spectrum = Spectrum.diagonalize(h)
    rho = DensityState.pure(np.array([1.0, 0.0]), hamiltonian=spectrum.dense_h)
    # (X - iY)/2 kills |0>, so its dagger applied to rho vanishes.
    lowering = OperatorSum(1, {"X": 0.5, "Y": -0.5j})
    with pytest.raises(DegeneracyError):
        scalar_recursion(h, lowering, 2, ExactBackend(), rho)


def test_eval_single_pole_exact(single_pole_chain):
    _, _, data = single_pole_chain
    for w in (0.0 + 0.1j, 2.0 + 1.0j, -3.0 + 0.5j):
        assert eval_scalar_cf(data, w, 0) == pytest.approx(1j / (w + 2), abs=1e-14)
        # terminated chain: any requested level collapses to the same value
        assert eval_scalar_cf(data, w, 3) == eval_scalar_cf(data, w, 0)


def test_eval_rejects_lower_half_plane(single_pole_chain):
    _, _, data = single_pole_chain
    with pytest.raises(DomainError):
        eval_scalar_cf(data, 1.0 - 0.1j)
    with pytest.raises(DomainError):
        eval_scalar_recurrence(data, 1.0, 0)


def test_dimer_chain_terminates_by_level_four():
    _, _, data = dimer_chain(4.0)
    assert data.terminated_at is not None
    assert data.terminated_at <= 4


def test_dimer_exact_at_termination():
    spectrum, rho, data = dimer_chain(4.0)
    nop = dimer_number_operator()
    grid = np.linspace(-2, 12, 200) + 0.1j
    cf = np.array([eval_scalar_cf(data, w) for w in grid])
    oracle = lehmann_green(spectrum, rho, nop, nop.dagger(), grid)
    assert np.max(np.abs(cf - oracle)) < 1e-8


def test_recurrence_level_zero_is_single_map():
    _, _, data = dimer_chain(4.0)
    w = 0.8 + 0.6j
    expected = -1j * (-(data.gammas[0] ** 2)
                      / (data.gammas[0] * w + data.deltas[0]))
    assert eval_scalar_recurrence(data, w, 0) == pytest.approx(expected, abs=1e-14)


def test_evaluator_equivalence_random_dimers():
    rng = np.random.default_rng(23)
    for _ in range(30):
        ratio = float(rng.uniform(0.0, 8.0))
        _, _, data = dimer_chain(ratio)
        w = complex(rng.uniform(-10, 10), rng.uniform(0.05, 3.0))
        n = int(rng.integers(0, 5))
        a = eval_scalar_cf(data, w, n)
        b = eval_scalar_recurrence(data, w, n)
        assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


def test_denominator_roots_are_real():
    for ratio in (1.0, 4.0, 8.0):
        _, _, data = dimer_chain(ratio)
        top = data.effective_level(None)
        for n in range(1, top + 1):
            coeffs = denominator_polynomial(data, n)
            roots = np.roots(coeffs[::-1])
            assert np.max(np.abs(roots.imag)) < 1e-8


def test_orthogonality_of_chain(three_site_problem):
    prob = three_site_problem
    backend = ExactBackend(enforce_reality=False)
    data = scalar_recursion(prob.hamiltonian, prob.ops[0], 6, backend, prob.rho)
    top = len(data.deltas) - 1
    for a in range(top + 1):
        for b in range(a):
            overlap = complex(inner(backend, prob.rho, data.chain[a], data.chain[b]))
            scale = np.sqrt(data.gammas[a] * data.gammas[b])
            assert abs(overlap) <= 1e-9 * max(scale, 1e-30)


def test_gamma_delta_reality(three_site_problem):
    prob = three_site_problem
    backend = ExactBackend(enforce_reality=False)
    data = scalar_recursion(prob.hamiltonian, prob.ops[0], 5, backend, prob.rho)
    assert np.all(data.gammas >= -1e-10)
    for level, op in enumerate(data.chain[:len(data.deltas)]):
        from cfgreen.operator_algebra import commutator
        raw = complex(inner(backend, prob.rho,
                            commutator(prob.hamiltonian, op), op))
        assert abs(raw.imag) <= 1e-9 * max(1.0, abs(raw))


def test_nevanlinna_positivity():
    for ratio in (0.0, 2.0, 6.0):
        _, _, data = dimer_chain(ratio)
        grid = np.linspace(-12, 12, 101) + 0.1j
        for n in range(data.effective_level(None) + 1):
            vals = np.array([eval_scalar_cf(data, w, n) for w in grid])
            assert np.min(vals.real) > -1e-9


def test_theorem1_bound_terminated_chain():
    _, _, data = dimer_chain(4.0)
    k = data.terminated_at
    lam, bound = theorem1_bound(data, k, 0.25)
    assert lam == 0.0 and bound == 0.0


def test_theorem1_bound_r_validation():
    _, _, data = dimer_chain(4.0)
    for bad in (0.0, 0.5, 0.7, -0.1):
        with pytest.raises(DomainError):
            theorem1_bound(data, 1, bad)
    # approaching 1/2 blows the prefactor up
    _, near = theorem1_bound(data, 1, 0.499)
    _, mid = theorem1_bound(data, 1, 0.25)
    assert near > 50 * mid


def test_theorem1_bound_validity_against_oracle():
    spectrum, rho, data = dimer_chain(4.0)
    nop = dimer_number_operator()
    rng = np.random.default_rng(29)
    for n in (1, 2):
        lam, bound = theorem1_bound(data, n, 0.25)
        assert lam > 0 and bound > 0
        for _ in range(20):
            w = complex(rng.uniform(-6, 6), rng.uniform(lam, 2 * lam))
            approx = eval_scalar_cf(data, w, n)
            exact = lehmann_green(spectrum, rho, nop, nop.dagger(), [w])[0]
            assert abs(exact - approx) <= bound


def test_theorem1_bound_scan_minimizes():
    _, _, data = dimer_chain(4.0)
    r, lam, bound = theorem1_bound_scan(data, 2)
    for candidate in (0.1, 0.25, 0.4):
        assert bound <= theorem1_bound(data, 2, candidate)[1] + 1e-15


def test_jones_thron_zero_noise():
    _, _, data = dimer_chain(4.0)
    omegas = np.linspace(-5, 5, 11) + 2.0j
    report = jones_thron_experiment(data, 0.0, omegas, trials=5, seed=0)
    assert np.max(report.max_abs_eps) == 0.0


def test_jones_thron_bound_holds():
    _, _, data = dimer_chain(4.0)
    omegas = np.linspace(-10, 10, 81) + 2.0j
    report = jones_thron_experiment(data, 1e-3, omegas, trials=100, seed=7)
    assert report.applicable.any()
    assert report.violations() == 0


def test_jones_thron_q_decreases_with_height():
    _, _, data = dimer_chain(4.0)
    qs = []
    for height in (1.0, 2.0, 4.0, 8.0):
        report = jones_thron_experiment(data, 1e-3,
                                        np.array([1.5 + 1j * height]),
                                        trials=2, seed=1)
        qs.append(report.q[0])
    assert all(qs[k] > qs[k + 1] for k in range(len(qs) - 1))


def test_jones_thron_needs_two_levels(single_pole_chain):
    _, _, data = single_pole_chain
    with pytest.raises(RecursionInapplicableError):
        jones_thron_experiment(data, 1e-3, np.array([1j]), trials=2, seed=0)


def test_perturbed_state_linearity():
    h = build_dimer_compact(4.0, 1.0)
    spectrum = Spectrum.diagonalize(h)
    rho = DensityState.pure(dimer_ground_state(4.0, 1.0),
                            hamiltonian=spectrum.dense_h)
    nop = dimer_number_operator()
    grid = np.linspace(-2, 12, 120) + 0.1j
    base = scalar_recursion(h, nop, 4, ExactBackend(), rho)
    g_base = np.array([eval_scalar_cf(base, w) for w in grid])
    sigma = make_sigma("maximally_mixed", 2, hamiltonian=spectrum.dense_h)
    eps_values = np.array([1e-3, 1e-2, 1e-1])
    errors = []
    for eps in eps_values:
        data = scalar_recursion(h, nop, 4, PerturbedBackend(sigma, eps), rho)
        g = np.array([eval_scalar_cf(data, w) for w in grid])
        errors.append(np.max(np.abs(g - g_base)))
    slope = np.polyfit(np.log(eps_values), np.log(errors), 1)[0]
    assert abs(slope - 1.0) <= 0.15


def test_backend_fingerprint_recorded():
    _, _, data = dimer_chain(2.0)
    assert data.backend_fingerprint == "exact"
