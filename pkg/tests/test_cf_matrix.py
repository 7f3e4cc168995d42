import dataclasses
from unittest import mock

import numpy as np
import pytest

from cfgreen import cf_matrix
from cfgreen.cf_matrix import (MatrixCFData, det_polynomial, eval_matrix_cf,
                               hermitize, matrix_recursion, pq_recursion,
                               q_polynomial)
from cfgreen.cf_scalar import eval_scalar_cf, scalar_recursion
from cfgreen.errors import (DegeneracyError, DomainError,
                            RecursionInapplicableError)
from cfgreen.exact_reference import DensityState, Spectrum, lehmann_green
from cfgreen.expectation_backends import (ExactBackend, PerturbedBackend,
                                          inner, make_sigma)
from cfgreen.lattice_models import (build_dimer_compact, dimer_ground_state,
                                    dimer_number_operator)
from cfgreen.operator_algebra import OperatorSum


@pytest.fixture(scope="module")
def four_site_data(four_site_problem):
    prob = four_site_problem
    data = matrix_recursion(prob.hamiltonian, prob.ops, 3, ExactBackend(),
                            prob.rho)
    return prob, data


@pytest.fixture(scope="module")
def four_site_two_op(four_site_problem):
    prob = four_site_problem
    data = matrix_recursion(prob.hamiltonian, prob.ops[:2], 2, ExactBackend(),
                            prob.rho)
    return prob, data


def test_single_operator_pool_matches_scalar(three_site_problem):
    prob = three_site_problem
    backend = ExactBackend()
    op = prob.ops[0]
    mdata = matrix_recursion(prob.hamiltonian, [op], 3, backend, prob.rho)
    sdata = scalar_recursion(prob.hamiltonian, op, 3, backend, prob.rho)
    grid = np.linspace(-5, 5, 17) + 0.4j
    for n in (0, 1, 2, 3):
        for w in grid[::3]:
            matrix_val = eval_matrix_cf(mdata, w, n)[0, 0]
            scalar_val = eval_scalar_cf(sdata, w, n)
            assert abs(matrix_val - scalar_val) <= 1e-10 * max(1.0, abs(scalar_val))
    # data-level correspondence: R[0] = Gamma[0], R[j] = Gamma[j]/Gamma[j-1],
    # Delta_matrix[j] = Delta_scalar[j]/Gamma[j]
    assert mdata.levels[0].r_matrix[0, 0].real == pytest.approx(sdata.gammas[0])
    for j in (1, 2, 3):
        ratio = sdata.gammas[j] / sdata.gammas[j - 1]
        assert mdata.levels[j].r_matrix[0, 0].real == pytest.approx(ratio, rel=1e-9)
    for j in (0, 1, 2):
        assert mdata.levels[j].delta[0, 0].real == pytest.approx(
            sdata.deltas[j] / sdata.gammas[j], rel=1e-9)


def test_three_site_pools_exact(three_site_problem):
    prob = three_site_problem
    backend = ExactBackend()
    grid = np.linspace(-10, 10, 60) + 0.1j
    oracle = np.empty((3, 3, grid.shape[0]), dtype=complex)
    for a in range(3):
        for b in range(3):
            oracle[a, b] = lehmann_green(prob.spectrum, prob.rho, prob.ops[a],
                                         prob.ops[b].dagger(), grid)
    data0 = matrix_recursion(prob.hamiltonian, prob.ops, 0, backend, prob.rho)
    worst0 = max(np.max(np.abs(eval_matrix_cf(data0, w, 0) - oracle[:, :, k]))
                 for k, w in enumerate(grid))
    assert worst0 < 1e-6

    data1 = matrix_recursion(prob.hamiltonian, prob.ops[:2], 1, backend, prob.rho)
    worst1 = max(np.max(np.abs(eval_matrix_cf(data1, w, 1) - oracle[:2, :2, k]))
                 for k, w in enumerate(grid))
    assert worst1 < 1e-6


def test_level_zero_asymptote(four_site_data):
    _, data = four_site_data
    w = 1e6j
    g0 = eval_matrix_cf(data, w, 0)
    target = -data.levels[0].r_matrix / w
    dev = np.max(np.abs(1j * g0 - target)) / np.max(np.abs(target))
    assert dev < 1e-4


def test_eval_domain_and_level_checks(four_site_data):
    _, data = four_site_data
    with pytest.raises(DomainError):
        eval_matrix_cf(data, 1.0 - 0.2j, 0)
    with pytest.raises(ValueError):
        eval_matrix_cf(data, 1j, 9)
    with pytest.raises(ValueError):
        eval_matrix_cf(data, 1j, 0, form="sideways")


def test_pq_matches_normalized_composition(four_site_data, four_site_two_op):
    rng = np.random.default_rng(41)
    for prob, data in (four_site_data, four_site_two_op):
        for _ in range(10):
            w = complex(rng.uniform(-8, 8), 0.5)
            for n in range(data.depth + 1):
                _, _, g_check = pq_recursion(data, w, n)
                direct = eval_matrix_cf(data, w, n, form="normalized")
                scale = max(1.0, np.max(np.abs(direct)))
                assert np.max(np.abs(g_check - direct)) <= 1e-8 * scale


def test_pq_single_operator_reduces_to_scalar(three_site_problem):
    prob = three_site_problem
    backend = ExactBackend()
    op = prob.ops[0]
    mdata = matrix_recursion(prob.hamiltonian, [op], 2, backend, prob.rho)
    sdata = scalar_recursion(prob.hamiltonian, op, 2, backend, prob.rho)
    w = 0.9 + 0.7j
    _, _, g_check = pq_recursion(mdata, w, 2)
    # normalized 1x1 value times Gamma[0] equals the scalar approximant
    assert g_check[0, 0] * sdata.gammas[0] == pytest.approx(
        eval_scalar_cf(sdata, w, 2), rel=1e-9)


def test_pq_rank_deficient_rejected(three_site_problem):
    prob = three_site_problem
    data = matrix_recursion(prob.hamiltonian, prob.ops[:2], 1, ExactBackend(),
                            prob.rho)
    assert data.levels[1].rank == 1
    with pytest.raises(RecursionInapplicableError):
        pq_recursion(data, 0.5j, 1)


def test_det_q_roots_are_real(four_site_two_op):
    _, data = four_site_two_op
    for n in (0, 1):
        coeffs = q_polynomial(data, n)
        det = det_polynomial(coeffs)
        roots = np.roots(det[::-1])
        assert np.max(np.abs(roots.imag)) < 1e-6


def test_rank_deficient_levels_collapse_cleanly(three_site_problem):
    # After the foliation closes, deeper levels contribute nothing and the
    # evaluation keeps returning the exact value.
    prob = three_site_problem
    data = matrix_recursion(prob.hamiltonian, prob.ops[:2], 3, ExactBackend(),
                            prob.rho)
    w = 0.8 + 0.3j
    g1 = eval_matrix_cf(data, w, 1)
    g3 = eval_matrix_cf(data, w, 3)
    assert np.max(np.abs(g3 - g1)) < 1e-8


def test_degenerate_pool_rejected(three_site_problem):
    prob = three_site_problem
    zero = OperatorSum.zero(prob.hamiltonian.qubit_count)
    with pytest.raises(DegeneracyError):
        matrix_recursion(prob.hamiltonian, [zero], 1, ExactBackend(), prob.rho)


def test_foliation_orthogonality(three_site_problem):
    prob = three_site_problem
    backend = ExactBackend(enforce_reality=False)
    data = matrix_recursion(prob.hamiltonian, prob.ops, 2, backend, prob.rho)
    normalized = [(lvl_idx, op) for lvl_idx, lvl in enumerate(data.levels)
                  for op in lvl.normalized_ops if not op.is_zero()]
    for a in range(len(normalized)):
        for b in range(a):
            la, opa = normalized[a]
            lb, opb = normalized[b]
            val = abs(complex(inner(backend, prob.rho, opa, opb)))
            if la == lb:
                assert val <= 1e-8
            else:
                assert val <= 1e-8


def test_within_level_orthonormality(four_site_data):
    prob, data = four_site_data
    backend = ExactBackend(enforce_reality=False)
    lvl = data.levels[1]
    ops = [op for op in lvl.normalized_ops if not op.is_zero()]
    gram = np.array([[complex(inner(backend, prob.rho, a, b)) for b in ops]
                     for a in ops])
    assert np.max(np.abs(gram - np.eye(len(ops)))) < 1e-9


def test_r_equals_mdagm(four_site_data):
    _, data = four_site_data
    for lvl in data.levels:
        rebuilt = lvl.m_matrix.conj().T @ lvl.m_matrix
        assert np.max(np.abs(rebuilt - lvl.r_matrix)) < 1e-10 * max(
            1.0, np.max(np.abs(lvl.r_matrix)))


def test_threshold_monotonicity(three_site_problem):
    prob = three_site_problem
    backend = ExactBackend()
    tight = matrix_recursion(prob.hamiltonian, prob.ops[:2], 1, backend,
                             prob.rho, threshold=1e-12)
    loose = matrix_recursion(prob.hamiltonian, prob.ops[:2], 1, backend,
                             prob.rho, threshold=1e-6)
    # no overlap eigenvalue falls between the two thresholds
    for lvl in tight.levels:
        top = np.max(lvl.eigenvalues)
        for ev in lvl.eigenvalues:
            assert not (1e-12 * top < ev <= 1e-6 * top)
    w = 1.1 + 0.4j
    assert np.max(np.abs(eval_matrix_cf(tight, w, 1)
                         - eval_matrix_cf(loose, w, 1))) <= 1e-8


def test_gauge_independence_of_unnormalized_form(four_site_problem):
    prob = four_site_problem
    reference = matrix_recursion(prob.hamiltonian, prob.ops, 2,
                                 ExactBackend(enforce_reality=False), prob.rho)
    original = cf_matrix._decompose
    rng = np.random.default_rng(3)

    def regauged(*args, **kwargs):
        evals, u, m, retained = original(*args, **kwargs)
        dim = u.shape[0]
        perm = rng.permutation(dim)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=dim))
        u2 = (phases[:, None] * u)[perm]
        evals2 = evals[perm]
        m2 = np.sqrt(np.clip(evals2, 0.0, None))[:, None] * u2
        return evals2, u2, m2, retained[perm]

    with mock.patch.object(cf_matrix, "_decompose", regauged):
        gauged = matrix_recursion(prob.hamiltonian, prob.ops, 2,
                                  ExactBackend(enforce_reality=False), prob.rho)
    for w in (0.4 + 0.5j, -2.0 + 0.2j):
        for n in (0, 1, 2):
            dev = np.max(np.abs(eval_matrix_cf(reference, w, n)
                                - eval_matrix_cf(gauged, w, n)))
            assert dev < 1e-10


def test_hermitize_fixed_point(four_site_data):
    # The exact-backend data is Hermitian to ~1e-11 (spec tolerance 1e-9);
    # one application cleans it, the second is an exact fixed point.
    _, data = four_site_data
    fixed = hermitize(data, real=True)
    assert fixed.hermitized
    for before, after in zip(data.levels, fixed.levels):
        assert np.max(np.abs(before.r_matrix - after.r_matrix)) < 1e-14
        scale = max(1.0, np.max(np.abs(before.delta)))
        assert np.max(np.abs(before.delta - after.delta)) < 1e-9 * scale
        assert np.max(np.abs(before.m_matrix - after.m_matrix)) < 1e-10
    twice = hermitize(fixed, real=True)
    for once, again in zip(fixed.levels, twice.levels):
        assert np.max(np.abs(once.r_matrix - again.r_matrix)) == 0.0
        assert np.max(np.abs(once.delta - again.delta)) == 0.0
        assert np.max(np.abs(once.m_matrix - again.m_matrix)) == 0.0


def test_hermitize_removes_antihermitian_part(four_site_data):
    _, data = four_site_data
    rng = np.random.default_rng(11)
    noise = rng.normal(size=(data.n_op, data.n_op))
    anti = 1j * (noise + noise.T) + (noise - noise.T)
    lvl = data.levels[0]
    dirty = dataclasses.replace(lvl, delta=lvl.delta + 0.05 * anti)
    dirty_data = dataclasses.replace(data, levels=(dirty,) + data.levels[1:])
    clean = hermitize(dirty_data)
    # the Hermitian part of the perturbation survives, the rest is gone
    expected = lvl.delta + 0.05 * (anti + anti.conj().T) / 2.0
    assert np.max(np.abs(clean.levels[0].delta - expected)) < 1e-12


def test_hermitized_perturbed_run_is_finite():
    h = build_dimer_compact(4.0, 1.0)
    spectrum = Spectrum.diagonalize(h)
    rho = DensityState.pure(dimer_ground_state(4.0, 1.0),
                            hamiltonian=spectrum.dense_h)
    sigma = make_sigma("random_pure", 2, seed=13, hamiltonian=spectrum.dense_h)
    backend = PerturbedBackend(sigma, 0.05, enforce_reality=False)
    data = matrix_recursion(h, [dimer_number_operator()], 3, backend, rho)
    fixed = hermitize(data, real=True)
    grid = np.linspace(-2, 12, 80) + 0.1j
    vals = np.array([eval_matrix_cf(fixed, w, 3)[0, 0] for w in grid])
    assert np.all(np.isfinite(vals))


def test_reflection_symmetry(four_site_data):
    prob, data = four_site_data
    grid = np.linspace(-9, 9, 25) + 0.1j
    for n in (0, 1, 2, 3):
        for w in grid[::4]:
            g = eval_matrix_cf(data, w, n)
            assert np.max(np.abs(g.real - g.real.T)) < 1e-8
            assert np.max(np.abs(g - g[::-1, ::-1])) < 1e-8


def test_diagonal_nevanlinna_positivity(four_site_data):
    _, data = four_site_data
    grid = np.linspace(-9, 9, 25) + 0.1j
    for n in (0, 1, 2, 3):
        for w in grid:
            g = eval_matrix_cf(data, w, n)
            assert np.min(np.diag(g).real) > -1e-8
