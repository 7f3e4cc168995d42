import numpy as np
import pytest

from cfgreen.errors import ConfigError, DimensionMismatchError
from cfgreen.exact_reference import DensityState, Spectrum, to_dense
from cfgreen.expectation_backends import (BackendConfig, ExactBackend,
                                          PerturbedBackend, SampledBackend,
                                          expect, inner, make_backend,
                                          make_perturbed, make_sigma)
from cfgreen.lattice_models import (build_dimer_compact, dimer_ground_state,
                                    dimer_number_operator)
from cfgreen.operator_algebra import OperatorSum
from conftest import kron_matrix

LETTERS = list("IXYZ")


def random_state(rng, qubits):
    dim = 1 << qubits
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return DensityState.pure(vec / np.linalg.norm(vec))


def random_op(rng, qubits, terms=3):
    words = {"".join(rng.choice(LETTERS, size=qubits)):
             complex(rng.normal(), rng.normal()) for _ in range(terms)}
    return OperatorSum(qubits, words)


def test_exact_expect_zero_state():
    rho = DensityState.pure(np.array([1.0, 0.0]))
    backend = ExactBackend()
    assert expect(backend, rho, OperatorSum.from_label(1.0, "Z")) == pytest.approx(1.0)


def test_exact_expect_mixed_state():
    rho = DensityState.mixed(np.diag([0.25, 0.75]))
    backend = ExactBackend()
    z = OperatorSum.from_label(1.0, "Z")
    assert expect(backend, rho, z) == pytest.approx(-0.5)


def test_exact_inner_matches_dense_trace():
    rng = np.random.default_rng(21)
    backend = ExactBackend(enforce_reality=False)
    for _ in range(25):
        qubits = int(rng.integers(1, 4))
        rho = random_state(rng, qubits)
        x, y = random_op(rng, qubits), random_op(rng, qubits)
        dense = np.trace(rho.density_matrix() @ kron_matrix(x)
                         @ kron_matrix(y).conj().T)
        assert inner(backend, rho, x, y) == pytest.approx(dense, abs=1e-11)
        # conjugate symmetry of the sesquilinear form
        assert inner(backend, rho, x, y) == pytest.approx(
            np.conj(inner(backend, rho, y, x)), abs=1e-11)


def test_unitary_probe_has_unit_norm():
    rng = np.random.default_rng(2)
    rho = random_state(rng, 2)
    backend = ExactBackend(enforce_reality=False)
    u = OperatorSum.from_label(1.0, "XY")  # Pauli words are unitary
    assert inner(backend, rho, u, u) == pytest.approx(1.0, abs=1e-12)


def test_dimer_u0_number_overlap_is_half():
    h = build_dimer_compact(0.0, 1.0)
    spectrum = Spectrum.diagonalize(h)
    rho = DensityState.pure(dimer_ground_state(0.0, 1.0),
                            hamiltonian=spectrum.dense_h)
    val = inner(ExactBackend(), rho, dimer_number_operator(),
                dimer_number_operator())
    assert val == pytest.approx(0.5, abs=1e-12)


def test_dimension_mismatch():
    rho = DensityState.pure(np.array([1.0, 0.0]))
    with pytest.raises(DimensionMismatchError):
        expect(ExactBackend(), rho, OperatorSum.identity(2))


def test_sampled_single_pauli_error_bound():
    rng = np.random.default_rng(5)
    rho = random_state(rng, 2)
    exact = expect(ExactBackend(), rho, OperatorSum.from_label(1.0, "ZX")).real
    m = 10000
    for seed in range(20):
        backend = SampledBackend(shots=m, seed=seed)
        est = expect(backend, rho, OperatorSum.from_label(1.0, "ZX")).real
        assert abs(est - exact) <= 5.0 / np.sqrt(m)


def test_sampled_unbiased_over_seeds():
    # Spec invariant: mean over 200 seeds at M = 1024 lands within three
    # standard errors of the exact value for random 3-qubit observables.
    rng = np.random.default_rng(31)
    rho = random_state(rng, 3)
    for _ in range(3):
        obs = random_op(rng, 3, terms=4)
        obs = obs + obs.dagger()  # Hermitian observable
        exact = expect(ExactBackend(), rho, obs).real
        m = 1024
        estimates = np.array([
            expect(SampledBackend(shots=m, seed=seed), rho, obs).real
            for seed in range(200)])
        weight2 = sum(abs(c) ** 2 for _, c in obs.items())
        se = np.sqrt(weight2 / m / 200)
        assert abs(estimates.mean() - exact) <= 3.0 * se + 1e-12


def test_sampled_deterministic_and_order_independent():
    rng = np.random.default_rng(8)
    rho = random_state(rng, 2)
    a, b = random_op(rng, 2), random_op(rng, 2)
    b1 = SampledBackend(shots=512, seed=99)
    first = (inner(b1, rho, a, b), expect(b1, rho, a))
    b2 = SampledBackend(shots=512, seed=99)
    second_swapped = (expect(b2, rho, a), inner(b2, rho, a, b))
    assert first[0] == second_swapped[1]
    assert first[1] == second_swapped[0]


def test_sampled_word_cache_reused():
    rng = np.random.default_rng(12)
    rho = random_state(rng, 2)
    backend = SampledBackend(shots=64, seed=3)
    z = OperatorSum.from_label(1.0, "ZI")
    assert expect(backend, rho, z) == expect(backend, rho, z)
    fresh = backend.session("repeat", 1)
    assert fresh.seed != backend.seed


def test_sampled_infinite_shot_limit():
    rng = np.random.default_rng(44)
    rho = random_state(rng, 2)
    obs = random_op(rng, 2)
    exact = expect(ExactBackend(enforce_reality=False), rho, obs)
    est = expect(SampledBackend(shots=10 ** 9, seed=1), rho, obs)
    assert abs(est - exact) < 1e-3


def test_sampled_hermitian_overlaps():
    # The shared per-word estimates make sampled overlap matrices exactly
    # conjugate-symmetric.
    rng = np.random.default_rng(15)
    rho = random_state(rng, 2)
    backend = SampledBackend(shots=256, seed=7, enforce_reality=False)
    x, y = random_op(rng, 2), random_op(rng, 2)
    assert inner(backend, rho, x, y) == pytest.approx(
        np.conj(inner(backend, rho, y, x)), abs=1e-12)


def test_perturbed_epsilon_zero_matches_exact():
    rng = np.random.default_rng(6)
    rho = random_state(rng, 2)
    sigma = make_sigma("maximally_mixed", 2)
    backend = PerturbedBackend(sigma, 0.0, enforce_reality=False)
    obs = random_op(rng, 2)
    assert expect(backend, rho, obs) == pytest.approx(
        expect(ExactBackend(enforce_reality=False), rho, obs), abs=1e-14)


def test_make_perturbed_limits_and_convexity():
    rng = np.random.default_rng(7)
    rho = random_state(rng, 2)
    sigma = make_sigma("random_pure", 2, seed=1)
    assert make_perturbed(rho, sigma, 0.0) is rho
    assert make_perturbed(rho, sigma, 1.0) is sigma
    mid = make_perturbed(rho, sigma, 0.3)
    mat = mid.density_matrix()
    assert np.trace(mat).real == pytest.approx(1.0, abs=1e-12)
    assert np.min(np.linalg.eigvalsh(mat)) > -1e-12
    with pytest.raises(ConfigError):
        make_perturbed(rho, sigma, 1.5)


def test_perturbed_backend_is_convex_combination():
    rng = np.random.default_rng(9)
    rho = random_state(rng, 2)
    sigma = make_sigma("random_pure", 2, seed=4)
    eps = 0.2
    backend = PerturbedBackend(sigma, eps, enforce_reality=False)
    obs = random_op(rng, 2)
    mixed = make_perturbed(rho, sigma, eps)
    direct = np.trace(mixed.density_matrix() @ kron_matrix(obs))
    assert expect(backend, rho, obs) == pytest.approx(direct, abs=1e-11)


def test_enforce_reality_is_noop_for_commuting_exact_runs():
    h = build_dimer_compact(4.0, 1.0)
    spectrum = Spectrum.diagonalize(h)
    rho = DensityState.pure(dimer_ground_state(4.0, 1.0),
                            hamiltonian=spectrum.dense_h)
    nop = dimer_number_operator()
    lh = OperatorSum(2, dict(h.items()))
    on = inner(ExactBackend(enforce_reality=True), rho, lh.matmul(nop), nop)
    off = inner(ExactBackend(enforce_reality=False), rho, lh.matmul(nop), nop)
    assert abs(complex(on) - complex(off)) < 1e-12


def test_make_backend_dispatch():
    assert make_backend(BackendConfig(kind="exact"), 2).kind == "exact"
    assert make_backend(BackendConfig(kind="sampled", shots=10, seed=1), 2).kind == "sampled"
    pb = make_backend(BackendConfig(kind="perturbed", epsilon=0.1), 2)
    assert pb.kind == "perturbed" and pb.sigma.qubit_count == 2
    with pytest.raises(ConfigError):
        BackendConfig(kind="fancy")
    with pytest.raises(ConfigError):
        BackendConfig(kind="sampled", shots=0)
    with pytest.raises(ConfigError):
        BackendConfig(epsilon=2.0)
