import numpy as np
import pytest

from cfgreen.analysis import GridSpec, ModelSpec, RunConfig, build_problem
from cfgreen.expectation_backends import ExactBackend
from cfgreen.lattice_models import OperatorPoolSpec


@pytest.fixture(scope="session")
def dimer_problem():
    cfg = RunConfig(mode="scalar", model=ModelSpec("dimer", 2, 1.0, 4.0),
                    levels=(4,), grid=GridSpec(-2.0, 12.0, 100, 0.1))
    return build_problem(cfg)


@pytest.fixture(scope="session")
def three_site_problem():
    cfg = RunConfig(mode="matrix", model=ModelSpec("hubbard1d", 3, 1.0, 2.0),
                    pool=OperatorPoolSpec("annihilation", (0, 1, 2)),
                    levels=(0,), grid=GridSpec(points=60))
    return build_problem(cfg)


@pytest.fixture(scope="session")
def four_site_problem():
    cfg = RunConfig(mode="matrix", model=ModelSpec("hubbard1d", 4, 1.0, 4.0),
                    pool=OperatorPoolSpec("annihilation", (0, 1, 2, 3)),
                    levels=(0, 1, 2, 3), grid=GridSpec(points=120))
    return build_problem(cfg)


@pytest.fixture
def exact_backend():
    return ExactBackend()


def kron_matrix(op):
    """Independent dense oracle: explicit Kronecker products, no bit tricks."""
    mats = {
        "I": np.eye(2, dtype=complex),
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    dim = 1 << op.qubit_count
    total = np.zeros((dim, dim), dtype=complex)
    for word, coeff in op.items():
        acc = np.array([[1.0 + 0.0j]])
        for ch in word:
            acc = np.kron(acc, mats[ch])
        total += coeff * acc
    return total
