"""Lattice Hamiltonians, fermionic operator pools, and the dimer model.

Spin-orbital layout is blocked: qubits 0..N-1 carry the spin-up orbitals
in site order, qubits N..2N-1 the spin-down orbitals.  Jordan-Wigner
annihilation is a Z string on all lower-ordered qubits times
(X + iY)/2 on the target, so the vacuum is |0...0> and the number
operator is (I - Z)/2.

The two-site dimer is kept separate from the 2-site Jordan-Wigner chain:
it is the symmetry-reduced 2-qubit encoding (half filling, S_z = 0),
not the 4-qubit encoding, and the two are not interchangeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegeneracyError
from .operator_algebra import OperatorSum

SPIN_UP = "up"
SPIN_DOWN = "down"
_SPINS = (SPIN_UP, SPIN_DOWN)


@dataclass(frozen=True)
class HubbardSpec:
    """Open-boundary 1D Fermi-Hubbard chain: N sites, hopping t, onsite U."""

    sites: int
    t: float = 1.0
    U: float = 0.0

    def __post_init__(self):
        if self.sites < 1:
            raise ConfigError("sites must be >= 1")

    @property
    def qubit_count(self) -> int:
        return 2 * self.sites


@dataclass(frozen=True)
class OperatorPoolSpec:
    """Pool of initial operators: annihilation or number, per site and spin."""

    kind: str  # "annihilation" | "number"
    sites: tuple[int, ...]
    spins: tuple[str, ...] = (SPIN_UP,)

    def __post_init__(self):
        if self.kind not in ("annihilation", "number"):
            raise ConfigError(f"unknown pool kind {self.kind!r}")
        if not self.sites:
            raise ConfigError("pool needs at least one site")
        if not self.spins or any(s not in _SPINS for s in self.spins):
            raise ConfigError(f"spins must be a nonempty subset of {_SPINS}")


def _orbital_qubit(site: int, spin: str, spec: HubbardSpec) -> int:
    if not 0 <= site < spec.sites:
        raise ConfigError(f"site {site} out of range [0, {spec.sites})")
    if spin not in _SPINS:
        raise ConfigError(f"unknown spin {spin!r}")
    return site if spin == SPIN_UP else spec.sites + site


def jordan_wigner_annihilation(site: int, spin: str, spec: HubbardSpec) -> OperatorSum:
    """a_{site,spin} = Z^(lower qubits) (X + iY)/2 on the target qubit."""
    q = _orbital_qubit(site, spin, spec)
    n = spec.qubit_count
    word_x = "Z" * q + "X" + "I" * (n - q - 1)
    word_y = "Z" * q + "Y" + "I" * (n - q - 1)
    return OperatorSum(n, {word_x: 0.5, word_y: 0.5j})


def jordan_wigner_number(site: int, spin: str, spec: HubbardSpec) -> OperatorSum:
    """n_{site,spin} = a^dag a = (I - Z)/2 on the target qubit."""
    q = _orbital_qubit(site, spin, spec)
    n = spec.qubit_count
    ident = "I" * n
    word_z = "I" * q + "Z" + "I" * (n - q - 1)
    return OperatorSum(n, {ident: 0.5, word_z: -0.5})


def build_hubbard(spec: HubbardSpec) -> OperatorSum:
    """Jordan-Wigner image of the open-chain Hubbard Hamiltonian.

    H = -t sum_{i<N-1, sigma} (a^dag_i a_{i+1} + h.c.) + U sum_i n_up n_dn.
    Adjacent orbitals within a spin block give (XX + YY)/2 bonds with no
    Z tail, so the hopping terms stay weight 2.
    """
    n = spec.qubit_count
    h = OperatorSum.zero(n)
    for spin in _SPINS:
        for i in range(spec.sites - 1):
            a_i = jordan_wigner_annihilation(i, spin, spec)
            a_j = jordan_wigner_annihilation(i + 1, spin, spec)
            hop = a_i.dagger().matmul(a_j) + a_j.dagger().matmul(a_i)
            h = h + hop.scale(-spec.t)
    for i in range(spec.sites):
        n_up = jordan_wigner_number(i, SPIN_UP, spec)
        n_dn = jordan_wigner_number(i, SPIN_DOWN, spec)
        h = h + n_up.matmul(n_dn).scale(spec.U)
    return h


def total_number_operator(spec: HubbardSpec, spin: str) -> OperatorSum:
    ops = [jordan_wigner_number(i, spin, spec) for i in range(spec.sites)]
    return OperatorSum.linear_combination([1.0] * len(ops), ops)


def build_pool(pool: OperatorPoolSpec, spec: HubbardSpec) -> list[OperatorSum]:
    """Ordered list of pool operators, spins major, sites minor."""
    builder = (jordan_wigner_annihilation if pool.kind == "annihilation"
               else jordan_wigner_number)
    return [builder(site, spin, spec)
            for spin in pool.spins for site in pool.sites]


# -- Hubbard dimer, compact 2-qubit encoding --------------------------

def build_dimer_compact(U: float, t: float) -> OperatorSum:
    """(U/2)(II + ZZ) - t(IX + XI) on 2 qubits.

    Basis order |0up 0dn>, |0up 1dn>, |1up 0dn>, |1up 1dn>: qubit 0 holds
    the position of the up particle, qubit 1 the down particle.
    """
    return OperatorSum(2, {
        "II": U / 2.0,
        "ZZ": U / 2.0,
        "IX": -t,
        "XI": -t,
    })


def dimer_number_operator() -> OperatorSum:
    """n_{0 up} in the compact encoding: (I + Z)/2 on qubit 0."""
    return OperatorSum(2, {"II": 0.5, "ZI": 0.5})


def dimer_ground_energy(U: float, t: float) -> float:
    return U / 2.0 - math.sqrt(U * U / 4.0 + 4.0 * t * t)


def dimer_ground_state(U: float, t: float) -> np.ndarray:
    """Closed-form ground state (alpha, beta, beta, alpha)/sqrt(2 N).

    alpha = 4, beta = U/t + sqrt(U^2/t^2 + 16), N = alpha^2 + beta^2.
    Requires t != 0; the t = 0 Hamiltonian is diagonal and degenerate,
    so callers must go through exact diagonalization there.
    """
    if t == 0:
        raise DegeneracyError(
            "dimer ground state is degenerate at t = 0; use the ED path")
    alpha = 4.0
    beta = U / t + math.sqrt((U / t) ** 2 + 16.0)
    norm = alpha * alpha + beta * beta
    vec = np.array([alpha, beta, beta, alpha], dtype=complex)
    return vec / math.sqrt(2.0 * norm)
