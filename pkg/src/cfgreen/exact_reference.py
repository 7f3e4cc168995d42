"""Dense exact-diagonalization oracle and Lehmann-representation correlators.

Frequency-domain convention, pinned by the time-domain quadrature (the
unambiguous definition int_0^inf e^{i w t} Tr(rho A(t) B) dt, Im w > 0):

    G_AB(w) = +i * sum_{m,n} <E_m|A|E_n><E_n|B rho|E_m> / (w + E_m - E_n)

With this sign Re G_{A Adag}(w0 + i eta) is the nonnegative Lorentzian
sum, and the large-w asymptote is i G -> -Tr(rho A B)/w.

Basis convention: qubit 0 is the most significant bit of the index,
matching Kronecker products P_0 (x) P_1 (x) ... (x) P_{n-1}.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (ConfigError, DegeneracyError, DimensionMismatchError,
                     DomainError)
from .operator_algebra import OperatorSum, commutator

DEFAULT_ED_LIMIT = 12

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_I_POW = np.array([1, 1j, -1, -1j])


@functools.lru_cache(maxsize=16)
def _popcount_table(n_qubits: int) -> np.ndarray:
    dim = 1 << n_qubits
    pop = np.zeros(dim, dtype=np.int64)
    for i in range(1, dim):
        pop[i] = pop[i >> 1] + (i & 1)
    return pop


def _word_masks(word: str) -> tuple[int, int, int]:
    """(flip mask over X/Y sites, sign mask over Y/Z sites, #Y letters)."""
    n = len(word)
    flip = 0
    zy = 0
    n_y = 0
    for q, ch in enumerate(word):
        bit = 1 << (n - 1 - q)
        if ch in ("X", "Y"):
            flip |= bit
        if ch in ("Y", "Z"):
            zy |= bit
        if ch == "Y":
            n_y += 1
    return flip, zy, n_y


def apply_operator(op: OperatorSum, psi: np.ndarray,
                   conjugate_coeffs: bool = False) -> np.ndarray:
    """op @ psi without materializing a dense matrix.

    Each Pauli word acts as a bit-flip permutation with +-1, +-i phases,
    so the cost is O(terms * 2^n).
    """
    n = op.qubit_count
    dim = 1 << n
    if psi.shape[0] != dim:
        raise DimensionMismatchError(
            f"state dimension {psi.shape[0]} != 2^{n}")
    pop = _popcount_table(n)
    idx = np.arange(dim)
    out = np.zeros(dim, dtype=complex)
    for word, coeff in op.items():
        flip, zy, n_y = _word_masks(word)
        if conjugate_coeffs:
            coeff = coeff.conjugate()
        phases = _I_POW[n_y & 3] * (1 - 2 * (pop[idx & zy] & 1))
        out[idx ^ flip] += coeff * phases * psi
    return out


def to_dense(op: OperatorSum, limit: int = DEFAULT_ED_LIMIT) -> np.ndarray:
    """2^n x 2^n matrix of an OperatorSum."""
    n = op.qubit_count
    if n > limit:
        raise ConfigError(
            f"{n} qubits exceeds the dense-matrix limit of {limit}")
    dim = 1 << n
    pop = _popcount_table(n)
    idx = np.arange(dim)
    mat = np.zeros((dim, dim), dtype=complex)
    for word, coeff in op.items():
        flip, zy, n_y = _word_masks(word)
        phases = _I_POW[n_y & 3] * (1 - 2 * (pop[idx & zy] & 1))
        mat[idx ^ flip, idx] += coeff * phases
    return mat


# -- spectra and states ------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a Hermitian OperatorSum, with residual checks."""

    energies: np.ndarray            # ascending
    eigenvectors: np.ndarray        # columns
    dense_h: np.ndarray
    qubit_count: int
    operator: OperatorSum = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.energies.shape[0]

    @property
    def spectral_norm(self) -> float:
        return float(np.max(np.abs(self.energies))) if self.dimension else 0.0

    @classmethod
    def diagonalize(cls, op: OperatorSum, limit: int = DEFAULT_ED_LIMIT,
                    residual_tol: float = 1e-10) -> "Spectrum":
        h = to_dense(op, limit=limit)
        herm_defect = np.max(np.abs(h - h.conj().T))
        scale = max(1.0, np.max(np.abs(h)))
        if herm_defect > 1e-10 * scale:
            raise ConfigError(
                f"operator is not Hermitian (defect {herm_defect:.3e})")
        h = (h + h.conj().T) / 2.0
        energies, vectors = np.linalg.eigh(h)
        norm = max(1.0, float(np.max(np.abs(energies))))
        residual = np.max(np.abs(h @ vectors - vectors * energies[None, :]))
        if residual > residual_tol * norm:
            raise ArithmeticError(f"eigensolver residual {residual:.3e}")
        unitarity = np.max(np.abs(vectors.conj().T @ vectors
                                  - np.eye(vectors.shape[0])))
        if unitarity > residual_tol:
            raise ArithmeticError(f"eigenvector unitarity defect {unitarity:.3e}")
        return cls(energies=energies, eigenvectors=vectors, dense_h=h,
                   qubit_count=op.qubit_count, operator=op)


class DensityState:
    """A pure vector or density matrix, with its H-commutation status.

    The commutes_with_H flag is set by an explicit residual test against
    the Hamiltonian passed at construction (False when none is given).
    """

    __slots__ = ("vector", "matrix", "commutes_with_H", "qubit_count",
                 "energy", "_eig_cache")

    def __init__(self, vector, matrix, commutes_with_h, qubit_count, energy=None):
        self.vector = vector
        self.matrix = matrix
        self.commutes_with_H = commutes_with_h
        self.qubit_count = qubit_count
        self.energy = energy
        self._eig_cache = None

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    @property
    def dimension(self) -> int:
        return 1 << self.qubit_count

    @classmethod
    def pure(cls, vector: np.ndarray, hamiltonian: np.ndarray | OperatorSum | None = None,
             tol: float = 1e-9, energy: float | None = None) -> "DensityState":
        vec = np.asarray(vector, dtype=complex).ravel()
        dim = vec.shape[0]
        n = int(round(np.log2(dim)))
        if 1 << n != dim:
            raise DimensionMismatchError(f"state length {dim} is not a power of 2")
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state vector norm {norm} != 1")
        commutes = False
        if hamiltonian is not None:
            h_psi = (apply_operator(hamiltonian, vec)
                     if isinstance(hamiltonian, OperatorSum)
                     else np.asarray(hamiltonian) @ vec)
            e = np.vdot(vec, h_psi)
            resid = np.linalg.norm(h_psi - e * vec)
            commutes = bool(resid <= tol * max(1.0, np.linalg.norm(h_psi)))
            if energy is None and commutes:
                energy = float(e.real)
        return cls(vec, None, commutes, n, energy)

    @classmethod
    def mixed(cls, matrix: np.ndarray, hamiltonian: np.ndarray | OperatorSum | None = None,
              tol: float = 1e-9) -> "DensityState":
        mat = np.asarray(matrix, dtype=complex)
        dim = mat.shape[0]
        n = int(round(np.log2(dim)))
        if mat.shape != (dim, dim) or 1 << n != dim:
            raise DimensionMismatchError(f"bad density-matrix shape {mat.shape}")
        if abs(np.trace(mat) - 1.0) > 1e-10:
            raise ValueError(f"trace {np.trace(mat)} != 1")
        if np.max(np.abs(mat - mat.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        evals = np.linalg.eigvalsh(mat)
        if evals.min() < -1e-12:
            raise ValueError(f"density matrix not PSD (min eigenvalue {evals.min():.3e})")
        commutes = False
        if hamiltonian is not None:
            h = (to_dense(hamiltonian) if isinstance(hamiltonian, OperatorSum)
                 else np.asarray(hamiltonian))
            defect = np.max(np.abs(h @ mat - mat @ h))
            commutes = bool(defect <= tol * max(1.0, np.max(np.abs(h))))
        return cls(None, mat, commutes, n)

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.vector, self.vector.conj())
        return self.matrix

    def eigenpairs(self, cutoff: float = 1e-14):
        """(probability, vector) pairs of the density matrix, p > cutoff."""
        if self.is_pure:
            return [(1.0, self.vector)]
        if self._eig_cache is None:
            probs, vecs = np.linalg.eigh(self.matrix)
            keep = probs > cutoff
            self._eig_cache = [(float(p), vecs[:, k])
                               for k, p in enumerate(probs) if keep[k]]
        return self._eig_cache


# -- sector-resolved ground states -------------------------------------

def _is_diagonal(mat: np.ndarray, tol: float = 1e-12) -> bool:
    off = mat - np.diag(np.diag(mat))
    return np.max(np.abs(off)) <= tol * max(1.0, np.max(np.abs(mat)))


def ground_state_in_sector(spectrum: Spectrum, number_ops: Sequence[OperatorSum],
                           targets: Sequence[float], tol: float = 1e-6,
                           degeneracy_tol: float = 1e-8) -> DensityState:
    """Projector onto the lowest eigenstate with the given quantum numbers.

    The number operators must commute with H (verified).  When they are
    diagonal in the computational basis (always true for Jordan-Wigner
    number operators) the sector is carved out exactly by basis-state
    selection and H is diagonalized inside the block, which stays robust
    when cross-sector eigenvalues of H are degenerate.
    """
    if len(number_ops) != len(targets):
        raise ConfigError("number_ops and targets must have equal length")
    h = spectrum.dense_h
    scale = max(1.0, spectrum.spectral_norm)
    dense_ops = []
    for op in number_ops:
        nd = to_dense(op)
        defect = np.max(np.abs(h @ nd - nd @ h))
        if defect > 1e-9 * scale * max(1.0, np.max(np.abs(nd))):
            raise ConfigError(
                f"number operator does not commute with H (defect {defect:.3e})")
        dense_ops.append(nd)

    if all(_is_diagonal(nd) for nd in dense_ops):
        mask = np.ones(spectrum.dimension, dtype=bool)
        for nd, target in zip(dense_ops, targets):
            mask &= np.abs(np.diag(nd).real - target) <= tol
        if not mask.any():
            raise DegeneracyError(
                f"empty sector: no basis states with quantum numbers {list(targets)}")
        block = h[np.ix_(mask, mask)]
        energies, vectors = np.linalg.eigh(block)
        if energies.shape[0] > 1:
            gap = float(energies[1] - energies[0])
            if gap <= degeneracy_tol * scale:
                raise DegeneracyError(
                    f"degenerate sector minimum: gap {gap:.3e} at targets {list(targets)}")
        full = np.zeros(spectrum.dimension, dtype=complex)
        full[mask] = vectors[:, 0]
        return DensityState.pure(full, hamiltonian=h, energy=float(energies[0]))

    # Fallback: filter the global eigenvectors by their expectations.
    vecs = spectrum.eigenvectors
    expectations = np.stack([np.real(np.einsum("im,ij,jm->m", vecs.conj(), nd, vecs))
                             for nd in dense_ops])
    in_sector = np.all(np.abs(expectations - np.asarray(targets)[:, None]) <= tol,
                       axis=0)
    if not in_sector.any():
        raise DegeneracyError(
            f"empty sector: no eigenstates with quantum numbers {list(targets)}")
    order = np.nonzero(in_sector)[0]
    if order.shape[0] > 1:
        gap = float(spectrum.energies[order[1]] - spectrum.energies[order[0]])
        if gap <= degeneracy_tol * scale:
            raise DegeneracyError(
                f"degenerate sector minimum: gap {gap:.3e} at targets {list(targets)}")
    vec = vecs[:, order[0]]
    return DensityState.pure(vec, hamiltonian=h,
                             energy=float(spectrum.energies[order[0]]))


# -- Lehmann representation --------------------------------------------

def _require_upper_half(omegas: np.ndarray) -> None:
    if np.any(np.imag(omegas) <= 0):
        raise DomainError("all frequencies must satisfy Im(omega) > 0")


def _lehmann_weights(spectrum: Spectrum, rho: DensityState,
                     a: OperatorSum, b: OperatorSum,
                     drop: float = 1e-16):
    """Nonzero (weight, E_m - E_n) pairs of W_mn = A~_mn (V^dag B rho V)_nm."""
    v = spectrum.eigenvectors
    a_tilde = v.conj().T @ to_dense(a) @ v
    if rho.is_pure:
        b_psi = apply_operator(b, rho.vector)
        u = v.conj().T @ b_psi                 # (V^dag B psi)_n
        w_vec = v.conj().T @ rho.vector        # (V^dag psi)_m
        c_t = np.outer(w_vec.conj(), u)        # C^T with C_nm = u_n conj(w_m)
    else:
        b_rho = to_dense(b) @ rho.matrix
        c_t = (v.conj().T @ b_rho @ v).T
    w = a_tilde * c_t
    e = spectrum.energies
    emn = e[:, None] - e[None, :]
    flat_w = w.ravel()
    flat_e = emn.ravel()
    keep = np.abs(flat_w) > drop * max(1.0, np.max(np.abs(flat_w)))
    return flat_w[keep], flat_e[keep]


def lehmann_green(spectrum: Spectrum, rho: DensityState, a: OperatorSum,
                  b: OperatorSum, omegas) -> np.ndarray:
    """Oracle G_AB on a complex grid with Im(omega) > 0."""
    grid = np.atleast_1d(np.asarray(omegas, dtype=complex))
    _require_upper_half(grid)
    weights, emn = _lehmann_weights(spectrum, rho, a, b)
    out = np.empty(grid.shape, dtype=complex)
    for k, w in enumerate(grid):
        out[k] = 1j * np.sum(weights / (w + emn))
    return out


def lorentzian_spectral(spectrum: Spectrum, rho: DensityState, a: OperatorSum,
                        omega0s, eta: float) -> np.ndarray:
    """Re G_{A Adag}(w0 + i eta) as an explicit nonnegative Lorentzian sum."""
    if eta <= 0:
        raise DomainError("eta must be > 0")
    if not rho.commutes_with_H:
        raise ConfigError("lorentzian_spectral requires a state commuting with H")
    grid = np.atleast_1d(np.asarray(omega0s, dtype=float))
    v = spectrum.eigenvectors
    a_tilde = v.conj().T @ to_dense(a) @ v
    occ = np.real(np.diag(v.conj().T @ rho.density_matrix() @ v))
    weights = occ[:, None] * np.abs(a_tilde) ** 2
    e = spectrum.energies
    emn = (e[:, None] - e[None, :]).ravel()
    flat = weights.ravel()
    keep = flat > 1e-16 * max(1.0, flat.max())
    flat, emn = flat[keep], emn[keep]
    out = np.empty(grid.shape, dtype=float)
    for k, w0 in enumerate(grid):
        out[k] = np.sum(flat * eta / ((w0 + emn) ** 2 + eta ** 2))
    return out


def time_quadrature_green(spectrum: Spectrum, rho: DensityState, a: OperatorSum,
                          b: OperatorSum, omega: complex, t_max: float,
                          steps: int | None = None) -> complex:
    """Composite-trapezoid value of int_0^T e^{i w t} Tr(rho A(t) B) dt.

    Only a referee for the Lehmann oracle; the residual tail beyond T is
    bounded by e^{-Im(w) T} |Tr(rho A B)| / Im(w).
    """
    omega = complex(omega)
    if omega.imag <= 0:
        raise DomainError("Im(omega) must be > 0")
    if t_max < 0:
        raise DomainError("t_max must be >= 0")
    if t_max == 0:
        return 0.0 + 0.0j
    if steps is None:
        steps = int(np.ceil(20.0 * t_max * max(1.0, spectrum.spectral_norm)))
    steps = max(int(steps), 8)
    weights, emn = _lehmann_weights(spectrum, rho, a, b)
    ts = np.linspace(0.0, t_max, steps + 1)
    values = np.empty(ts.shape, dtype=complex)
    chunk = 1024
    for start in range(0, ts.shape[0], chunk):
        sl = ts[start:start + chunk]
        values[start:start + chunk] = np.exp(1j * np.outer(sl, emn)) @ weights
    integrand = np.exp(1j * omega * ts) * values
    trapezoid = getattr(np, "trapezoid", np.trapz)
    return complex(trapezoid(integrand, ts))


def commutes_with(h: OperatorSum, op: OperatorSum, tol: float = 1e-10) -> bool:
    """Symbolic commutation test through the algebra layer."""
    comm = commutator(h, op)
    size = max(h.norm1() * op.norm1(), 1.0)
    return comm.norm1() <= tol * size
