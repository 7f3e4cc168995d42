"""Many-operator recursion: matrix continued fractions for pool Green's functions.

Per level p the six-step loop computes the overlap matrix
R[p]_ab = (A_a[p], A_b[p]), its eigendecomposition R = U^dag D U with
M = sqrt(D) U, normalized operators (zeroed where D falls below the
threshold), the matrix Delta[p]_km = (L_p Ahat_k, Ahat_m), and the next
raw set A[p+1]_k = L_p Ahat_k - sum_m Delta[p]_km Ahat_m, where L_p
subtracts projections onto every previously accumulated normalized
operator (the ledger).

Two evaluators:

  normalized    i Ghat_n = shat_0(...shat_n(0)),
                shat_j(X) = -[w + Delta[j] + M[j+1]^dag X M[j+1]]^{-1}
  unnormalized  i G_n = s_0(...s_n(0)),
                s_j(X) = -M[j]^dag [w + Delta[j] + X]^{-1} M[j]

returning G_n = -i * (composed value), the same asymptotic-pinned
convention as the scalar module (i G_0 -> -R[0]/w entrywise).  On a
one-operator pool the unnormalized form reproduces the scalar evaluator
exactly.  Rank-deficient levels invert on the retained eigen-subspace
only and embed zeros elsewhere.

The P/Q three-term matrix recurrence is an independent evaluator for
full-rank data; P_n Q_n^{-1} equals the normalized composition.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import (DegeneracyError, DomainError,
                     EvaluationInstabilityError, RecursionInapplicableError)
from .expectation_backends import Backend, inner
from .exact_reference import DensityState
from .operator_algebra import OperatorSum, commutator

EXACT_THRESHOLD = 1e-10
SAMPLED_THRESHOLD = 1e-3
CLOSURE_TOL = 1e-12   # absolute eigenvalue floor relative to the level-0 scale


@dataclass(frozen=True)
class MatrixCFLevel:
    """One level of the foliation: overlap data and normalized operators."""

    r_matrix: np.ndarray          # Hermitian overlap matrix
    eigenvalues: np.ndarray       # descending, sub-threshold entries zeroed
    u_matrix: np.ndarray          # rows are eigenvectors: R = U^dag diag(D) U
    m_matrix: np.ndarray          # sqrt(D) U  (zero rows where D was zeroed)
    delta: np.ndarray
    normalized_ops: tuple[OperatorSum, ...]
    retained: np.ndarray          # bool mask of kept eigen-directions

    @property
    def rank(self) -> int:
        return int(self.retained.sum())


@dataclass(frozen=True)
class MatrixCFData:
    levels: tuple[MatrixCFLevel, ...]
    n_op: int
    threshold: float
    backend_fingerprint: str
    hermitized: bool = False

    @property
    def depth(self) -> int:
        return len(self.levels) - 1


def default_threshold(backend: Backend) -> float:
    return SAMPLED_THRESHOLD if backend.kind == "sampled" else EXACT_THRESHOLD


def _overlap_matrix(ops: Sequence[OperatorSum], backend: Backend,
                    rho: DensityState) -> np.ndarray:
    n = len(ops)
    r = np.zeros((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            r[a, b] = inner(backend, rho, ops[a], ops[b])
    return r


def _decompose(r: np.ndarray, threshold: float, backend_kind: str,
               level: int, floor: float = 0.0
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Descending eigendecomposition with thresholding and gauge fixing.

    `floor` is an absolute cut tied to the level-0 scale: once the
    foliation closes, a whole level's overlaps collapse to rounding noise
    and must not be revived by the relative threshold.
    """
    herm_defect = np.max(np.abs(r - r.conj().T))
    if herm_defect > 1e-8 * max(1.0, np.max(np.abs(r))):
        raise ArithmeticError(
            f"overlap matrix at level {level} is not Hermitian (defect {herm_defect:.3e})")
    evals, evecs = np.linalg.eigh((r + r.conj().T) / 2.0)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    # Gauge: make each eigenvector's largest-magnitude entry real positive.
    for k in range(evecs.shape[1]):
        col = evecs[:, k]
        pivot = col[np.argmax(np.abs(col))]
        if abs(pivot) > 0:
            evecs[:, k] = col * (pivot.conjugate() / abs(pivot))
    top = float(evals[0]) if evals.size else 0.0
    cut = max(threshold * max(top, 0.0), floor)
    if top <= 0:
        retained = np.zeros(evals.shape, dtype=bool)
    else:
        retained = evals > cut
    negatives = evals < -max(cut, 1e-300)
    if negatives.any():
        worst = float(evals.min())
        if backend_kind == "sampled":
            warnings.warn(
                f"clamping negative overlap eigenvalue {worst:.3e} at level {level}",
                RuntimeWarning)
        else:
            raise ArithmeticError(
                f"overlap matrix at level {level} has negative eigenvalue {worst:.3e}")
    clean = np.where(retained, evals, 0.0)
    u = evecs.conj().T                     # rows are eigenvectors
    m = np.sqrt(np.clip(clean, 0.0, None))[:, None] * u
    return clean, u, m, retained


def matrix_recursion(h: OperatorSum, ops: Sequence[OperatorSum], n: int,
                     backend: Backend, rho: DensityState,
                     threshold: Optional[float] = None) -> MatrixCFData:
    """Run the six-step loop for levels 0..n and store everything."""
    if not ops:
        raise ValueError("operator pool must be nonempty")
    if n < 0:
        raise ValueError("n must be >= 0")
    if threshold is None:
        threshold = default_threshold(backend)
    n_op = len(ops)
    zero_op = OperatorSum.zero(ops[0].qubit_count)

    ledger: list[OperatorSum] = []     # normalized ops of all previous levels
    raw = list(ops)
    levels: list[MatrixCFLevel] = []
    closure_floor = 0.0
    for level in range(n + 1):
        r = _overlap_matrix(raw, backend, rho)
        evals, u, m, retained = _decompose(r, threshold, backend.kind, level,
                                           floor=closure_floor)
        if level == 0 and not retained.any():
            raise DegeneracyError(
                "every pool overlap eigenvalue fell below the threshold")
        if level == 0 and evals.size:
            closure_floor = CLOSURE_TOL * float(np.max(evals))
        normalized = []
        for p in range(n_op):
            if retained[p]:
                coeffs = u[p, :] / np.sqrt(evals[p])
                normalized.append(OperatorSum.linear_combination(coeffs, raw))
            else:
                normalized.append(zero_op)

        # L_level[Ahat_k]: commutator minus projections onto the ledger.
        projected = []
        for p in range(n_op):
            if not retained[p]:
                projected.append(zero_op)
                continue
            lop = commutator(h, normalized[p])
            if ledger:
                coeffs = [1.0]
                basis = [lop]
                for past in ledger:
                    if past.is_zero():
                        continue
                    coeffs.append(-complex(inner(backend, rho, lop, past)))
                    basis.append(past)
                lop = OperatorSum.linear_combination(coeffs, basis)
            projected.append(lop)

        delta = np.zeros((n_op, n_op), dtype=complex)
        for k in range(n_op):
            if not retained[k]:
                continue
            for mcol in range(n_op):
                if retained[mcol]:
                    delta[k, mcol] = inner(backend, rho, projected[k],
                                           normalized[mcol])

        levels.append(MatrixCFLevel(
            r_matrix=r, eigenvalues=evals, u_matrix=u, m_matrix=m,
            delta=delta, normalized_ops=tuple(normalized), retained=retained))

        if level == n:
            break
        # Next raw set: subtract the level's own projections as well.
        next_raw = []
        for k in range(n_op):
            if not retained[k]:
                next_raw.append(zero_op)
                continue
            coeffs = [1.0]
            basis = [projected[k]]
            for mcol in range(n_op):
                if retained[mcol] and delta[k, mcol] != 0:
                    coeffs.append(-delta[k, mcol])
                    basis.append(normalized[mcol])
            next_raw.append(OperatorSum.linear_combination(coeffs, basis))
        ledger.extend(op for op in normalized if not op.is_zero())
        raw = next_raw

    return MatrixCFData(levels=tuple(levels), n_op=n_op,
                        threshold=float(threshold),
                        backend_fingerprint=backend.fingerprint())


# -- evaluation ---------------------------------------------------------

def _check_omega(omega: complex) -> complex:
    omega = complex(omega)
    if omega.imag <= 0:
        raise DomainError("Im(omega) must be > 0")
    return omega


def _masked_inverse(mat: np.ndarray, retained: np.ndarray) -> np.ndarray:
    """Inverse on the retained subspace, zeros elsewhere."""
    out = np.zeros_like(mat)
    if not retained.any():
        return out
    sub = mat[np.ix_(retained, retained)]
    try:
        inv = np.linalg.inv(sub)
    except np.linalg.LinAlgError as exc:
        raise EvaluationInstabilityError(
            f"singular resolvent on the retained subspace: {exc}") from exc
    out[np.ix_(retained, retained)] = inv
    return out


def eval_matrix_cf(data: MatrixCFData, omega: complex, n: int,
                   form: str = "unnormalized") -> np.ndarray:
    """Level-n matrix Green's function approximant G_n(omega)."""
    omega = _check_omega(omega)
    if not 0 <= n <= data.depth:
        raise ValueError(f"level {n} not stored (depth {data.depth})")
    if form not in ("normalized", "unnormalized"):
        raise ValueError(f"unknown form {form!r}")
    dim = data.n_op
    eye = np.eye(dim)
    x = np.zeros((dim, dim), dtype=complex)
    for j in range(n, -1, -1):
        level = data.levels[j]
        if form == "normalized":
            if j < n:
                m_next = data.levels[j + 1].m_matrix
                coupling = m_next.conj().T @ x @ m_next
            else:
                coupling = 0.0
            resolvent = omega * eye + level.delta + coupling
            x = -_masked_inverse(resolvent, level.retained)
        else:
            resolvent = omega * eye + level.delta + x
            core = _masked_inverse(resolvent, level.retained)
            x = -(level.m_matrix.conj().T @ core @ level.m_matrix)
    return -1j * x


def pq_recursion(data: MatrixCFData, omega: complex, n: int
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Independent evaluator via the matrix three-term recurrence.

    Returns (P, Q, G_check) where G_check = -i P Q^{-1} matches
    eval_matrix_cf(..., form="normalized").  P and Q carry a constant
    right factor M[n+1] that cancels in the quotient; the roots of
    det Q are unaffected.  Requires full-rank levels.
    """
    omega = _check_omega(omega)
    if not 0 <= n <= data.depth:
        raise ValueError(f"level {n} not stored (depth {data.depth})")
    for j in range(n + 1):
        level = data.levels[j]
        if level.rank != data.n_op:
            raise RecursionInapplicableError(
                f"level {j} has rank {level.rank} < {data.n_op}; "
                "the matrix recurrence needs invertible M")
    dim = data.n_op
    eye = np.eye(dim, dtype=complex)
    d0 = data.levels[0].delta
    p_bar = -eye
    q_bar = omega * eye + d0
    if n == 0:
        g = p_bar @ np.linalg.inv(q_bar)
        return p_bar, q_bar, -1j * g
    m1 = data.levels[1].m_matrix
    p_prev2, q_prev2 = np.zeros((dim, dim), dtype=complex), eye.copy()
    p_prev, q_prev = p_bar @ np.linalg.inv(m1), q_bar @ np.linalg.inv(m1)
    for k in range(1, n + 1):
        mk = data.levels[k].m_matrix
        factor = omega * eye + data.levels[k].delta
        p_bar = p_prev @ factor - p_prev2 @ mk.conj().T
        q_bar = q_prev @ factor - q_prev2 @ mk.conj().T
        if k < n:
            m_next_inv = np.linalg.inv(data.levels[k + 1].m_matrix)
            p_prev2, q_prev2 = p_prev, q_prev
            p_prev, q_prev = p_bar @ m_next_inv, q_bar @ m_next_inv
    g = p_bar @ np.linalg.inv(q_bar)
    return p_bar, q_bar, -1j * g


def q_polynomial(data: MatrixCFData, n: int) -> list[np.ndarray]:
    """Matrix coefficients of Q_n (up to the constant right factor M[n+1]),
    ascending powers of omega.  Degree n+1."""
    for j in range(n + 1):
        if data.levels[j].rank != data.n_op:
            raise RecursionInapplicableError("rank-deficient level")
    dim = data.n_op
    eye = np.eye(dim, dtype=complex)
    zero = np.zeros((dim, dim), dtype=complex)
    q_bar = [data.levels[0].delta.astype(complex), eye.copy()]
    if n == 0:
        return q_bar
    m1_inv = np.linalg.inv(data.levels[1].m_matrix)
    q_prev2 = [eye.copy()]
    q_prev = [c @ m1_inv for c in q_bar]
    for k in range(1, n + 1):
        mk = data.levels[k].m_matrix
        dk = data.levels[k].delta
        q_bar = [zero.copy() for _ in range(len(q_prev) + 1)]
        for power, coeff in enumerate(q_prev):
            q_bar[power] = q_bar[power] + coeff @ dk
            q_bar[power + 1] = q_bar[power + 1] + coeff
        for power, coeff in enumerate(q_prev2):
            q_bar[power] = q_bar[power] - coeff @ mk.conj().T
        if k < n:
            m_next_inv = np.linalg.inv(data.levels[k + 1].m_matrix)
            q_prev2 = q_prev
            q_prev = [c @ m_next_inv for c in q_bar]
    return q_bar


def det_polynomial(coeffs: list[np.ndarray]) -> np.ndarray:
    """Scalar polynomial det(sum_k coeffs[k] w^k), ascending powers.

    Recursive cofactor expansion over polynomial entries; fine for the
    small pools used here.
    """
    dim = coeffs[0].shape[0]
    entries = [[np.array([coeffs[k][i, j] for k in range(len(coeffs))])
                for j in range(dim)] for i in range(dim)]
    return _poly_det(entries)


def _poly_det(entries: list[list[np.ndarray]]) -> np.ndarray:
    dim = len(entries)
    if dim == 1:
        return entries[0][0]
    acc = np.zeros(1, dtype=complex)
    for col in range(dim):
        minor = [[entries[i][j] for j in range(dim) if j != col]
                 for i in range(1, dim)]
        term = np.convolve(entries[0][col], _poly_det(minor))
        sign = 1.0 if col % 2 == 0 else -1.0
        length = max(acc.shape[0], term.shape[0])
        acc = np.pad(acc, (0, length - acc.shape[0]))
        acc += sign * np.pad(term, (0, length - term.shape[0]))
    return acc


def hermitize(data: MatrixCFData, real: bool = False) -> MatrixCFData:
    """Project each R and Delta to its Hermitian part (real part if `real`).

    The eigendata is rebuilt only when the repair actually changed R;
    re-diagonalizing an unchanged matrix would regauge degenerate
    eigenvector pairs for no reason.
    """
    new_levels = []
    for level in data.levels:
        r = (level.r_matrix + level.r_matrix.conj().T) / 2.0
        delta = (level.delta + level.delta.conj().T) / 2.0
        if real:
            r = r.real.astype(complex)
            delta = delta.real.astype(complex)
        scale = max(1.0, float(np.max(np.abs(level.r_matrix))))
        if np.max(np.abs(r - level.r_matrix)) <= 1e-14 * scale:
            new_levels.append(replace(level, delta=delta))
            continue
        evals, u, m, retained = _decompose(r, data.threshold, "sampled", 0)
        new_levels.append(replace(level, r_matrix=r, delta=delta,
                                  eigenvalues=evals, u_matrix=u, m_matrix=m,
                                  retained=retained))
    return replace(data, levels=tuple(new_levels), hermitized=True)
