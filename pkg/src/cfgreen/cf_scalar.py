"""Single-operator recursion and scalar continued-fraction evaluation.

The chain is built by full Gram-Schmidt of nested commutators:

    A[j] = [H, A[j-1]] - sum_k (([H, A[j-1]], A[k]) / (A[k], A[k])) A[k]

with Gamma[j] = (A[j], A[j]) and Delta[j] = ([H, A[j]], A[j]) in the
state-induced inner product (X, Y) = Tr(rho X Y^dag).  The level-n
approximant is the composed Moebius map

    i G_n(w) = s_0(s_1(...s_n(0)...)),   s_j(z) = -Gamma[j]^2 / (z + Gamma[j] w + Delta[j])

with no extra normalization; the convention is pinned by the large-w
asymptote i G -> -Gamma[0]/w and by the exact-diagonalization oracle.

A second, independent evaluator runs the three-term recurrence for the
numerator/denominator polynomials

    Y[k+1] = (Gamma[k+1] w + Delta[k+1]) Y[k] - Gamma[k+1]^2 Y[k-1]

with A[-1] = 0, B[-1] = 1, A[0] = -Gamma[0]^2, B[0] = Gamma[0] w + Delta[0],
and G_n = A_n / B_n under the same convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (DegeneracyError, DomainError, EvaluationInstabilityError,
                     RecursionInapplicableError)
from .expectation_backends import Backend, inner
from .exact_reference import DensityState
from .operator_algebra import OperatorSum, commutator

TERMINATION_TOL = 1e-12   # Gamma[j] <= tol * Gamma[0] counts as exact closure
REORTH_DROP = 1e4         # norm drop triggering a second projection pass


@dataclass(frozen=True)
class ScalarCFData:
    """Chain operators and coefficients of one single-operator recursion."""

    chain: tuple[OperatorSum, ...]
    gammas: np.ndarray
    deltas: np.ndarray
    terminated_at: Optional[int]
    backend_fingerprint: str

    @property
    def levels(self) -> int:
        """Number of usable levels (coefficient pairs)."""
        return len(self.deltas)

    def effective_level(self, n: Optional[int]) -> int:
        """Deepest level actually composed when asked for level n."""
        top = self.levels - 1
        if self.terminated_at is not None:
            top = min(top, self.terminated_at - 1)
        if n is None:
            return top
        if n < 0:
            raise ValueError("level must be >= 0")
        return min(n, top)


def _to_real(value) -> float:
    # Real by construction when [rho, H] = 0; for non-commuting states the
    # imaginary residue is dropped, keeping the data contract (real
    # Gamma/Delta vectors) intact.
    return complex(value).real


def scalar_recursion(h: OperatorSum, a: OperatorSum, n: int, backend: Backend,
                     rho: DensityState,
                     termination_tol: float = TERMINATION_TOL) -> ScalarCFData:
    """Generate Gamma[0..n], Delta[0..n] and the orthogonal chain.

    Stops early with `terminated_at = j` once Gamma[j] falls to
    termination_tol * Gamma[0]: the Krylov space closed and every deeper
    approximant equals the exact correlator.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    gamma0 = _to_real(inner(backend, rho, a, a))
    if gamma0 <= 0:
        raise DegeneracyError(
            "starting operator lies in the null space of the state inner product")
    chain = [a]
    gammas = [gamma0]
    deltas: list[float] = []
    terminated_at: Optional[int] = None

    current = a
    for level in range(n + 1):
        lh = commutator(h, current)
        deltas.append(_to_real(inner(backend, rho, lh, current)))
        if level == n:
            break
        # Full Gram-Schmidt of [H, A[level]] against the whole chain.
        raw_norm2 = _to_real(inner(backend, rho, lh, lh))
        new_op = _project_out(lh, chain, gammas, backend, rho)
        gamma_new = _to_real(inner(backend, rho, new_op, new_op))
        if gamma_new > 0 and raw_norm2 > 0 and \
                gamma_new < raw_norm2 / (REORTH_DROP ** 2):
            # Classical Gram-Schmidt lost orthogonality; one more pass.
            new_op = _project_out(new_op, chain, gammas, backend, rho)
            gamma_new = _to_real(inner(backend, rho, new_op, new_op))
        if gamma_new <= termination_tol * gamma0:
            terminated_at = level + 1
            chain.append(new_op)
            gammas.append(max(gamma_new, 0.0))
            break
        chain.append(new_op)
        gammas.append(gamma_new)
        current = new_op

    return ScalarCFData(chain=tuple(chain),
                        gammas=np.asarray(gammas, dtype=float),
                        deltas=np.asarray(deltas, dtype=float),
                        terminated_at=terminated_at,
                        backend_fingerprint=backend.fingerprint())


def _project_out(op: OperatorSum, chain: Sequence[OperatorSum],
                 gammas: Sequence[float], backend: Backend,
                 rho: DensityState) -> OperatorSum:
    coeffs = [1.0]
    ops = [op]
    for member, gamma in zip(chain, gammas):
        overlap = complex(inner(backend, rho, op, member))
        coeffs.append(-overlap / gamma)
        ops.append(member)
    return OperatorSum.linear_combination(coeffs, ops)


def _check_omega(omega: complex) -> complex:
    omega = complex(omega)
    if omega.imag <= 0:
        raise DomainError("Im(omega) must be > 0")
    return omega


def eval_scalar_cf(data: ScalarCFData, omega: complex,
                   n: Optional[int] = None) -> complex:
    """G_n(omega) by composing the Moebius maps innermost-out."""
    omega = _check_omega(omega)
    top = data.effective_level(n)
    z = 0.0 + 0.0j
    for j in range(top, -1, -1):
        gamma = data.gammas[j]
        z = -(gamma * gamma) / (z + gamma * omega + data.deltas[j])
    return -1j * z


def eval_scalar_recurrence(data: ScalarCFData, omega: complex, n: int) -> complex:
    """G_n(omega) through the three-term recurrence; must match eval_scalar_cf."""
    omega = _check_omega(omega)
    top = data.effective_level(n)
    a_prev, a_cur = 0.0 + 0.0j, -(data.gammas[0] ** 2)
    b_prev, b_cur = 1.0 + 0.0j, data.gammas[0] * omega + data.deltas[0]
    for k in range(1, top + 1):
        gamma = data.gammas[k]
        factor = gamma * omega + data.deltas[k]
        a_prev, a_cur = a_cur, factor * a_cur - gamma * gamma * a_prev
        b_prev, b_cur = b_cur, factor * b_cur - gamma * gamma * b_prev
    if abs(b_cur) < 1e-280:
        # Cannot happen for Im(omega) > 0 (denominator roots are real),
        # but guard the division anyway.
        raise EvaluationInstabilityError(
            f"|B_n({omega})| underflow in the recurrence evaluator")
    return -1j * (a_cur / b_cur)


def denominator_polynomial(data: ScalarCFData, n: int) -> np.ndarray:
    """Coefficients of B_n(omega), ascending powers (degree n+1)."""
    top = data.effective_level(n)
    b_prev = np.array([1.0])
    b_cur = np.array([data.deltas[0], data.gammas[0]])
    for k in range(1, top + 1):
        gamma = data.gammas[k]
        lin = np.array([data.deltas[k], gamma])
        grown = np.convolve(b_cur, lin)
        grown[:b_prev.shape[0]] -= gamma * gamma * b_prev
        b_prev, b_cur = b_cur, grown
    return b_cur


def theorem1_bound(data: ScalarCFData, n: int, r: float) -> tuple[float, float]:
    """(Lambda, bound): the error bound holds for Im(omega) >= Lambda.

    Lambda = sqrt(Gamma[n] / (Gamma[n-1] r (1-r)));
    bound  = r/(1-2r) * Gamma[n] * |r (1-r) Gamma[n-1]/Gamma[n]|^(n + 1/2).

    A terminated chain means the truncation is exact: (0, 0).
    """
    if not 0.0 < r < 0.5:
        raise DomainError("r must lie in (0, 1/2)")
    if n < 1:
        raise ValueError("the bound needs n >= 1")
    if data.terminated_at is not None and data.terminated_at <= n:
        return 0.0, 0.0
    if n >= len(data.gammas):
        raise ValueError(f"level {n} not available (chain has {len(data.gammas)})")
    gamma_n = float(data.gammas[n])
    gamma_prev = float(data.gammas[n - 1])
    if gamma_prev <= 0:
        raise DegeneracyError("Gamma[n-1] must be positive")
    lam = float(np.sqrt(gamma_n / (gamma_prev * r * (1.0 - r))))
    ratio = abs(r * (1.0 - r) * gamma_prev / gamma_n)
    bound = r / (1.0 - 2.0 * r) * gamma_n * ratio ** (n + 0.5)
    return lam, float(bound)


def theorem1_bound_scan(data: ScalarCFData, n: int,
                        rs: Sequence[float] = tuple(np.arange(0.05, 0.46, 0.05))
                        ) -> tuple[float, float, float]:
    """The free parameter can be optimised; return (r, Lambda, bound) minimizing the bound."""
    best = None
    for r in rs:
        lam, bound = theorem1_bound(data, n, float(r))
        if best is None or bound < best[2]:
            best = (float(r), lam, bound)
    return best


# -- Jones--Thron stability experiment ---------------------------------

@dataclass(frozen=True)
class StabilityReport:
    """Per-frequency noise amplification against the 6s/(1-q) bound."""

    omegas: np.ndarray
    q: np.ndarray                # max_j |g_j(omega)|
    bound: np.ndarray            # 6 s / (1 - q) where applicable, else nan
    max_abs_eps: np.ndarray      # worst measured relative error over trials
    applicable: np.ndarray       # q < 1 mask
    s: float
    trials: int
    seed: int

    def violations(self) -> int:
        ok = self.applicable
        return int(np.sum(self.max_abs_eps[ok] > self.bound[ok]))


def _compose_tail(gammas, deltas, omega) -> complex:
    z = 0.0 + 0.0j
    for j in range(len(deltas) - 1, -1, -1):
        z = -(gammas[j] ** 2) / (z + gammas[j] * omega + deltas[j])
    return z


def jones_thron_experiment(data: ScalarCFData, s: float, omegas,
                           trials: int = 100, seed: int = 0,
                           n: Optional[int] = None) -> StabilityReport:
    """Monte-Carlo check of the continued-fraction stability theorem.

    Every Gamma[j], Delta[j] is perturbed by independent uniform relative
    noise of magnitude <= s; the measured relative error of the composed
    fraction is compared against 6s/(1-q) with
    q = max_j |i G^{(j+1)} / (Gamma[j] w + Delta[j] + i G^{(j+1)})|,
    evaluated on the unperturbed chain.  Frequencies with q >= 1 are
    reported as bound-inapplicable, not as failures.
    """
    if not 0.0 <= s < 1.0:
        raise DomainError("s must lie in [0, 1)")
    top = data.effective_level(n)
    if top < 1:
        raise RecursionInapplicableError(
            "stability experiment needs at least two usable levels")
    gammas = data.gammas[:top + 1].astype(float)
    deltas = data.deltas[:top + 1].astype(float)
    grid = np.atleast_1d(np.asarray(omegas, dtype=complex))
    for w in grid:
        _check_omega(w)

    # Unperturbed tails i G^{(j)} and the local amplification factors g_j.
    q = np.zeros(grid.shape)
    base = np.empty(grid.shape, dtype=complex)
    for k, w in enumerate(grid):
        tails = np.zeros(top + 2, dtype=complex)  # tails[j] = i G^{(j)}
        for j in range(top, -1, -1):
            tails[j] = -(gammas[j] ** 2) / (tails[j + 1] + gammas[j] * w + deltas[j])
        g = np.array([abs(tails[j + 1] / (gammas[j] * w + deltas[j] + tails[j + 1]))
                      for j in range(top + 1)])
        q[k] = g.max()
        base[k] = tails[0]

    rng = np.random.default_rng(seed)
    max_eps = np.zeros(grid.shape)
    for _ in range(trials):
        gamma_noise = 1.0 + rng.uniform(-s, s, size=top + 1)
        delta_noise = 1.0 + rng.uniform(-s, s, size=top + 1)
        pg = gammas * gamma_noise
        pd = deltas * delta_noise
        for k, w in enumerate(grid):
            err = abs(_compose_tail(pg, pd, w) / base[k] - 1.0)
            if err > max_eps[k]:
                max_eps[k] = err

    applicable = q < 1.0
    bound = np.full(grid.shape, np.nan)
    bound[applicable] = 6.0 * s / (1.0 - q[applicable])
    return StabilityReport(omegas=grid, q=q, bound=bound, max_abs_eps=max_eps,
                           applicable=applicable, s=float(s),
                           trials=int(trials), seed=int(seed))
