"""Expectation-value backends: exact, finite-shot sampled, perturbed-state.

All recursion code goes through `expect` / `inner`, so swapping the
backend is the single plug point for every noise study.

Sampled model: each distinct Pauli word P gets an independent estimate
m_P = 2k/M - 1 with k ~ Binomial(M, (1 + <P>)/2), drawn once per
session and reused across all coefficients that touch the word.  That
reuse mirrors an experiment that measures each basis once, and makes
overlap matrices exactly Hermitian under noise.  Word sub-seeds are
seed XOR hash(word), so results are independent of evaluation order
and worker count.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionMismatchError
from .exact_reference import DensityState, apply_operator
from .operator_algebra import OperatorSum

_KINDS = ("exact", "sampled", "perturbed")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "exact"
    shots: int = 1024
    seed: int = 0
    epsilon: float = 0.0
    sigma: str = "maximally_mixed"   # or "random_pure" or a vector file path
    enforce_reality: Optional[bool] = None  # None: follow [rho, H] = 0 flag

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "sampled" and self.shots < 1:
            raise ConfigError("sampled backend needs shots >= 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")


def _word_hash(word: str) -> int:
    digest = hashlib.blake2b(word.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _entropy64(*parts) -> int:
    text = ":".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class _ExactCore:
    """Dense expectations with memoized operator-on-state applications."""

    def __init__(self):
        # keyed by ids; stored references pin the keys so ids stay valid
        self._applied: dict[tuple[int, int, bool],
                            tuple[object, object, np.ndarray]] = {}

    def _apply(self, state_vec: np.ndarray, op: OperatorSum,
               conjugate: bool) -> np.ndarray:
        key = (id(state_vec), id(op), conjugate)
        hit = self._applied.get(key)
        if hit is not None and hit[0] is op and hit[1] is state_vec:
            return hit[2]
        vec = apply_operator(op, state_vec, conjugate_coeffs=conjugate)
        self._applied[key] = (op, state_vec, vec)
        return vec

    def expect(self, rho: DensityState, op: OperatorSum) -> complex:
        if op.qubit_count != rho.qubit_count:
            raise DimensionMismatchError("operator/state qubit counts differ")
        total = 0.0 + 0.0j
        for prob, vec in rho.eigenpairs():
            total += prob * np.vdot(vec, apply_operator(op, vec))
        return complex(total)

    def inner(self, rho: DensityState, x: OperatorSum, y: OperatorSum) -> complex:
        """Tr(rho X Y^dag) = sum_k p_k <X^dag v_k | Y^dag v_k>."""
        if x.qubit_count != rho.qubit_count or y.qubit_count != rho.qubit_count:
            raise DimensionMismatchError("operator/state qubit counts differ")
        total = 0.0 + 0.0j
        for prob, vec in rho.eigenpairs():
            u = self._apply(vec, x, True)
            w = self._apply(vec, y, True)
            total += prob * np.vdot(u, w)
        return complex(total)


class ExactBackend:
    kind = "exact"

    def __init__(self, enforce_reality: Optional[bool] = None):
        self.enforce_reality = enforce_reality
        self._core = _ExactCore()

    def fingerprint(self) -> str:
        return "exact"

    def session(self, *_parts) -> "ExactBackend":
        return self

    def expect(self, rho: DensityState, op: OperatorSum) -> complex:
        return self._core.expect(rho, op)

    def inner(self, rho: DensityState, x: OperatorSum, y: OperatorSum):
        value = self._core.inner(rho, x, y)
        if _reality(self, rho):
            return value.real
        return value


class SampledBackend:
    """Per-Pauli binomial sampling on top of the exact word expectations."""

    kind = "sampled"

    def __init__(self, shots: int, seed: int,
                 enforce_reality: Optional[bool] = None):
        if shots < 1:
            raise ConfigError("shots must be >= 1")
        if shots > 2**62:
            raise ConfigError("shots overflow")
        self.shots = int(shots)
        self.seed = int(seed) & (2**64 - 1)
        self.enforce_reality = enforce_reality
        self._core = _ExactCore()
        self._estimates: dict[str, float] = {}
        self._rho_ref: Optional[DensityState] = None

    def fingerprint(self) -> str:
        return f"sampled(shots={self.shots},seed={self.seed})"

    def session(self, *parts) -> "SampledBackend":
        """Fresh measurement session with a derived sub-seed."""
        return SampledBackend(self.shots, _entropy64(self.seed, *parts),
                              enforce_reality=self.enforce_reality)

    def _bind(self, rho: DensityState) -> None:
        if self._rho_ref is not rho:
            self._rho_ref = rho
            self._estimates.clear()

    def _estimate(self, rho: DensityState, word: str) -> float:
        hit = self._estimates.get(word)
        if hit is not None:
            return hit
        exact = self._core.expect(rho, OperatorSum.from_label(1.0, word)).real
        p = min(1.0, max(0.0, (1.0 + exact) / 2.0))
        rng = np.random.default_rng(self.seed ^ _word_hash(word))
        k = rng.binomial(self.shots, p)
        value = 2.0 * k / self.shots - 1.0
        self._estimates[word] = value
        return value

    def expect(self, rho: DensityState, op: OperatorSum) -> complex:
        if op.qubit_count != rho.qubit_count:
            raise DimensionMismatchError("operator/state qubit counts differ")
        self._bind(rho)
        total = 0.0 + 0.0j
        for word, coeff in op.items():
            total += coeff * self._estimate(rho, word)
        return complex(total)

    def inner(self, rho: DensityState, x: OperatorSum, y: OperatorSum):
        value = self.expect(rho, x.matmul(y.dagger()))
        if _reality(self, rho):
            return value.real
        return value


class PerturbedBackend:
    """Exact expectations against (1 - eps) rho + eps sigma, by linearity."""

    kind = "perturbed"

    def __init__(self, sigma: DensityState, epsilon: float,
                 enforce_reality: Optional[bool] = None):
        if not 0.0 <= epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")
        self.sigma = sigma
        self.epsilon = float(epsilon)
        self.enforce_reality = enforce_reality
        self._core = _ExactCore()

    def fingerprint(self) -> str:
        return f"perturbed(eps={self.epsilon:g})"

    def session(self, *_parts) -> "PerturbedBackend":
        return self

    def expect(self, rho: DensityState, op: OperatorSum) -> complex:
        v = self._core.expect(rho, op)
        if self.epsilon:
            v = (1.0 - self.epsilon) * v + self.epsilon * self._core.expect(self.sigma, op)
        return complex(v)

    def inner(self, rho: DensityState, x: OperatorSum, y: OperatorSum):
        v = self._core.inner(rho, x, y)
        if self.epsilon:
            v = (1.0 - self.epsilon) * v + self.epsilon * self._core.inner(self.sigma, x, y)
        if _reality(self, rho):
            return complex(v).real
        return complex(v)


Backend = ExactBackend | SampledBackend | PerturbedBackend


def _reality(backend, rho: DensityState) -> bool:
    if backend.enforce_reality is None:
        if backend.kind == "perturbed" and backend.epsilon > 0:
            return bool(rho.commutes_with_H and backend.sigma.commutes_with_H)
        return bool(rho.commutes_with_H)
    return bool(backend.enforce_reality)


def expect(backend: Backend, rho: DensityState, op: OperatorSum) -> complex:
    """Tr(rho_effective O) under the chosen backend."""
    return backend.expect(rho, op)


def inner(backend: Backend, rho: DensityState, x: OperatorSum, y: OperatorSum):
    """GNS form (X, Y) = Tr(rho X Y^dag); real part only under enforce_reality."""
    return backend.inner(rho, x, y)


def make_perturbed(rho: DensityState, sigma: DensityState, eps: float) -> DensityState:
    """Convex combination (1 - eps) rho + eps sigma as an explicit state."""
    if rho.qubit_count != sigma.qubit_count:
        raise DimensionMismatchError("rho and sigma dimensions differ")
    if not 0.0 <= eps <= 1.0:
        raise ConfigError("eps must lie in [0, 1]")
    if eps == 0.0:
        return rho
    if eps == 1.0:
        return sigma
    mat = (1.0 - eps) * rho.density_matrix() + eps * sigma.density_matrix()
    out = DensityState.mixed(mat)
    out.commutes_with_H = bool(rho.commutes_with_H and sigma.commutes_with_H)
    return out


def make_sigma(source: str, qubit_count: int, seed: int = 0,
               hamiltonian: OperatorSum | None = None) -> DensityState:
    """Spurious-state builder for the perturbed backend.

    source: "maximally_mixed", "random_pure", or a path to a whitespace
    separated complex-amplitude file (re im per line).
    """
    dim = 1 << qubit_count
    if source == "maximally_mixed":
        return DensityState.mixed(np.eye(dim) / dim, hamiltonian=hamiltonian)
    if source == "random_pure":
        rng = np.random.default_rng(seed)
        vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        vec /= np.linalg.norm(vec)
        return DensityState.pure(vec, hamiltonian=hamiltonian)
    try:
        raw = np.loadtxt(source)
    except OSError as exc:
        raise ConfigError(f"cannot read sigma vector file {source!r}: {exc}") from exc
    vec = raw[:, 0] + 1j * raw[:, 1] if raw.ndim == 2 else raw.astype(complex)
    if vec.shape[0] != dim:
        raise DimensionMismatchError(
            f"sigma file has length {vec.shape[0]}, expected {dim}")
    vec = vec / np.linalg.norm(vec)
    return DensityState.pure(vec, hamiltonian=hamiltonian)


def make_backend(config: BackendConfig, qubit_count: int,
                 hamiltonian: OperatorSum | None = None) -> Backend:
    if config.kind == "exact":
        return ExactBackend(enforce_reality=config.enforce_reality)
    if config.kind == "sampled":
        return SampledBackend(config.shots, config.seed,
                              enforce_reality=config.enforce_reality)
    sigma = make_sigma(config.sigma, qubit_count, seed=config.seed,
                       hamiltonian=hamiltonian)
    return PerturbedBackend(sigma, config.epsilon,
                            enforce_reality=config.enforce_reality)
