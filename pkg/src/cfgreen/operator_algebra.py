"""Exact symbolic algebra over sums of Pauli strings.

An operator on n qubits is stored as a map from a length-n word over
{I, X, Y, Z} to a complex coefficient.  All phases live in the
coefficients; words are plain letters.  Values are immutable after
construction and every operation returns a new object, so they are safe
to share across threads.

Term ordering is lexicographic everywhere (serialization, iteration),
which keeps downstream runs bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .errors import DimensionMismatchError

# Default relative tolerance used to drop numerically-zero residues of
# nested commutators.  The cutoff is tol * max(1, largest |coeff|), so a
# sum whose only coefficients are below tol canonicalizes to zero.
DEFAULT_TOL = 1e-12

_LETTERS = "IXYZ"

# Single-site products: (a, b) -> (phase, letter) with a.b = phase * letter.
_SITE_MUL: dict[tuple[str, str], tuple[complex, str]] = {}
for _p in _LETTERS:
    _SITE_MUL[("I", _p)] = (1.0, _p)
    _SITE_MUL[(_p, "I")] = (1.0, _p)
    _SITE_MUL[(_p, _p)] = (1.0, "I")
for _a, _b, _c in (("X", "Y", "Z"), ("Y", "Z", "X"), ("Z", "X", "Y")):
    _SITE_MUL[(_a, _b)] = (1j, _c)
    _SITE_MUL[(_b, _a)] = (-1j, _c)


def _check_word(word: str, n: int) -> None:
    if len(word) != n:
        raise DimensionMismatchError(
            f"word {word!r} has length {len(word)}, expected {n}")
    for ch in word:
        if ch not in _LETTERS:
            raise ValueError(f"invalid Pauli letter {ch!r} in {word!r}")


@dataclass(frozen=True)
class PauliTerm:
    """A single Pauli string with a complex prefactor."""

    coefficient: complex
    letters: str


def pauli_mul(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Product of two Pauli terms, phase absorbed into the coefficient."""
    if len(a.letters) != len(b.letters):
        raise DimensionMismatchError(
            f"cannot multiply words of length {len(a.letters)} and {len(b.letters)}")
    phase = complex(a.coefficient) * complex(b.coefficient)
    out = []
    for x, y in zip(a.letters, b.letters):
        p, c = _SITE_MUL[(x, y)]
        phase *= p
        out.append(c)
    return PauliTerm(phase, "".join(out))


class OperatorSum:
    """A linear combination of Pauli words with complex coefficients.

    Canonical at rest: duplicate words merged, coefficients below the
    canonicalization cutoff dropped.
    """

    __slots__ = ("qubit_count", "_terms")

    def __init__(self, qubit_count: int, terms: Mapping[str, complex] | None = None,
                 tol: float = DEFAULT_TOL):
        if qubit_count < 1:
            raise ValueError("qubit_count must be >= 1")
        object.__setattr__(self, "qubit_count", int(qubit_count))
        merged: dict[str, complex] = {}
        if terms:
            for word, coeff in terms.items():
                _check_word(word, qubit_count)
                merged[word] = merged.get(word, 0.0) + complex(coeff)
        object.__setattr__(self, "_terms", _canonical_dict(merged, tol))

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("OperatorSum is immutable")

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, qubit_count: int) -> "OperatorSum":
        return cls(qubit_count, {})

    @classmethod
    def identity(cls, qubit_count: int, coeff: complex = 1.0) -> "OperatorSum":
        return cls(qubit_count, {"I" * qubit_count: coeff})

    @classmethod
    def from_term(cls, term: PauliTerm) -> "OperatorSum":
        return cls(len(term.letters), {term.letters: term.coefficient})

    @classmethod
    def from_label(cls, coeff: complex, word: str) -> "OperatorSum":
        return cls(len(word), {word: coeff})

    @classmethod
    def linear_combination(cls, coeffs: Iterable[complex],
                           ops: Iterable["OperatorSum"],
                           tol: float = DEFAULT_TOL) -> "OperatorSum":
        """sum_k coeffs[k] * ops[k], merged in a single pass."""
        ops = list(ops)
        coeffs = list(coeffs)
        if not ops:
            raise ValueError("empty linear combination")
        n = ops[0].qubit_count
        acc: dict[str, complex] = {}
        for c, op in zip(coeffs, ops):
            if op.qubit_count != n:
                raise DimensionMismatchError("mixed qubit counts in combination")
            if c == 0:
                continue
            for word, w in op._terms.items():
                acc[word] = acc.get(word, 0.0) + c * w
        out = cls.__new__(cls)
        object.__setattr__(out, "qubit_count", n)
        object.__setattr__(out, "_terms", _canonical_dict(acc, tol))
        return out

    # -- inspection ---------------------------------------------------

    @property
    def terms(self) -> dict[str, complex]:
        """Canonically ordered copy of the term map."""
        return dict(self._terms)

    def items(self) -> Iterator[tuple[str, complex]]:
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, word: str) -> complex:
        _check_word(word, self.qubit_count)
        return self._terms.get(word, 0.0)

    def norm1(self) -> float:
        """Sum of |coefficients| (crude size measure, not the GNS norm)."""
        return sum(abs(c) for c in self._terms.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorSum):
            return NotImplemented
        return self.qubit_count == other.qubit_count and self._terms == other._terms

    __hash__ = None  # mutable-looking container semantics

    def __repr__(self) -> str:
        if not self._terms:
            return f"OperatorSum(0 on {self.qubit_count} qubits)"
        head = ", ".join(f"{w}: {c:.6g}" for w, c in list(self._terms.items())[:4])
        more = "" if len(self._terms) <= 4 else f", ... ({len(self._terms)} terms)"
        return f"OperatorSum({head}{more})"

    # -- algebra ------------------------------------------------------

    def _require_same_size(self, other: "OperatorSum") -> None:
        if self.qubit_count != other.qubit_count:
            raise DimensionMismatchError(
                f"qubit counts differ: {self.qubit_count} vs {other.qubit_count}")

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        self._require_same_size(other)
        acc = dict(self._terms)
        for word, c in other._terms.items():
            acc[word] = acc.get(word, 0.0) + c
        return _wrap(self.qubit_count, acc)

    def __sub__(self, other: "OperatorSum") -> "OperatorSum":
        self._require_same_size(other)
        acc = dict(self._terms)
        for word, c in other._terms.items():
            acc[word] = acc.get(word, 0.0) - c
        return _wrap(self.qubit_count, acc)

    def __neg__(self) -> "OperatorSum":
        return self.scale(-1.0)

    def scale(self, factor: complex) -> "OperatorSum":
        return _wrap(self.qubit_count,
                     {w: factor * c for w, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, OperatorSum):
            return self.matmul(other)
        return self.scale(other)

    def __rmul__(self, factor: complex) -> "OperatorSum":
        return self.scale(factor)

    def matmul(self, other: "OperatorSum") -> "OperatorSum":
        """Operator product, sitewise Pauli multiplication with phases."""
        self._require_same_size(other)
        acc: dict[str, complex] = {}
        for wa, ca in self._terms.items():
            for wb, cb in other._terms.items():
                phase = ca * cb
                out = []
                for x, y in zip(wa, wb):
                    p, c = _SITE_MUL[(x, y)]
                    phase *= p
                    out.append(c)
                word = "".join(out)
                acc[word] = acc.get(word, 0.0) + phase
        return _wrap(self.qubit_count, acc)

    def dagger(self) -> "OperatorSum":
        """Hermitian adjoint: conjugate coefficients (words are self-adjoint)."""
        return _wrap(self.qubit_count,
                     {w: c.conjugate() for w, c in self._terms.items()})

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max((abs(c) for c in self._terms.values()), default=1.0)
        return all(abs(c.imag) <= tol * max(1.0, scale)
                   for c in self._terms.values())

    # -- serialization ------------------------------------------------

    def to_text(self) -> str:
        """Lines `<coeff_re> <coeff_im> <word>` in canonical order."""
        return "\n".join(f"{c.real:.17g} {c.imag:.17g} {w}"
                         for w, c in self._terms.items())

    @classmethod
    def from_text(cls, text: str, qubit_count: int) -> "OperatorSum":
        terms: dict[str, complex] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            re_s, im_s, word = line.split()
            terms[word] = complex(float(re_s), float(im_s))
        return cls(qubit_count, terms)


def _canonical_dict(raw: dict[str, complex], tol: float) -> dict[str, complex]:
    if tol < 0:
        raise ValueError("tolerance must be >= 0")
    if not raw:
        return {}
    cutoff = tol * max(1.0, max(abs(c) for c in raw.values()))
    kept = {w: c for w, c in raw.items() if abs(c) > cutoff}
    return {w: kept[w] for w in sorted(kept)}


def _wrap(n: int, raw: dict[str, complex], tol: float = DEFAULT_TOL) -> OperatorSum:
    out = OperatorSum.__new__(OperatorSum)
    object.__setattr__(out, "qubit_count", n)
    object.__setattr__(out, "_terms", _canonical_dict(raw, tol))
    return out


def commutator(a: OperatorSum, b: OperatorSum) -> OperatorSum:
    """[a, b] = ab - ba, canonicalized."""
    return a.matmul(b) - b.matmul(a)


def anticommutator(a: OperatorSum, b: OperatorSum) -> OperatorSum:
    """{a, b} = ab + ba, canonicalized."""
    return a.matmul(b) + b.matmul(a)


def dagger(a: OperatorSum) -> OperatorSum:
    return a.dagger()


def canonicalize(a: OperatorSum, tol: float = DEFAULT_TOL) -> OperatorSum:
    """Re-canonicalize with an explicit tolerance.

    Duplicates are already merged at construction; this re-applies the
    drop rule with cutoff tol * max(1, largest |coeff|).
    """
    return _wrap(a.qubit_count, dict(a._terms), tol)


def max_weight(a: OperatorSum) -> int:
    """Largest number of non-identity letters over all terms; 0 if empty."""
    weight = 0
    for word in a._terms:
        weight = max(weight, sum(1 for ch in word if ch != "I"))
    return weight
