"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: config problems exit 2,
numeric/degeneracy problems exit 3, I/O problems exit 4.
"""


class ConfigError(ValueError):
    """Invalid run configuration (bad keys, values, or combinations)."""


class DimensionMismatchError(ValueError):
    """Operators or states with incompatible qubit counts / dimensions."""


class DomainError(ValueError):
    """Argument outside the mathematical domain (e.g. Im(omega) <= 0)."""


class DegeneracyError(RuntimeError):
    """Degenerate or empty spectral sector, or a null starting operator."""


class EvaluationInstabilityError(RuntimeError):
    """Continued-fraction evaluation hit an underflow/conditioning guard."""


class RecursionInapplicableError(RuntimeError):
    """A method's rank or termination precondition is not met."""


NUMERIC_ERRORS = (
    DimensionMismatchError,
    DomainError,
    DegeneracyError,
    EvaluationInstabilityError,
    RecursionInapplicableError,
)
