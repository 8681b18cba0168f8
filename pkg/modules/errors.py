"""
Exception hierarchy for the certifier.

Every error carries the process exit code the CLI maps it to:
  1 = certified failure (the input provably lacks the claimed structure)
  2 = numerical non-certification (a solver could not produce a certificate)
  3 = input error (unreadable or malformed documents, unknown names)
"""


class OrbitCertError(Exception):
    """Base class for all certifier errors."""
    exit_code = 2


class CertifiedFailure(OrbitCertError):
    exit_code = 1


class NumericalFailure(OrbitCertError):
    exit_code = 2


class InputError(OrbitCertError):
    exit_code = 3


# ── Dense kernels ─────────────────────────────────────────────

class NonFiniteError(InputError):
    """Matrix contains NaN or Inf entries."""


class NotPositiveDefiniteError(NumericalFailure):
    pass


class SingularMatrixError(NumericalFailure):
    pass


class DimensionMismatchError(InputError):
    pass


# ── Lie algebra structure ─────────────────────────────────────

class DegenerateBasisError(CertifiedFailure):
    """Basis elements are linearly dependent."""


class IndexOutOfRangeError(InputError):
    pass


class NotClosedError(CertifiedFailure):
    """Basis is not closed under the bracket."""


class ZeroAlgebraError(InputError):
    pass


# ── Cartan decompositions ─────────────────────────────────────

class EmptyKernelError(NumericalFailure):
    """No symmetric matrix satisfies the compatibility constraints."""

    def __init__(self, message: str, diagnosis: dict | None = None):
        super().__init__(message)
        self.diagnosis = diagnosis or {}


class NoPositiveDefiniteElementError(NumericalFailure):
    """Constraint kernel is non-trivial but holds no positive-definite element."""

    def __init__(self, message: str, diagnosis: dict | None = None):
        super().__init__(message)
        self.diagnosis = diagnosis or {}


class IncompatibleInputsError(CertifiedFailure):
    pass


class EmptyFixedSetError(NumericalFailure):
    def __init__(self, message: str, diagnosis: dict | None = None):
        super().__init__(message)
        self.diagnosis = diagnosis or {}


class ConstraintViolatedError(InputError):
    """Point does not lie in the fixed set it was evaluated on."""


# ── Symmetric space geometry ──────────────────────────────────

class NotTracelessError(InputError):
    pass


class BaseMismatchError(InputError):
    """Tangent vectors live at different base points."""


class DegeneratePlaneError(InputError):
    pass


class DegenerateOrbitError(NumericalFailure):
    """Orbit dimension cannot be resolved at this point."""


class NotNormalError(NumericalFailure):
    """Geodesic velocity is not normal to the orbit."""


# ── Documents ─────────────────────────────────────────────────

class ParseError(InputError):
    def __init__(self, message: str, position: int = 0, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column}, char {position})")
        self.position = position
        self.line = line
        self.column = column


class SchemaError(InputError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownCatalogEntryError(InputError):
    def __init__(self, name: str, suggestion: str | None = None):
        hint = f" Did you mean '{suggestion}'?" if suggestion else ""
        super().__init__(f"Unknown catalog entry '{name}'.{hint}")
        self.name = name
        self.suggestion = suggestion
