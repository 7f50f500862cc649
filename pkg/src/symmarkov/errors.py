"""Exception hierarchy for symmarkov."""


class SymMarkovError(ValueError):
    """Base class for all toolkit errors."""


class DimensionError(SymMarkovError):
    pass


# measure construction

class AsymmetryError(SymMarkovError):
    pass


class ZeroFiberError(SymMarkovError):
    pass


class NonpositiveBaseError(SymMarkovError):
    pass


class NegativeWeightError(SymMarkovError):
    pass


class DiagonalMassError(SymMarkovError):
    pass


class EmptyTargetError(SymMarkovError):
    pass


class SchemaError(SymMarkovError):
    """Malformed or unknown-field JSON input."""


# kernels and discretization

class ParseError(SymMarkovError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += " (expected one of: " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(detail)


class UnknownIdentifierError(ParseError):
    pass


class EvaluationError(SymMarkovError):
    def __init__(self, message, point=None):
        self.point = point
        if point is not None:
            message = f"{message} at (x, y) = {point}"
        super().__init__(message)


class LevelTooLargeError(SymMarkovError):
    pass


class MonotonicityViolation(SymMarkovError):
    def __init__(self, message, level):
        self.level = level
        super().__init__(f"{message} (level {level})")


# operators, energy, equivalence

class ConvergenceError(SymMarkovError):
    pass


class SingularSystemError(SymMarkovError):
    pass


class IdentityViolation(SymMarkovError):
    """An identity that must hold up to rounding failed its residual check."""


class NonpositiveFactorError(SymMarkovError):
    pass


class NonProductFormError(SymMarkovError):
    pass


class SupportViolationError(SymMarkovError):
    pass


class SupportMismatchError(SymMarkovError):
    pass


# path space and Green functions

class EmptyStartError(SymMarkovError):
    pass


class HorizonExceededError(SymMarkovError):
    pass


class RecurrentDomainError(SymMarkovError):
    pass
