"""Exception types raised by orthosolve."""


class OrthosolveError(Exception):
    """Base class for all library errors."""


class ParameterError(OrthosolveError, ValueError):
    """A parameter violates its documented domain."""


class ShapeMismatch(OrthosolveError, ValueError):
    pass


class DomainError(OrthosolveError, ValueError):
    pass


class DegenerateInput(OrthosolveError, ValueError):
    pass


class RankDeficient(OrthosolveError, ArithmeticError):
    pass


class NonConvergence(OrthosolveError, ArithmeticError):
    pass


class NumericalBreakdown(OrthosolveError, ArithmeticError):
    """Non-finite values appeared inside an iteration."""


class InfeasibleStart(OrthosolveError, ValueError):
    pass


class BacktrackExhausted(OrthosolveError, ArithmeticError):
    pass


class EmptyBatch(OrthosolveError, ValueError):
    pass
