"""Exception types shared across the toolkit."""


class CstkError(Exception):
    """Base class for all toolkit errors."""


class BranchPoint(CstkError):
    """Matrix logarithm requested at (or too close to) -I."""


class DegreeTooHigh(CstkError):
    """Form operation would exceed the grid dimension."""


class DegreeMismatch(CstkError):
    """Operands have incompatible form degrees."""


class DimMismatch(CstkError):
    """Operation requires a grid of a specific dimension."""


class GridMismatch(CstkError):
    """Operands live on different grids."""


class NotFlat(CstkError):
    """Connection fails the flatness precondition."""

    def __init__(self, residual, tol):
        super().__init__(f"flatness residual {residual:.3e} exceeds tolerance {tol:.3e}")
        self.residual = residual
        self.tol = tol


class NonConvergence(CstkError):
    """Iterative solver stopped without reaching its tolerance.

    Carries the final residual and the last iterate so callers can inspect
    or restart.
    """

    def __init__(self, message, residual=None, iterate=None):
        super().__init__(message)
        self.residual = residual
        self.iterate = iterate


class ParseError(CstkError):
    """Presentation text does not match the grammar."""

    def __init__(self, message, position, expected=()):
        super().__init__(f"{message} at position {position}" +
                         (f" (expected one of: {', '.join(sorted(expected))})" if expected else ""))
        self.position = position
        self.expected = frozenset(expected)


class IllConditioned(CstkError):
    """Singular-value gap at the rank cutoff is too small to trust."""

    def __init__(self, message, gap):
        super().__init__(f"{message}: spectral gap {gap:.2f}x < 10x at cutoff")
        self.gap = gap


class NotInteger(CstkError):
    """Degree-type integral is too far from an integer (under-resolved map)."""

    def __init__(self, value):
        super().__init__(f"value {value:.6f} is not within 0.25 of an integer")
        self.value = value


class StepTooCoarse(CstkError):
    """Spectral-flow path samples are too far apart to count crossings."""


class ConvergenceFailure(CstkError):
    """Iterative eigensolver failed to converge."""
