"""Exception and warning types shared across the package."""


class VolcastError(Exception):
    """Base class for all volcast errors."""


class MissingFile(VolcastError):
    pass


class MalformedRow(VolcastError):
    """A CSV row that violates the bar invariants; carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class NonMonotoneDates(VolcastError):
    pass


class MalformedRecord(VolcastError):
    pass


class DimensionMismatch(VolcastError):
    pass


class EmptyIntersection(VolcastError):
    pass


class InsufficientHistory(VolcastError):
    pass


class KOutOfRange(VolcastError):
    pass


class ShapeMismatch(VolcastError):
    def __init__(self, op: str, *shapes):
        super().__init__(f"{op}: incompatible shapes {shapes}")
        self.op = op
        self.shapes = shapes


class NonScalarLoss(VolcastError):
    pass


class DegenerateWindow(VolcastError):
    pass


class DivergedLoss(VolcastError):
    pass


class ZeroTarget(VolcastError):
    pass


class NonPositiveInput(VolcastError):
    pass


class EmptyTestSet(VolcastError):
    pass


class InvalidSpec(VolcastError):
    pass


class SingularDesignWarning(UserWarning):
    """Rank-deficient design: the solver fell back to the minimum-norm solution."""


class NoConvergenceWarning(UserWarning):
    """Coordinate descent hit the sweep limit; the best iterate was returned."""
