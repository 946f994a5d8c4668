"""Exception hierarchy for the radio labeling toolkit."""

from typing import Optional


class RadioLabelingError(Exception):
    """Base class for all toolkit errors."""


class GraphError(RadioLabelingError):
    """Raised for malformed graphs or graphs of the wrong class."""


class LimitExceededError(RadioLabelingError):
    """Raised when an exhaustive computation would exceed its configured bound."""


class PrimeBoundExceededError(LimitExceededError):
    """Raised when a faithful prime delay would need an index above the bound."""

    def __init__(self, index: object, bound: int):
        self.index = index
        self.bound = bound
        super().__init__(f"prime index {index} exceeds the configured bound {bound}")


class PreconditionError(RadioLabelingError):
    """Raised when an operation is called outside its precondition."""


class ScenarioError(RadioLabelingError):
    """Raised for inconsistent scenario descriptions."""


class InvariantViolation(RadioLabelingError):
    """Raised by verification suites when a checked property fails.

    Attributes:
        invariant: Short name of the violated property
        detail: Human readable description of the failing instance
    """

    def __init__(self, invariant: str, detail: Optional[str] = None):
        self.invariant = invariant
        self.detail = detail
        message = invariant if detail is None else f"{invariant}: {detail}"
        super().__init__(message)
