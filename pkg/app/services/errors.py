"""Exceptions raised by the numerical services."""


class LabError(Exception):
    """Base error. `detail` is the message stored on failed report records."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InputError(LabError):
    """Invalid vertex id, coinciding poles, malformed input file or expression."""


class PreconditionError(LabError):
    """An operation was called outside its documented domain."""


class DisconnectedError(LabError):
    """Two vertices that must be joined by a path are not."""


class DegeneratePathError(LabError):
    """A curve family contains a path of zero length."""


class NoPencilError(LabError):
    """The flow has value zero, so there is nothing to decompose."""


class QuadratureError(LabError):
    """A quadrature rule did not converge within the node budget."""

    def __init__(self, detail: str, nodes: int):
        super().__init__(f"{detail} (nodes={nodes})")
        self.nodes = nodes


class BudgetExceededError(LabError):
    """A vertex or search-label budget was exceeded."""
