"""Shared exception types for the scheduling layers."""


class SchedulingError(RuntimeError):
    """A coflow could not be scheduled on the current network state.

    Raised when some flow has no usable route (every path crosses a link
    with no available bandwidth) or a baseline's candidate LP is infeasible.
    The online policy layer reacts by parking the coflow in a waiting queue.
    """
