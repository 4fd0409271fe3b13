"""Exception types raised by the library.

Verification failures are returned as data (violation reports); these
exceptions cover bad input, unmet preconditions and exhausted searches.
"""


class PingPongError(Exception):
    """Base class for all library errors."""


class ZeroVector(PingPongError, ValueError):
    pass


class PointNotOnHyperplane(PingPongError, ValueError):
    pass


class InvalidRadii(PingPongError, ValueError):
    pass


class DegenerateRadii(PingPongError, ValueError):
    pass


class BadModulus(PingPongError, ValueError):
    pass


class CapExceeded(PingPongError, RuntimeError):
    pass


class IndexOutOfRange(PingPongError, IndexError):
    pass


class EqualFunctions(PingPongError, ValueError):
    pass


class PreconditionViolated(PingPongError, ValueError):
    """A hypothesis of a construction failed; the message names the
    condition and the exact inequality that did not hold."""

    def __init__(self, condition, detail=""):
        self.condition = condition
        self.detail = detail
        super().__init__(f"{condition}: {detail}" if detail else condition)


class SearchExhausted(PingPongError, RuntimeError):
    """A bounded search ran out of budget. This is never a proof that
    the searched-for object does not exist."""

    def __init__(self, stage, budget=None):
        self.stage = stage
        self.budget = budget
        msg = f"search exhausted at {stage}"
        if budget is not None:
            msg += f" (budget: {budget})"
        super().__init__(msg)
