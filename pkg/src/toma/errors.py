"""Exception types raised across the package."""


class TomaError(ValueError):
    """Base class for all validation errors."""


class ParseError(TomaError):
    """Malformed input file."""


class ZeroVector(TomaError):
    pass


class DuplicateId(TomaError):
    pass


class LengthMismatch(TomaError):
    pass


class InvalidMatrix(TomaError):
    pass


class TooLarge(TomaError):
    pass


class DimMismatch(TomaError):
    pass


class BoundsMismatch(TomaError):
    pass


class DegenerateEdge(TomaError):
    pass


class PairingIncomplete(TomaError):
    pass


class InvalidSpec(TomaError):
    pass


class NonFiniteLoss(TomaError):
    """Raised by the trainer; ``step`` holds the offending step index."""

    def __init__(self, step, value):
        super().__init__(f"non-finite loss {value!r} at step {step}")
        self.step = step
        self.value = value
