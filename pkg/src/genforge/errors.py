"""Exception hierarchy shared by all genforge modules."""


class GenforgeError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(GenforgeError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(InvalidInputError):
    """Input is structurally valid but numerically unusable (e.g. all-zero image)."""


class ShapeError(InvalidInputError):
    """Array shapes do not line up for the requested operation."""


class DomainError(InvalidInputError):
    """A value sits outside the mathematical domain of the operation."""


class FormatError(GenforgeError, ValueError):
    """A file or byte stream does not match the expected on-disk format."""


class UnsupportedOperationError(GenforgeError):
    """The operation is not defined for this model family."""


class TrainingDivergedError(GenforgeError, RuntimeError):
    """A loss became non-finite during training."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"training diverged at step {step}")


class NotFoundError(GenforgeError, KeyError):
    """Referenced entity (session, item) does not exist."""


class ConflictError(GenforgeError):
    """Write rejected because it would overwrite an existing record."""


class InvalidStateError(GenforgeError):
    """Operation requires state the object is not in (e.g. no responses yet)."""
