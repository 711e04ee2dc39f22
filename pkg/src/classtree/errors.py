"""Exception types shared across the package."""


class ClasstreeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ClasstreeError, ValueError):
    """An argument violates an operation's preconditions."""


class InvalidConfigError(InvalidInputError):
    """A configuration object is inconsistent or incomplete."""


class FormatError(ClasstreeError, ValueError):
    """An interchange file is malformed; the message names the offending field."""


class TrainingFailureError(ClasstreeError, RuntimeError):
    """Training diverged. Carries the epoch at which the loss became non-finite."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch
