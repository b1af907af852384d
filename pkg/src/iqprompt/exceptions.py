"""Exception types raised across the package."""


class IQPromptError(Exception):
    """Base class for all package errors."""


class InvalidArgument(IQPromptError, ValueError):
    pass


class UnsupportedScheme(InvalidArgument):
    pass


class InvalidWarp(InvalidArgument):
    pass


class ShapeMismatch(IQPromptError, ValueError):
    pass


class DegenerateSignal(IQPromptError, ValueError):
    pass


class DegenerateKappa(IQPromptError, ValueError):
    pass


class DegenerateReference(IQPromptError, ValueError):
    pass


class MissingLabels(IQPromptError, ValueError):
    pass


class InsufficientShots(IQPromptError, ValueError):
    pass


class SequenceTooLong(IQPromptError, ValueError):
    pass


class UnsupportedFormat(IQPromptError, IOError):
    pass


class CorruptDataset(IQPromptError, IOError):
    pass


class IncompatibleCheckpoint(IQPromptError):
    pass


class CorruptCheckpoint(IQPromptError, IOError):
    pass


class NonFiniteGradient(IQPromptError, ArithmeticError):
    pass


class NonFiniteLoss(IQPromptError, ArithmeticError):
    """Training produced a NaN or infinite loss.

    ``batch_id`` identifies the offending batch as ``(epoch, dataset, index)``.
    """

    def __init__(self, message, batch_id=None):
        super().__init__(message)
        self.batch_id = batch_id


class ConfigError(IQPromptError, ValueError):
    """Bad configuration document; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
