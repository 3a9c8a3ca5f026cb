"""Exception hierarchy shared by all modules."""


class DPPOError(Exception):
    """Base class for every error raised by this package."""


class InputError(DPPOError, ValueError):
    """Malformed or out-of-range argument."""


class UsageError(DPPOError, RuntimeError):
    """Operation called in an invalid state (e.g. stepping a finished episode)."""


class NumericError(DPPOError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""


class FormatError(DPPOError, ValueError):
    """Checkpoint or config file could not be decoded."""


class ConfigError(DPPOError, ValueError):
    """Invalid training configuration."""

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


class VerificationError(DPPOError, AssertionError):
    """An oracle check failed; the message carries the reproducing instance."""
