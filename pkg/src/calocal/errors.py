"""Exception hierarchy shared by the library and the command line."""


class CalocalError(Exception):
    """Base class for all calocal errors."""


class ShapeError(CalocalError, ValueError):
    """Array dimensions do not agree."""


class NumericError(CalocalError, ArithmeticError):
    """A non-finite value showed up where a finite one is required."""


class FormatError(CalocalError):
    """An input file is malformed or truncated."""


class ConfigError(CalocalError):
    """Bad or unknown configuration value."""


class TrainingError(CalocalError):
    """Adversarial training diverged."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
