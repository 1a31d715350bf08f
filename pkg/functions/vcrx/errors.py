"""
Exception hierarchy for vcrx.

Pure helpers raise ValueError / ZeroDivisionError directly; these classes mark
failures that the CLI reports at its command boundary.
"""


class VcrxError(Exception):
    """Base class for all vcrx failures."""


class ConfigError(VcrxError, ValueError):
    """Invalid or unknown configuration key."""

    def __init__(self, message: str, key: str = ""):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class FileFormatError(VcrxError, ValueError):
    """Dataset or model file with a bad magic, version or shape."""


class NonFiniteError(VcrxError, FloatingPointError):
    """A tensor operation produced NaN or Inf."""


class GraphStateError(VcrxError, RuntimeError):
    """Backward requested without a recorded forward graph."""


class TrainingAborted(VcrxError, RuntimeError):
    """Training stopped on a non-finite loss."""

    def __init__(self, step: int, detail: str):
        self.step = step
        super().__init__(f"training aborted at step {step}: {detail}")


class MissingModelError(VcrxError, ValueError):
    """A requested metric needs a model that was not supplied."""
