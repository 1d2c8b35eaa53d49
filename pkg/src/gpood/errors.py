"""Exception hierarchy for the package.

Everything raised deliberately derives from :class:`GpoodError`, so callers
(notably the CLI) can distinguish expected failures from bugs.
"""


class GpoodError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(GpoodError):
    """Shapes or dimensions of inputs do not agree."""


class DataFormatError(GpoodError):
    """A dataset or model file is malformed or inconsistent."""


class KernelConditionError(GpoodError):
    """A kernel matrix could not be factorized even at maximum jitter."""


class FitError(GpoodError):
    """Model fitting failed (per-class details in the message)."""
