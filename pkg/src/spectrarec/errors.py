"""Exception hierarchy shared across the toolkit."""


class SpectraRecError(Exception):
    """Base class for all toolkit errors."""


class FormatError(SpectraRecError):
    """A binary file does not start with the expected magic or version."""


class TruncationError(SpectraRecError):
    """A binary file ends before its header says it should."""


class AxisError(SpectraRecError):
    """Wavelength axis or spectral response is unusable."""


class ValidationError(SpectraRecError, ValueError):
    """Data violates a type invariant (non-finite values, bad ranges)."""


class IoError(SpectraRecError, OSError):
    """A file could not be written."""


class ShapeError(SpectraRecError, ValueError):
    pass


class DegenerateError(SpectraRecError):
    """A statistic is undefined for the given input (empty set, zero norms)."""


class SpecError(SpectraRecError):
    """A model specification is invalid or unsupported for the operation."""


class NumericsError(SpectraRecError, FloatingPointError):
    """Non-finite values appeared during optimisation."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class RangeError(SpectraRecError, ValueError):
    pass


class DatasetError(SpectraRecError):
    pass


class GenerationError(SpectraRecError):
    """Synthetic data could not satisfy its constraints."""


class ConfigError(SpectraRecError, ValueError):
    pass
