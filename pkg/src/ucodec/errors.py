"""Exception hierarchy shared across the engine.

Every failure mode a caller is expected to handle gets its own class so the
CLI can map them to distinct exit messages and tests can assert on them.
"""


class UcodecError(Exception):
    """Base class for all engine errors."""


class ConfigError(UcodecError):
    """A configuration document or derived setting is invalid."""


class ShapeError(ConfigError):
    """Operands or configuration dimensions do not line up."""


class InputTooShortError(UcodecError):
    """A convolution or framing op would produce an empty output."""


class NumericError(UcodecError):
    """Degenerate numeric state, e.g. a zero-norm weight-norm channel."""


class AlignmentError(UcodecError):
    """Waveform length is not a multiple of the codec hop."""


class FormatError(UcodecError):
    """A file or in-memory object violates its declared format."""


class CorruptStreamError(FormatError):
    """A token bitstream failed validation on read."""


class CompatibilityError(UcodecError):
    """Two artifacts (config, checkpoint, stream) disagree on model shape."""


class DatasetError(UcodecError):
    """Training corpus is missing or unusable."""


class TrainingDivergenceError(UcodecError):
    """A loss went non-finite during training."""


class MetricError(UcodecError):
    """A metric is undefined for the given inputs (e.g. silent reference)."""
