"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: usage/config problems -> 1,
data/format problems -> 2, numerical failures -> 3.
"""


class AtlasMorphError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(AtlasMorphError):
    """Invalid configuration or command usage."""


class FormatError(AtlasMorphError):
    """A file does not conform to the expected format."""


class UnsupportedFeatureError(AtlasMorphError):
    """The file is well formed but uses a feature outside the supported subset."""


class DataError(AtlasMorphError):
    """File contents are structurally valid but carry unusable values (NaN, Inf)."""


class DegenerateInputError(AtlasMorphError):
    """An operation received input it cannot meaningfully process (empty mask, 1-voxel axis)."""


class IncompatibleGridsError(AtlasMorphError):
    """Two volumes that must share a voxel grid do not."""


class OutOfDomainError(AtlasMorphError):
    """A point fell outside a transform's (or volume's) defined domain in strict mode."""

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = indices if indices is not None else []


class UndefinedMetricError(AtlasMorphError):
    """A metric is undefined for the given input (e.g. Hausdorff of an empty mask)."""


class OptimizationFailureError(AtlasMorphError):
    """Registration diverged; carries the loss trace for inspection."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
