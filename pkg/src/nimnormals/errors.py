"""Exception hierarchy shared by the toolkit."""


class NimError(Exception):
    """Base class for every error raised by nimnormals."""


class InvalidInputError(NimError, ValueError):
    """An argument violates a precondition (non-finite depth, bad intrinsics, ...)."""


class BehindCameraError(InvalidInputError):
    """A 3D point with z <= 0 cannot be projected."""


class DimensionError(NimError, ValueError):
    """Raster shapes are too small or do not match."""


class DegenerateInputError(NimError, ValueError):
    """Aggregation was asked to work on an empty candidate set."""


class DegenerateAggregateError(NimError, ValueError):
    """Candidate sum is too close to zero to define a direction."""


class EmptySceneError(NimError, ValueError):
    """A synthetic scene renders no valid pixel."""


class FormatError(NimError, ValueError):
    """A file or config document could not be parsed."""
