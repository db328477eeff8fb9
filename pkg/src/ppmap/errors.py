"""Exception types shared across the package."""


class PpmapError(Exception):
    """Base class for all package-specific errors."""


class DegenerateGeometry(PpmapError):
    """Point configuration does not determine a unique transform."""


class InvalidPartition(PpmapError):
    """Frame-grouping parameters are inconsistent."""


class NoOverlap(PpmapError):
    """Two submaps share no frames."""


class EmptyCorrespondence(PpmapError):
    """Shared frames produced zero pixel-level matches."""


class BehindCamera(PpmapError):
    """Point lies behind the near plane and cannot be projected."""


class MissingForwardState(PpmapError):
    """Backward pass requested without retained forward contributor lists."""


class DimensionMismatch(PpmapError):
    """Image or array shapes disagree."""


class EmptyCloud(PpmapError):
    """Operation requires a nonempty point cloud."""


class DegenerateStep(PpmapError):
    """Quaternion update collapsed towards zero; caller should halve the lr."""


class SpecError(PpmapError):
    """Synthetic-scene specification is out of range."""


class IoError(PpmapError):
    """File import/export failed."""
