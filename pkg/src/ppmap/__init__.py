"""Submap alignment and Gaussian-splat pose refinement toolkit."""

from .errors import (
    BehindCamera,
    DegenerateGeometry,
    DegenerateStep,
    DimensionMismatch,
    EmptyCloud,
    EmptyCorrespondence,
    InvalidPartition,
    IoError,
    MissingForwardState,
    NoOverlap,
    PpmapError,
    SpecError,
)
from .geometry import (
    Se3Pose,
    Sim3Transform,
    UnitQuaternion,
    apply_sim3,
    compose_sim3,
    quat_point_jacobian,
    rotation_matrix,
    skew,
    transform_pose,
)
from .ppm import CorrespondenceSet, PpmConfig, refine, update_weights
from .procrustes import PairedPoints, solve_closed_form

__version__ = "0.1.0"

__all__ = [
    "BehindCamera",
    "CorrespondenceSet",
    "DegenerateGeometry",
    "DegenerateStep",
    "DimensionMismatch",
    "EmptyCloud",
    "EmptyCorrespondence",
    "InvalidPartition",
    "IoError",
    "MissingForwardState",
    "NoOverlap",
    "PairedPoints",
    "PpmConfig",
    "PpmapError",
    "Se3Pose",
    "Sim3Transform",
    "SpecError",
    "UnitQuaternion",
    "apply_sim3",
    "compose_sim3",
    "quat_point_jacobian",
    "refine",
    "rotation_matrix",
    "skew",
    "solve_closed_form",
    "transform_pose",
    "update_weights",
]
