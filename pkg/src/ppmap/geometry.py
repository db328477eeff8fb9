"""Quaternion / SE(3) / Sim(3) algebra and the quaternion-point Jacobian.

Conventions used everywhere in this package:

* quaternions are Hamilton, stored (w, x, y, z), kept unit-norm with w >= 0;
* rotation acts as the sandwich q * p * q~ (active rotation);
* camera poses are camera-from-world: X_cam = R(q) @ X_world + t;
* a similarity maps points as s * R(q) @ p + t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-9


def _as_vec3(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 3:
        raise ValueError(f"expected trailing dimension 3, got shape {p.shape}")
    return p


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion (w, x, y, z) with w canonicalized to be >= 0."""

    w: float
    x: float
    y: float
    z: float

    @staticmethod
    def from_array(q) -> "UnitQuaternion":
        """Normalize a length-4 array (w, x, y, z) into a UnitQuaternion."""
        q = np.asarray(q, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if n < 1e-12:
            raise ValueError("cannot normalize a near-zero quaternion")
        q = q / n
        if q[0] < 0.0:
            q = -q
        return UnitQuaternion(float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "UnitQuaternion":
        axis = _as_vec3(axis)
        n = np.linalg.norm(axis)
        if n < 1e-15:
            return UnitQuaternion.identity()
        half = 0.5 * float(angle)
        return UnitQuaternion.from_array(
            np.concatenate(([np.cos(half)], np.sin(half) * axis / n))
        )

    @staticmethod
    def from_rotation_matrix(m) -> "UnitQuaternion":
        """Shepperd's method; picks the numerically dominant branch."""
        m = np.asarray(m, dtype=float)
        t = m[0, 0] + m[1, 1] + m[2, 2]
        if t > 0:
            s = 0.5 / np.sqrt(t + 1.0)
            q = (0.25 / s, (m[2, 1] - m[1, 2]) * s, (m[0, 2] - m[2, 0]) * s,
                 (m[1, 0] - m[0, 1]) * s)
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
            q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s,
                 (m[0, 2] + m[2, 0]) / s)
        elif m[1, 1] > m[2, 2]:
            s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
            q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s,
                 (m[1, 2] + m[2, 1]) / s)
        else:
            s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
            q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s,
                 (m[1, 2] + m[2, 1]) / s, 0.25 * s)
        return UnitQuaternion.from_array(q)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion.from_array([self.w, -self.x, -self.y, -self.z])

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        w1, v1 = self.w, self.vec
        w2, v2 = other.w, other.vec
        w = w1 * w2 - v1 @ v2
        v = w1 * v2 + w2 * v1 + np.cross(v1, v2)
        return UnitQuaternion.from_array(np.concatenate(([w], v)))


def quat_multiply_raw(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of raw (w, x, y, z) arrays, no normalization."""
    w1, v1 = a[0], a[1:]
    w2, v2 = b[0], b[1:]
    return np.concatenate(([w1 * w2 - v1 @ v2],
                           w1 * v2 + w2 * v1 + np.cross(v1, v2)))


def rotation_matrix(q: UnitQuaternion) -> np.ndarray:
    """3x3 matrix M with M @ p = (w^2 - |v|^2) p + 2 v (v.p) + 2 w (v x p)."""
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array([
        [w*w + x*x - y*y - z*z, 2*(x*y - w*z), 2*(x*z + w*y)],
        [2*(x*y + w*z), w*w - x*x + y*y - z*z, 2*(y*z - w*x)],
        [2*(x*z - w*y), 2*(y*z + w*x), w*w - x*x - y*y + z*z],
    ])


def rotation_matrix_raw(q: np.ndarray) -> np.ndarray:
    """Same homogeneous form evaluated on a raw, possibly non-unit, array.

    This is the extension whose raw 4-derivative quat_point_jacobian returns;
    finite differences of this function validate the Jacobian without any
    renormalization step.
    """
    w, x, y, z = q
    return np.array([
        [w*w + x*x - y*y - z*z, 2*(x*y - w*z), 2*(x*z + w*y)],
        [2*(x*y + w*z), w*w - x*x + y*y - z*z, 2*(y*z - w*x)],
        [2*(x*z - w*y), 2*(y*z + w*x), w*w - x*x - y*y + z*z],
    ])


def skew(p) -> np.ndarray:
    """Antisymmetric matrix with skew(p) @ u = p x u."""
    p = _as_vec3(p)
    return np.array([
        [0.0, -p[2], p[1]],
        [p[2], 0.0, -p[0]],
        [-p[1], p[0], 0.0],
    ])


def quat_point_jacobian(q: UnitQuaternion, p) -> np.ndarray:
    """d(R(q) p)/dq as a 3x4 matrix, columns ordered (w, x, y, z).

    Column w: 2 w p + 2 (v x p).
    Columns v: 2 [ (v.p) I + v p^T - p v^T - w [p]x ].
    """
    p = _as_vec3(p)
    w, v = q.w, q.vec
    jac = np.empty((3, 4))
    jac[:, 0] = 2.0 * w * p + 2.0 * np.cross(v, p)
    jac[:, 1:] = 2.0 * ((v @ p) * np.eye(3) + np.outer(v, p)
                        - np.outer(p, v) - w * skew(p))
    return jac


def quat_point_jacobian_batch(q: UnitQuaternion, pts: np.ndarray) -> np.ndarray:
    """quat_point_jacobian stacked over an (N, 3) array -> (N, 3, 4)."""
    pts = _as_vec3(pts).reshape(-1, 3)
    w, v = q.w, q.vec
    n = pts.shape[0]
    jac = np.empty((n, 3, 4))
    jac[:, :, 0] = 2.0 * w * pts + 2.0 * np.cross(v[None, :], pts)
    vp = pts @ v
    eye = np.eye(3)
    jac[:, :, 1:] = 2.0 * (vp[:, None, None] * eye
                           + v[None, :, None] * pts[:, None, :]
                           - pts[:, :, None] * v[None, None, :]
                           - w * _skew_batch(pts))
    return jac


def _skew_batch(pts: np.ndarray) -> np.ndarray:
    n = pts.shape[0]
    out = np.zeros((n, 3, 3))
    out[:, 0, 1] = -pts[:, 2]
    out[:, 0, 2] = pts[:, 1]
    out[:, 1, 0] = pts[:, 2]
    out[:, 1, 2] = -pts[:, 0]
    out[:, 2, 0] = -pts[:, 1]
    out[:, 2, 1] = pts[:, 0]
    return out


def rotation_matrix_quat_jacobian(q: UnitQuaternion) -> np.ndarray:
    """dR/dq of the homogeneous form, shape (4, 3, 3) indexed by (w, x, y, z)."""
    w, v = q.w, q.vec
    eye = np.eye(3)
    out = np.empty((4, 3, 3))
    out[0] = 2.0 * (w * eye + skew(v))
    for k in range(3):
        e = eye[k]
        out[k + 1] = 2.0 * (-v[k] * eye + np.outer(e, v) + np.outer(v, e)
                            + w * skew(e))
    return out


def rotation_angle(a: UnitQuaternion, b: UnitQuaternion) -> float:
    """Relative rotation angle between two unit quaternions, radians."""
    dot = abs(float(a.as_array() @ b.as_array()))
    return 2.0 * np.arccos(min(1.0, dot))


@dataclass(frozen=True)
class Se3Pose:
    """Camera-from-world rigid pose: X_cam = R(rotation) @ X_world + translation."""

    rotation: UnitQuaternion
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "translation",
                           _as_vec3(self.translation).reshape(3).copy())

    @staticmethod
    def identity() -> "Se3Pose":
        return Se3Pose(UnitQuaternion.identity(), np.zeros(3))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = rotation_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m

    def apply(self, p) -> np.ndarray:
        p = _as_vec3(p)
        return p @ rotation_matrix(self.rotation).T + self.translation

    def inverse(self) -> "Se3Pose":
        rinv = self.rotation.conjugate()
        return Se3Pose(rinv, -(rotation_matrix(rinv) @ self.translation))

    def compose(self, other: "Se3Pose") -> "Se3Pose":
        """Pose mapping through `other` first, then self."""
        r = rotation_matrix(self.rotation)
        return Se3Pose(self.rotation * other.rotation,
                       r @ other.translation + self.translation)

    def center(self) -> np.ndarray:
        """Camera center in world coordinates, -R^T t."""
        return -(rotation_matrix(self.rotation).T @ self.translation)


@dataclass(frozen=True)
class Sim3Transform:
    """Similarity p -> scale * R(rotation) @ p + translation, scale > 0."""

    scale: float
    rotation: UnitQuaternion
    translation: np.ndarray

    def __post_init__(self):
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "translation",
                           _as_vec3(self.translation).reshape(3).copy())

    @staticmethod
    def identity() -> "Sim3Transform":
        return Sim3Transform(1.0, UnitQuaternion.identity(), np.zeros(3))

    def inverse(self) -> "Sim3Transform":
        rinv = self.rotation.conjugate()
        s = 1.0 / self.scale
        return Sim3Transform(s, rinv, -s * (rotation_matrix(rinv) @ self.translation))


def apply_sim3(theta: Sim3Transform, p) -> np.ndarray:
    """Map a 3-vector or (..., 3) array through the similarity."""
    p = _as_vec3(p)
    return theta.scale * (p @ rotation_matrix(theta.rotation).T) + theta.translation


def compose_sim3(a: Sim3Transform, b: Sim3Transform) -> Sim3Transform:
    """Similarity equal to applying b first, then a."""
    r_a = rotation_matrix(a.rotation)
    return Sim3Transform(a.scale * b.scale, a.rotation * b.rotation,
                         a.scale * (r_a @ b.translation) + a.translation)


def transform_pose(theta: Sim3Transform, pose: Se3Pose) -> Se3Pose:
    """Re-express a camera-from-world pose after the world moved by theta.

    The camera center moves as apply_sim3(theta, center) and the
    world-from-camera orientation is left-multiplied by R(theta); projection of
    (theta-mapped point, returned pose) matches projection of the originals
    because pinhole projection ignores the uniform scale of camera coordinates.
    """
    q_new = pose.rotation * theta.rotation.conjugate()
    r_new = rotation_matrix(q_new)
    t_new = theta.scale * pose.translation - r_new @ theta.translation
    return Se3Pose(q_new, t_new)
