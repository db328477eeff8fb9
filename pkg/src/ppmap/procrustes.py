"""Weighted Kabsch-Umeyama closed form for the Sim(3) Procrustes problem.

Solves argmin over (s, R, t) of sum_l w_l ||s R p_l + t - q_l||^2 via the
SVD of the weighted cross-covariance, with the determinant correction that
forbids reflections and the matching sign fix on the scale trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry
from .geometry import Sim3Transform, UnitQuaternion

RANK_RATIO = 1e-9
VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class PairedPoints:
    """N >= 3 paired positions with nonnegative per-pair weights.

    `source` is the cloud that gets transformed onto `target`. Weights default
    to uniform 1/N.
    """

    source: np.ndarray
    target: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        src = np.asarray(self.source, dtype=float).reshape(-1, 3)
        tgt = np.asarray(self.target, dtype=float).reshape(-1, 3)
        if src.shape != tgt.shape:
            raise ValueError(f"source {src.shape} and target {tgt.shape} differ")
        if src.shape[0] < 3:
            raise ValueError(f"need at least 3 pairs, got {src.shape[0]}")
        if self.weights is None:
            w = np.full(src.shape[0], 1.0 / src.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
            if w.shape[0] != src.shape[0]:
                raise ValueError("weights length does not match pair count")
            if np.any(w < 0.0):
                raise ValueError("weights must be nonnegative")
            if not w.sum() > 0.0:
                raise ValueError("weights must not all be zero")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", tgt)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.source.shape[0]


def weighted_centroids(pp: PairedPoints) -> tuple[np.ndarray, np.ndarray]:
    """Weight-normalized means of source and target."""
    wsum = pp.weights.sum()
    return pp.weights @ pp.source / wsum, pp.weights @ pp.target / wsum


def cross_covariance(pp: PairedPoints) -> np.ndarray:
    """Sigma = sum_l w_l (p_l - pbar)(q_l - qbar)^T / sum_l w_l."""
    pbar, qbar = weighted_centroids(pp)
    dp = pp.source - pbar
    dq = pp.target - qbar
    return (dp * pp.weights[:, None]).T @ dq / pp.weights.sum()


def source_variance(pp: PairedPoints) -> float:
    """Weighted scalar variance of the centered source cloud."""
    pbar, _ = weighted_centroids(pp)
    dp = pp.source - pbar
    return float(pp.weights @ np.einsum("ij,ij->i", dp, dp) / pp.weights.sum())


def alignment_objective(pp: PairedPoints, theta: Sim3Transform) -> float:
    """Weighted sum of squared residuals under theta."""
    from .geometry import apply_sim3

    r = apply_sim3(theta, pp.source) - pp.target
    return float(pp.weights @ np.einsum("ij,ij->i", r, r))


def solve_closed_form(pp: PairedPoints, with_scale: bool = True) -> Sim3Transform:
    """Closed-form weighted similarity (or rigid, with_scale=False) alignment.

    Raises DegenerateGeometry when the source cloud is (near-)collinear or
    coincident, where rotation or scale are not identifiable.
    """
    pbar, qbar = weighted_centroids(pp)
    sigma = cross_covariance(pp)
    var_p = source_variance(pp)
    if var_p < VAR_FLOOR:
        raise DegenerateGeometry("source points are coincident; no unique scale")

    u, lam, vt = np.linalg.svd(sigma)
    if lam[0] <= 0.0 or lam[1] / lam[0] <= RANK_RATIO:
        raise DegenerateGeometry(
            "cross-covariance rank < 2; rotation is not identifiable"
        )

    d = float(np.sign(np.linalg.det(u) * np.linalg.det(vt)))
    if d == 0.0:
        d = 1.0
    s_corr = np.diag([1.0, 1.0, d])
    # Source-first covariance: the rotation taking source onto target is
    # V S U^T (U S V^T would recover the inverse map).
    r0 = vt.T @ s_corr @ u.T

    if with_scale:
        lam_corr = lam.copy()
        lam_corr[-1] *= d
        s0 = float(lam_corr.sum() / var_p)
        if not s0 > 0.0:
            raise DegenerateGeometry("nonpositive scale from trace ratio")
    else:
        s0 = 1.0

    q0 = UnitQuaternion.from_rotation_matrix(r0)
    t0 = qbar - s0 * (r0 @ pbar)
    return Sim3Transform(s0, q0, t0)
