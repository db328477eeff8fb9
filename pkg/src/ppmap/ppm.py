"""Probabilistic Procrustes mapping: soft dustbin weights + Sim(3) descent.

Alternates two steps starting from the closed-form initialization:

* weight update: each pair l gets a match probability
  gamma_l = expit((tau^2 - r_l^2) / eps) against a virtual dustbin of cost
  tau^2; if the mean dustbin mass exceeds the capacity eta, tau^2 is raised by
  bisection until the constraint binds (this is the exact constrained
  minimizer of the entropic assignment energy);
* transform update: gradient steps on (t, log s, q) with Gauss-Newton diagonal
  step scaling and backtracking halving, so the weighted objective never
  increases within a round.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .errors import DegenerateGeometry
from .geometry import (
    Sim3Transform,
    UnitQuaternion,
    rotation_angle,
    rotation_matrix,
)
from .procrustes import PairedPoints, solve_closed_form

EPSILON_FLOOR = 1e-30
ANNEAL_EVERY = 5
ANNEAL_FACTOR = 0.5
ANNEAL_FLOOR_RATIO = 1e-3
CAPACITY_SLACK = 1e-9
MAX_BACKTRACKS = 30


@dataclass
class CorrespondenceSet:
    """Paired indices with per-pair match/dustbin probabilities."""

    source_idx: np.ndarray
    target_idx: np.ndarray
    residuals: np.ndarray        # squared distances under the last transform
    match_weight: np.ndarray     # gamma_l in [0, 1]
    dustbin_weight: np.ndarray   # 1 - gamma_l

    @staticmethod
    def initial(n: int) -> "CorrespondenceSet":
        idx = np.arange(n)
        return CorrespondenceSet(idx, idx.copy(), np.zeros(n),
                                 np.ones(n), np.zeros(n))

    def __len__(self) -> int:
        return self.source_idx.shape[0]


@dataclass(frozen=True)
class PpmConfig:
    """Knobs for the alternating refinement.

    epsilon None means scene-adaptive: the median initial squared residual.
    tol_translation None means 1e-6 x scene diameter. lr_theta multiplies the
    curvature-scaled step for each parameter block.
    """

    epsilon: float | None = None
    eta: float = 0.2
    delta: float = 0.2
    lr_theta: float = 1.0
    max_iters: int = 50
    tol_rotation: float = 1e-5
    tol_translation: float | None = None
    tol_scale: float = 1e-6
    reweight_closed_form: bool = False

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError("eta must be in [0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if not self.lr_theta > 0.0:
            raise ValueError("lr_theta must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class RefineTrace:
    """Per-round objective values, recorded for the descent checks."""

    objective_after_weights: list = field(default_factory=list)
    objective_after_theta: list = field(default_factory=list)
    epsilons: list = field(default_factory=list)


def squared_residuals(pp: PairedPoints, theta: Sim3Transform,
                      corr: CorrespondenceSet) -> np.ndarray:
    src = pp.source[corr.source_idx]
    tgt = pp.target[corr.target_idx]
    r = theta.scale * (src @ rotation_matrix(theta.rotation).T) \
        + theta.translation - tgt
    return np.einsum("ij,ij->i", r, r)


def weighted_objective(pp: PairedPoints, theta: Sim3Transform,
                       corr: CorrespondenceSet) -> float:
    """sum_l gamma_l ||s R p_l + t - q_l||^2 under the current weights."""
    return float(corr.match_weight @ squared_residuals(pp, theta, corr))


def default_dustbin_cost(epsilon: float, delta: float) -> float:
    """tau^2 with exp(-tau^2/eps) = delta/(1-delta)."""
    return -epsilon * np.log(delta / (1.0 - delta))


def update_weights(corr: CorrespondenceSet, theta: Sim3Transform,
                   cfg: PpmConfig, clouds: PairedPoints) -> CorrespondenceSet:
    """Recompute (gamma, dustbin) from residuals under theta.

    Total: never raises. Guarantees mean dustbin mass <= eta + 1e-6 by
    bisecting the dustbin cost when the unconstrained update overshoots.
    """
    if cfg.epsilon is None:
        raise ValueError("update_weights needs a concrete epsilon; "
                         "refine resolves the scene-adaptive default")
    eps = max(cfg.epsilon, EPSILON_FLOOR)
    r2 = squared_residuals(clouds, theta, corr)
    tau2 = default_dustbin_cost(eps, cfg.delta)

    dustbin = expit((r2 - tau2) / eps)
    mean_mass = float(dustbin.mean())
    if mean_mass > cfg.eta:
        tau2 = _bisect_dustbin_cost(r2, eps, cfg.eta, tau2)
        dustbin = expit((r2 - tau2) / eps)
    gamma = 1.0 - dustbin
    return CorrespondenceSet(corr.source_idx, corr.target_idx, r2,
                             gamma, dustbin)


def _bisect_dustbin_cost(r2: np.ndarray, eps: float, eta: float,
                         tau2_lo: float) -> float:
    """Smallest cost raise making mean dustbin mass bind at eta.

    Mass is monotone decreasing in tau^2; with eta > 0 a finite bracket always
    exists because mass -> 0 as tau^2 -> inf.
    """
    def mass(tau2):
        return float(expit((r2 - tau2) / eps).mean())

    hi = max(tau2_lo + eps, 2.0 * abs(tau2_lo), float(r2.max()) + eps)
    for _ in range(200):
        if mass(hi) <= eta:
            break
        hi = 2.0 * hi + eps
    lo = tau2_lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass(mid) > eta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, abs(hi)):
            break
    # hi side satisfies mass <= eta; the interval is tight enough that the
    # constraint binds to ~1e-12.
    return hi


def grad_translation(corr: CorrespondenceSet, theta: Sim3Transform,
                     clouds: PairedPoints) -> np.ndarray:
    """2 sum_l gamma_l (s R p_l + t - q_l)."""
    src = clouds.source[corr.source_idx]
    tgt = clouds.target[corr.target_idx]
    r = theta.scale * (src @ rotation_matrix(theta.rotation).T) \
        + theta.translation - tgt
    return 2.0 * (corr.match_weight @ r)


def grad_scale(corr: CorrespondenceSet, theta: Sim3Transform,
               clouds: PairedPoints) -> float:
    """2 sum_l gamma_l (s R p_l + t - q_l) . (R p_l)."""
    src = clouds.source[corr.source_idx]
    tgt = clouds.target[corr.target_idx]
    rp = src @ rotation_matrix(theta.rotation).T
    r = theta.scale * rp + theta.translation - tgt
    return float(2.0 * corr.match_weight @ np.einsum("ij,ij->i", r, rp))


def grad_rotation(corr: CorrespondenceSet, theta: Sim3Transform,
                  clouds: PairedPoints) -> np.ndarray:
    """2 s sum_l gamma_l K_l^T (s R p_l + t - q_l), K_l = d(R p_l)/dq.

    Assembled without materializing the per-point 3x4 Jacobians:
    K^T r has w-component 2w(p.r) + 2(v x p).r and vector part
    2[(v.p) r + (v.r) p - (p.r) v + w (p x r)].
    """
    src = clouds.source[corr.source_idx]
    tgt = clouds.target[corr.target_idx]
    s = theta.scale
    w, v = theta.rotation.w, theta.rotation.vec
    r = s * (src @ rotation_matrix(theta.rotation).T) + theta.translation - tgt

    g = corr.match_weight
    p_dot_r = np.einsum("ij,ij->i", src, r)
    v_dot_p = src @ v
    v_dot_r = r @ v
    grad = np.empty(4)
    grad[0] = 2.0 * (g @ (w * p_dot_r
                          + np.einsum("ij,ij->i", np.cross(v[None, :], src), r)))
    vec = (v_dot_p[:, None] * r + v_dot_r[:, None] * src
           - p_dot_r[:, None] * v[None, :] + w * np.cross(src, r))
    grad[1:] = 2.0 * (g @ vec)
    return 2.0 * s * grad


def _tangent_project(q: np.ndarray, grad: np.ndarray) -> np.ndarray:
    return grad - (q @ grad) * q


def _step_sizes(corr: CorrespondenceSet, theta: Sim3Transform,
                clouds: PairedPoints) -> tuple[float, float, float]:
    """Gauss-Newton diagonal scalings for the (t, log s, q) blocks."""
    src = clouds.source[corr.source_idx]
    gsum = float(corr.match_weight.sum())
    if gsum <= 0.0:
        return 0.0, 0.0, 0.0
    rp = src @ rotation_matrix(theta.rotation).T
    pn2 = float(corr.match_weight @ np.einsum("ij,ij->i", rp, rp))
    lr_t = 1.0 / (2.0 * gsum)
    # d(objective)/d(log s) = s * grad_s; curvature in log s is ~2 s^2 sum g|Rp|^2
    lr_logs = 1.0 / max(2.0 * theta.scale**2 * pn2, 1e-300)
    # per-point |K|^2 ~ 8 |p|^2 on the unit sphere
    lr_q = 1.0 / max(8.0 * theta.scale**2 * pn2, 1e-300)
    return lr_t, lr_logs, lr_q


def _theta_gradient_step(pp: PairedPoints, theta: Sim3Transform,
                         corr: CorrespondenceSet, lr_mult: float
                         ) -> Sim3Transform:
    """One backtracked descent step on all three parameter blocks."""
    obj0 = weighted_objective(pp, theta, corr)
    g_t = grad_translation(corr, theta, pp)
    g_s = grad_scale(corr, theta, pp)
    g_q = grad_rotation(corr, theta, pp)
    q0 = theta.rotation.as_array()
    g_q = _tangent_project(q0, g_q)
    lr_t, lr_logs, lr_q = _step_sizes(corr, theta, pp)

    step = lr_mult
    for _ in range(MAX_BACKTRACKS):
        t_new = theta.translation - step * lr_t * g_t
        # log-space scale update keeps s > 0 structurally
        s_new = theta.scale * np.exp(-step * lr_logs * theta.scale * g_s)
        q_new = q0 - step * lr_q * g_q
        nq = np.linalg.norm(q_new)
        if nq < 1e-8:
            step *= 0.5
            continue
        cand = Sim3Transform(float(s_new), UnitQuaternion.from_array(q_new),
                             t_new)
        if weighted_objective(pp, cand, corr) <= obj0 + 1e-15 * (1.0 + obj0):
            return cand
        step *= 0.5
    return theta


def _theta_reweighted_closed_form(pp: PairedPoints, theta: Sim3Transform,
                                  corr: CorrespondenceSet) -> Sim3Transform:
    gamma = corr.match_weight
    if float(gamma.sum()) <= 0.0:
        return theta
    try:
        return solve_closed_form(PairedPoints(pp.source[corr.source_idx],
                                              pp.target[corr.target_idx],
                                              gamma))
    except (ValueError, DegenerateGeometry):
        return theta


def refine(pp: PairedPoints, theta0: Sim3Transform, cfg: PpmConfig
           ) -> tuple[Sim3Transform, CorrespondenceSet, int]:
    """Alternate weight and transform updates from the closed-form start.

    Stops when the per-iteration change falls below all three tolerances or at
    cfg.max_iters. Returns the final transform, the final correspondence
    weights, and the number of completed rounds.
    """
    theta, corr, iters, _ = refine_traced(pp, theta0, cfg)
    return theta, corr, iters


def refine_traced(pp: PairedPoints, theta0: Sim3Transform, cfg: PpmConfig
                  ) -> tuple[Sim3Transform, CorrespondenceSet, int, RefineTrace]:
    n = len(pp)
    corr = CorrespondenceSet.initial(n)
    theta = theta0
    trace = RefineTrace()

    diameter = _cloud_diameter(pp.source)
    tol_t = cfg.tol_translation if cfg.tol_translation is not None \
        else 1e-6 * max(diameter, 1e-12)

    if cfg.epsilon is None:
        r2 = squared_residuals(pp, theta, corr)
        eps0 = max(float(np.median(r2)), EPSILON_FLOOR)
    else:
        eps0 = cfg.epsilon
    eps_floor = max(ANNEAL_FLOOR_RATIO * eps0, EPSILON_FLOOR)

    eps = eps0
    rounds = 0
    for k in range(cfg.max_iters):
        if k > 0 and k % ANNEAL_EVERY == 0:
            eps = max(eps * ANNEAL_FACTOR, eps_floor)
        cfg_k = replace(cfg, epsilon=eps)
        corr = update_weights(corr, theta, cfg_k, pp)
        trace.objective_after_weights.append(weighted_objective(pp, theta, corr))
        trace.epsilons.append(eps)

        if cfg.reweight_closed_form:
            theta_new = _theta_reweighted_closed_form(pp, theta, corr)
        else:
            theta_new = _theta_gradient_step(pp, theta, corr, cfg.lr_theta)
        trace.objective_after_theta.append(weighted_objective(pp, theta_new, corr))
        rounds = k + 1

        d_rot = rotation_angle(theta.rotation, theta_new.rotation)
        d_t = float(np.linalg.norm(theta_new.translation - theta.translation))
        d_s = abs(theta_new.scale - theta.scale) / theta.scale
        theta = theta_new
        if d_rot < cfg.tol_rotation and d_t < tol_t and d_s < cfg.tol_scale:
            break

    return theta, corr, rounds, trace


def _cloud_diameter(points: np.ndarray) -> float:
    if points.shape[0] == 0:
        return 0.0
    return float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
