"""Real-time inverse kinematics for the camera pose.

Damped-least-squares bursts on the pose error (jitted core) alternate with
nullspace repair steps on joint-space continuity and obstacle clearance. A
solution must satisfy the pose tolerance, joint limits, the per-tick
joint-speed cap, self-collision freedom and the grid clearance margin;
otherwise the call fails and the caller holds the previous configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kinematics as kin
from ._fastkin import burst_args, dls_burst
from .transforms import Pose6
from .world import OccupancyGrid

# Fixed seed for restart perturbations: identical inputs, identical outputs.
_PERTURB_SEED = 0x5EED


@dataclass(frozen=True)
class IkParams:
    pos_tolerance: float = 1e-3        # m
    rot_tolerance: float = 1e-2        # rad
    max_iterations: int = 400          # total DLS iteration budget per call
    burst_iterations: int = 60         # iterations per descent burst
    repair_steps: int = 5              # nullspace steps per converged pose
    continuity_weight: float = 0.1
    collision_weight: float = 1.0
    clearance_margin: float = 0.03     # m over the grid's conservative distance
    speed_cap: float = 0.15            # rad per tick, inf disables
    damping: float = 1e-3
    error_clamp_pos: float = 0.2       # m
    error_clamp_rot: float = 0.5       # rad

    def __post_init__(self):
        if not (self.pos_tolerance > 0.0 and self.rot_tolerance > 0.0):
            raise ValueError("tolerances must be positive")
        if self.continuity_weight < 0.0 or self.collision_weight < 0.0:
            raise ValueError("weights must be >= 0")


def _clearance(chain, q, centers, inflation, link_frames=None):
    if centers is None or len(centers) == 0:
        return float("inf")
    return kin.min_capsule_point_clearance(chain, q, centers, inflation,
                                           link_frames=link_frames)


def _clearance_cost(chain, q, centers, inflation, limit):
    d = _clearance(chain, q, centers, inflation)
    short = limit - d
    return short * short if short > 0.0 else 0.0


def _repulsion(chain, q, centers, inflation, limit, h: float = 1e-4):
    """Forward-difference gradient of the clearance shortfall cost, negated."""
    base = _clearance_cost(chain, q, centers, inflation, limit)
    grad = np.zeros(kin.NUM_JOINTS)
    for i in range(kin.NUM_JOINTS):
        qp = q.copy()
        qp[i] += h
        grad[i] = (_clearance_cost(chain, qp, centers, inflation, limit) - base) / h
    return -grad


def _constraints_ok(chain, q, centers, inflation, margin, frames) -> bool:
    if kin.self_collision(chain, q, link_frames=frames):
        return False
    return _clearance(chain, q, centers, inflation, frames) >= margin


def ik_solve(chain: kin.KinematicChain, target: Pose6, q_prev: np.ndarray,
             grid: OccupancyGrid | None, params: IkParams) -> np.ndarray | None:
    """Solve for a joint configuration reaching `target` from `q_prev`.

    Returns the configuration on success, None on failure (the caller holds
    q_prev). Deterministic for identical inputs.
    """
    target_p = np.ascontiguousarray(target.p)
    if np.linalg.norm(target_p - chain.base_position()) > chain.max_reach():
        return None
    target_rot = np.ascontiguousarray(target.rotation())
    centers = None
    inflation = 0.0
    if grid is not None:
        occ = grid.occupied_centers()
        if len(occ):
            centers = occ
            inflation = grid.half_diagonal

    lo = chain.joint_limits[:, 0].copy()
    hi = chain.joint_limits[:, 1].copy()
    if np.isfinite(params.speed_cap):
        lo = np.maximum(lo, q_prev - params.speed_cap)
        hi = np.minimum(hi, q_prev + params.speed_cap)
    q_prev = np.clip(np.asarray(q_prev, dtype=float), lo, hi)

    rng = np.random.default_rng(_PERTURB_SEED)
    static = burst_args(chain)
    margin = params.clearance_margin
    repair_limit = 2.0 * margin
    budget = params.max_iterations
    q_start = q_prev.copy()
    while budget > 0:
        q, converged, used = dls_burst(
            *static, lo, hi, q_start, target_rot, target_p,
            min(budget, params.burst_iterations), params.pos_tolerance,
            params.rot_tolerance, params.damping, params.error_clamp_pos,
            params.error_clamp_rot, True)
        budget -= max(used, 1)
        if converged:
            frames = kin._frame_chain(chain, q)[2]
            if _constraints_ok(chain, q, centers, inflation, margin, frames):
                return q
            # Nullspace repair: hold the pose, walk the redundancy toward
            # continuity and clearance.
            for _ in range(params.repair_steps):
                if budget <= 0:
                    break
                origins, axes_w, frames, camera = kin._frame_chain(chain, q)
                jac = kin._jacobian_from(origins, axes_w, camera[:3, 3])
                jjt = jac @ jac.T
                jjt[np.diag_indices_from(jjt)] += params.damping
                jsharp = jac.T @ np.linalg.inv(jjt)
                z = -params.continuity_weight * (q - q_prev)
                if centers is not None and params.collision_weight > 0.0:
                    z = z + params.collision_weight * _repulsion(
                        chain, q, centers, inflation, repair_limit)
                z = (np.eye(kin.NUM_JOINTS) - jsharp @ jac) @ z
                if np.max(np.abs(z)) < 1e-12:
                    break
                q_repair = np.clip(q + z, lo, hi)
                q, converged, used = dls_burst(
                    *static, lo, hi, q_repair, target_rot, target_p,
                    min(budget, 25), params.pos_tolerance, params.rot_tolerance,
                    params.damping, params.error_clamp_pos,
                    params.error_clamp_rot, True)
                budget -= max(used, 1)
                if not converged:
                    break
                frames = kin._frame_chain(chain, q)[2]
                if _constraints_ok(chain, q, centers, inflation, margin, frames):
                    return q
        # Restart from a perturbed seed inside the feasible box.
        span = np.minimum(hi - q_prev, q_prev - lo)
        q_start = np.clip(q_prev + rng.uniform(-1.0, 1.0, kin.NUM_JOINTS) * span,
                          lo, hi)
    return None


def position_reachable(chain: kin.KinematicChain, p: np.ndarray, seed,
                       restarts: int = 4, iterations: int = 30,
                       tol: float = 2e-3) -> bool:
    """Cheap position-only feasibility probe (orientation free).

    Used by the reachability builder to skip whole cells: if no joint
    configuration places the camera at p, no orientation sample can succeed.
    """
    p = np.ascontiguousarray(np.asarray(p, dtype=float))
    if np.linalg.norm(p - chain.base_position()) > chain.max_reach():
        return False
    rng = np.random.default_rng(seed)
    static = burst_args(chain)
    lo = chain.joint_limits[:, 0].copy()
    hi = chain.joint_limits[:, 1].copy()
    eye = np.eye(3)
    for _ in range(restarts):
        q0 = chain.random_config(rng)
        _, ok, _ = dls_burst(*static, lo, hi, q0, eye, p, iterations, tol,
                             1e9, 1e-3, 0.3, 0.5, False)
        if ok:
            return True
    return False


def ik_reachable(chain: kin.KinematicChain, target: Pose6, seed,
                 restarts: int, params: IkParams | None = None) -> bool:
    """True iff any of `restarts` randomly seeded attempts reaches `target`.

    Attempts use an empty grid and no continuity constraint; used by the
    reachability-map builder. Deterministic given the seed.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if params is None:
        params = IkParams(max_iterations=80)
    params = replace(params, speed_cap=float("inf"), continuity_weight=0.0)
    if np.linalg.norm(target.p - chain.base_position()) > chain.max_reach():
        return False
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        q0 = chain.random_config(rng)
        if ik_solve(chain, target, q0, None, params) is not None:
            return True
    return False
