"""Swing-foot reference: a quadratic Bezier through lift-off, apex and landing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["SwingTrajectory", "make_swing", "sample", "foothold_reward", "DEFAULT_CLEARANCE"]

DEFAULT_CLEARANCE = 0.05

# Stage-wise reward weights of the full locomotion policy. Only the foothold
# term is implemented here; the rest need whole-body state.
REWARD_WEIGHTS = {
    "lin_velocity_track": (1.0, 1.35, 1.1),
    "base_height_wrt_feet": (0.4, 0.3, 0.4),
    "action_smoothness": (-2.5e-3, -2e-3, -2e-3),
    "joint_accel_l2": (-5e-7, -4e-7, -4e-7),
    "joint_torque_l2": (-4e-7, -3e-7, -3e-7),
    "torque_rate": (-1.5e-7, -2e-8, -2e-8),
    "joint_power": (-2.5e-7, -2e-7, -2e-7),
    "lin_accel_l2": (-2e-3, -1.5e-3, -1.5e-3),
    "proj_gravity_l2": (-0.15, -0.1, -0.1),
    "feet_stumble": (-1.5, -1.5, -2.0),
    "foothold": (0.6, 0.5, 0.4),
}


@dataclass(frozen=True, eq=False)
class SwingTrajectory:
    p_lift: np.ndarray
    p_apex: np.ndarray
    p_land: np.ndarray
    T: float
    clearance: float
    control: np.ndarray  # middle Bezier control point

    def __call__(self, t):
        return sample(self, t)


def make_swing(p_lift, plan_or_land, T: float, clearance: float = DEFAULT_CLEARANCE) -> SwingTrajectory:
    """Build the swing from lift-off to the landing point.

    ``plan_or_land`` is either a ``FootholdPlan`` (landing at
    ``(u_world, h_z)``) or an explicit 3D landing point. The apex keyframe
    sits above the planar midpoint at ``max(lift z, land z) + clearance``
    and the curve passes through it at half time.
    """
    if not T > 0:
        raise ValueError("swing duration must be positive")
    if clearance < 0:
        raise ValueError("clearance must be non-negative")
    if hasattr(plan_or_land, "u_world"):
        p_land = np.array([*plan_or_land.u_world, plan_or_land.h_z], dtype=np.float64)
    else:
        p_land = np.asarray(plan_or_land, dtype=np.float64).copy()
    p_lift = np.asarray(p_lift, dtype=np.float64).copy()
    apex = 0.5 * (p_lift + p_land)
    apex[2] = max(p_lift[2], p_land[2]) + clearance
    # B(1/2) = (P0 + 2 P1 + P2) / 4 = apex
    control = 2.0 * apex - 0.5 * (p_lift + p_land)
    return SwingTrajectory(p_lift, apex, p_land, float(T), float(clearance), control)


def sample(traj: SwingTrajectory, t: float) -> np.ndarray:
    """Desired foot position at time ``t`` in ``[0, T]``."""
    if not 0.0 <= t <= traj.T:
        raise ValueError(f"t={t} outside [0, {traj.T}]")
    s = t / traj.T
    r = 1.0 - s
    return r * r * traj.p_lift + 2.0 * s * r * traj.control + s * s * traj.p_land


def foothold_reward(p_f, p_fd) -> float:
    """exp(-10 * |p_f - p_fd|), in (0, 1]."""
    d = np.asarray(p_f, dtype=np.float64) - np.asarray(p_fd, dtype=np.float64)
    return math.exp(-10.0 * float(np.sqrt(np.dot(d, d))))
