"""Variable-height inverted pendulum and divergent component of motion.

The CoM height over a swing of duration ``T`` is ``z(t) = k t + z0`` and
the pendulum frequency is ``omega(t) = sqrt(g / z(t))``. With the
``a ~= 1`` simplification the DCM ``xi = x + xdot / omega`` grows as
``xi(t) = xi(0) exp(sigma(t))`` where ``sigma`` integrates ``omega``.

All positions here are relative to the current support foot. The
array-level helpers (``natural_frequency``, ``integrated_frequency``,
``offset_components``) broadcast so the batched planner shares them with
the scalar path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "VhipParams",
    "GaitConfig",
    "CommandVelocity",
    "DcmState",
    "DynamicsError",
    "omega",
    "a_coefficient",
    "sigma",
    "dcm_propagate",
    "nominal_step",
    "nominal_offset",
    "periodic_offset",
    "vhip_integrate",
    "natural_frequency",
    "integrated_frequency",
    "step_duration",
]

GRAVITY = 9.81
# Below this |k| the closed form is replaced by its small-slope series.
K_EPS = 1e-8


class DynamicsError(ValueError):
    """Pendulum parameters that leave the model (non-positive height, bad time)."""


@dataclass(frozen=True)
class VhipParams:
    z0: float = 1.0
    k: float = 0.0
    T: float = 0.4
    g: float = GRAVITY

    def __post_init__(self):
        if not self.g > 0:
            raise DynamicsError(f"g must be positive, got {self.g}")
        if not self.z0 > 0:
            raise DynamicsError(f"z0 must be positive, got {self.z0}")
        if not self.T > 0:
            raise DynamicsError(f"T must be positive, got {self.T}")
        if not self.k * self.T + self.z0 > 0:
            raise DynamicsError("CoM height k*T + z0 must stay positive over the step")

    def height(self, t):
        return self.k * t + self.z0

    def with_slope(self, k: float) -> "VhipParams":
        return replace(self, k=float(k))


@dataclass(frozen=True)
class GaitConfig:
    """Stepping pattern.

    ``leg_index`` 0 means the swing foot lands on the left (positive
    lateral side) this step, 1 on the right. ``l_p`` defaults to ``l``.
    """

    l: float = 0.2
    l_p: float | None = None
    f: float = 1.25
    leg_index: int = 0
    f_bounds: tuple[float, float] = (1.0, 1.5)

    def __post_init__(self):
        if self.l_p is None:
            object.__setattr__(self, "l_p", self.l)
        if not self.l > 0:
            raise DynamicsError("lateral foot distance l must be positive")
        if self.l_p < 0:
            raise DynamicsError("l_p must be non-negative")
        lo, hi = self.f_bounds
        if not lo <= self.f <= hi:
            raise DynamicsError(f"gait frequency {self.f} Hz outside [{lo}, {hi}]")
        if self.leg_index not in (0, 1):
            raise DynamicsError("leg_index must be 0 or 1")

    @property
    def sign(self) -> float:
        return -1.0 if self.leg_index else 1.0

    def flipped(self) -> "GaitConfig":
        return replace(self, leg_index=1 - self.leg_index)


def step_duration(f: float) -> float:
    """One swing per half gait cycle."""
    return 1.0 / (2.0 * f)


@dataclass(frozen=True)
class CommandVelocity:
    vx: float = 0.0
    vy: float = 0.0
    wyaw: float = 0.0
    vy_max: float = 0.3
    wyaw_max: float = 1.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.vx, self.vy, self.wyaw)):
            raise DynamicsError("command must be finite")
        if abs(self.vy) > self.vy_max + 1e-12:
            raise DynamicsError(f"|vy| = {abs(self.vy)} exceeds {self.vy_max}")
        if abs(self.wyaw) > self.wyaw_max + 1e-12:
            raise DynamicsError(f"|wyaw| = {abs(self.wyaw)} exceeds {self.wyaw_max}")


@dataclass(frozen=True)
class DcmState:
    xi: np.ndarray
    com_pos: np.ndarray
    com_vel: np.ndarray
    t: float = 0.0

    @classmethod
    def from_com(cls, com_pos, com_vel, params: VhipParams, t: float = 0.0) -> "DcmState":
        x = np.asarray(com_pos, dtype=np.float64)
        v = np.asarray(com_vel, dtype=np.float64)
        return cls(x + v / omega(params, t), x, v, float(t))


# -- array kernels -----------------------------------------------------------

def natural_frequency(g, z0, k, t):
    z = k * t + z0
    if np.any(z <= 0):
        raise DynamicsError("pendulum height is non-positive")
    return np.sqrt(g / z)


def integrated_frequency(g, z0, k, t):
    """Integral of omega from 0 to t.

    Written as ``2 sqrt(g) t / (sqrt(k t + z0) + sqrt(z0))``, the
    rationalized form of ``2 sqrt(g) (sqrt(k t + z0) - sqrt(z0)) / k``;
    it has no cancellation for small ``k`` and is exact at ``k = 0``.
    """
    z = k * t + z0
    if np.any(z <= 0) or np.any(np.asarray(z0) <= 0):
        raise DynamicsError("pendulum height is non-positive")
    small = np.abs(k) <= K_EPS
    # first-order series; its O(k^2) remainder is far below double precision here
    flat = np.sqrt(g / z0) * t * (1.0 - k * t / (4.0 * z0))
    sloped = 2.0 * np.sqrt(g) * t / (np.sqrt(z) + np.sqrt(z0))
    out = np.where(small, flat, sloped)
    return out if np.ndim(out) else float(out)


def offset_components(length, width, l_p, sign, growth):
    """Raw nominal DCM offset given ``growth = exp(sigma(T))``."""
    bx = length / (growth - 1.0)
    by = sign * l_p / (1.0 + growth) - width / (1.0 - growth)
    return bx, by


# -- scalar API ----------------------------------------------------------------

def omega(params: VhipParams, t: float) -> float:
    return float(natural_frequency(params.g, params.z0, params.k, t))


def a_coefficient(params: VhipParams, t: float) -> float:
    """The factor ``a = 1 + k / (2 sqrt(g z))`` dropped by the planner."""
    z = params.height(t)
    if z <= 0:
        raise DynamicsError("pendulum height is non-positive")
    return 1.0 + params.k / (2.0 * math.sqrt(params.g * z))


def sigma(params: VhipParams, t: float) -> float:
    if t < 0:
        raise DynamicsError("sigma is defined for t >= 0")
    return float(integrated_frequency(params.g, params.z0, params.k, t))


def dcm_propagate(xi_t, params: VhipParams, t: float, t_end: float | None = None):
    """Propagate a support-relative DCM from ``t`` to ``t_end`` (default ``T``)."""
    t_end = params.T if t_end is None else t_end
    if not 0 <= t <= t_end:
        raise DynamicsError(f"need 0 <= t <= t_end, got t={t}, t_end={t_end}")
    if t_end > params.T:
        raise DynamicsError(f"t_end={t_end} beyond step duration {params.T}")
    growth = np.exp(sigma(params, t_end) - sigma(params, t))
    return np.asarray(xi_t, dtype=np.float64) * growth


def nominal_step(cmd: CommandVelocity, gait: GaitConfig, params: VhipParams):
    """(L_nom, W_nom) of the swing landing this step."""
    return cmd.vx * params.T, cmd.vy * params.T + gait.sign * gait.l


def nominal_offset(L: float, W: float, gait: GaitConfig, params: VhipParams) -> np.ndarray:
    """b_nom = [L / (e^s - 1), (-1)^i l_p / (1 + e^s) - W / (1 - e^s)], s = sigma(T)."""
    s = sigma(params, params.T)
    if s <= 0:
        raise DynamicsError("degenerate step: sigma(T) must be positive")
    bx, by = offset_components(L, W, gait.l_p, gait.sign, np.exp(s))
    return np.array([bx, by])


def periodic_offset(cmd: CommandVelocity, gait: GaitConfig, params: VhipParams) -> np.ndarray:
    """Offset whose repetition is a periodic gait under ``nominal_step`` targets.

    ``nominal_offset`` is fed the velocity part of the lateral step
    (``vy * T``) and the parity of the stance leg, so the alternating
    ``+-l`` of ``W_nom`` is carried by the ``l_p`` term. With ``l_p == l``
    the plan ``u = (L_nom, W_nom)``, ``b = b_nom`` reproduces itself step
    after step.
    """
    return nominal_offset(cmd.vx * params.T, cmd.vy * params.T, gait.flipped(), params)


def _accel(x, g, z0, k, t):
    return (g / (k * t + z0)) * x


def rk4_step(x, v, t, dt, g, z0, k):
    """One RK4 step of ``xddot = omega(t)^2 x``; broadcasts over walkers."""
    h2 = 0.5 * dt
    a1 = _accel(x, g, z0, k, t)
    x2 = x + h2 * v
    v2 = v + h2 * a1
    a2 = _accel(x2, g, z0, k, t + h2)
    x3 = x + h2 * v2
    v3 = v + h2 * a2
    a3 = _accel(x3, g, z0, k, t + h2)
    x4 = x + dt * v3
    v4 = v + dt * a3
    a4 = _accel(x4, g, z0, k, t + dt)
    x_new = x + (dt / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return x_new, v_new


def vhip_integrate(state: DcmState, params: VhipParams, dt: float) -> DcmState:
    if not dt > 0:
        raise DynamicsError("dt must be positive")
    t_next = state.t + dt
    if t_next > params.T * (1 + 1e-12):
        raise DynamicsError(f"step overruns T: t + dt = {t_next} > {params.T}")
    if min(params.height(state.t), params.height(t_next)) <= 0:
        raise DynamicsError("pendulum height is non-positive")
    x, v = rk4_step(np.asarray(state.com_pos, dtype=np.float64),
                    np.asarray(state.com_vel, dtype=np.float64),
                    state.t, dt, params.g, params.z0, params.k)
    w = natural_frequency(params.g, params.z0, params.k, t_next)
    return DcmState(x + v / w, x, v, t_next)
