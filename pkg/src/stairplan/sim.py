"""Closed-loop point-mass walker on an elevation map.

Each step: plan a foothold from the current support-relative DCM, integrate
the variable-height pendulum over the swing, land exactly on the planned
cell and hand the DCM over to the new support. Falls are a DCM escaping
``fall_radius``, an empty search window, or leaving the map.

Many walkers advance in lockstep through the same array code. A single
episode is the one-walker case, so ensembles reproduce individual
episodes bit for bit whatever the chunking across workers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dcm import (
    CommandVelocity,
    DcmState,
    GaitConfig,
    VhipParams,
    periodic_offset,
    rk4_step,
    step_duration,
)
from .planner import FootholdPlan, PlannerWeights, PlanRequest, plan_foothold_batch
from .swing import DEFAULT_CLEARANCE, foothold_reward, make_swing
from .terrain import (
    ElevationMap,
    FootprintKernel,
    SteepnessMap,
    TerrainSpec,
    generate_terrain,
    load_map,
    steepness_map,
)

__all__ = [
    "EpisodeConfig",
    "WalkerState",
    "StepTrace",
    "EpisodeMetrics",
    "SuccessReport",
    "Fall",
    "initial_state",
    "step_once",
    "run_episode",
    "run_ensemble",
    "walker_config",
    "build_terrain",
    "write_trace_csv",
    "DEFAULT_SPEEDS",
]

DEFAULT_SPEEDS = (0.5, 1.0, 1.5, 2.0)
TRACE_COLUMNS = ("step", "t", "cmd_vx", "cmd_vy", "k", "uTx", "uTy", "bx", "by", "hz",
                 "cost_total", "cost_target", "cost_offset", "cost_steep",
                 "td_x", "td_y", "td_z", "xi_x", "xi_y")


class Fall(Exception):
    """The walker could not complete the step."""

    def __init__(self, cause: str, state: "WalkerState | None" = None):
        super().__init__(cause)
        self.cause = cause
        self.state = state


def _flat_default() -> TerrainSpec:
    return TerrainSpec(kind="flat", width_cells=320, length_cells=60, center=(7.0, 0.0))


@dataclass(frozen=True)
class EpisodeConfig:
    terrain: TerrainSpec = field(default_factory=_flat_default)
    map_path: str | None = None
    schedule: tuple = ((0.0, CommandVelocity(vx=1.0)),)
    max_steps: int = 60
    goal_distance: float | None = 5.0
    fall_radius: float = 1.0
    z0: float = 1.0
    g: float = 9.81
    gait: GaitConfig = GaitConfig()
    step_time: float | None = None
    weights: PlannerWeights = PlannerWeights()
    kernel: FootprintKernel = FootprintKernel()
    half_extent: float = 0.3
    dt: float = 1e-3
    clearance: float = DEFAULT_CLEARANCE
    touchdown_noise: float = 0.0
    transient_steps: int = 3
    start_xy: tuple = (0.0, 0.0)
    start_yaw: float = 0.0
    seed: int = 0

    def __post_init__(self):
        times = [float(s[0]) for s in self.schedule]
        if not times or times[0] != 0.0:
            raise ValueError("command schedule must start at t = 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("schedule times must be strictly increasing")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.fall_radius > 0 or not self.dt > 0:
            raise ValueError("fall_radius and dt must be positive")
        if self.touchdown_noise < 0:
            raise ValueError("touchdown_noise must be >= 0")

    @property
    def T(self) -> float:
        return self.step_time if self.step_time is not None else step_duration(self.gait.f)

    def command_at(self, t: float) -> tuple[int, CommandVelocity]:
        seg = 0
        for i, (start, _) in enumerate(self.schedule):
            if t + 1e-9 >= start:
                seg = i
        return seg, self.schedule[seg][1]

    def engine_key(self):
        """Settings that walkers advanced together must share."""
        return (self.terrain, self.map_path, self.fall_radius, self.z0, self.g,
                self.gait.l, self.gait.l_p, self.T, self.weights, self.kernel,
                self.half_extent, self.dt, self.clearance, self.transient_steps)


@dataclass(eq=False)
class WalkerState:
    support_pos: np.ndarray
    leg_index: int
    dcm: DcmState
    yaw: float = 0.0
    step_count: int = 0
    time: float = 0.0
    swing_pos: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class StepTrace:
    step: int
    t: float
    cmd: CommandVelocity
    segment: int
    k: float
    plan: FootholdPlan
    touchdown: np.ndarray     # world, 3D
    xi_touchdown: np.ndarray  # DCM at the end of the swing, old support frame
    velocity: np.ndarray      # (forward, lateral) in the command frame
    heading: np.ndarray       # unit forward axis at plan time
    swing_apex_z: float
    foot_reward: float

    @property
    def offset_error(self) -> float:
        """|xi(T) - u_T - b_nom|: distance from the periodic gait."""
        d = self.xi_touchdown - self.plan.u_T - self.plan.b_nom
        return float(math.sqrt(d[0] * d[0] + d[1] * d[1]))

    @property
    def step_length(self) -> float:
        """Realized step along the heading used at plan time."""
        return float(self.plan.u_T @ self.heading)

    def row(self) -> list:
        p = self.plan
        return [self.step, self.t, self.cmd.vx, self.cmd.vy, self.k, p.u_T[0], p.u_T[1],
                p.b[0], p.b[1], p.h_z, p.cost_total, p.cost_target, p.cost_offset,
                p.cost_steep, *self.touchdown, *self.xi_touchdown]


@dataclass(frozen=True)
class EpisodeMetrics:
    outcome: str                 # success | fall | timeout
    velocity_mae: float
    mean_foothold_deviation: float
    distance_traveled: float
    steps_taken: int
    fall_cause: str | None = None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        for key in ("velocity_mae", "mean_foothold_deviation", "distance_traveled"):
            if not math.isfinite(d[key]):
                d[key] = None
        return d


@dataclass(frozen=True)
class SuccessReport:
    speeds: tuple
    success_ratio: tuple
    mae_quantiles: dict
    n_walkers: int
    seeds_digest: str
    outcomes: tuple = ()

    def to_json(self) -> str:
        body = {"speeds": list(self.speeds), "success_ratio": list(self.success_ratio),
                "mae_quantiles": self.mae_quantiles, "n_walkers": self.n_walkers,
                "seeds_digest": self.seeds_digest}
        return json.dumps(body, indent=2, sort_keys=True)


SUCCESS_REPORT_SCHEMA = {
    "type": "object",
    "required": ["speeds", "success_ratio", "mae_quantiles", "n_walkers", "seeds_digest"],
    "properties": {
        "speeds": {"type": "array", "items": {"type": "number"}},
        "success_ratio": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "mae_quantiles": {
            "type": "object",
            "required": ["p25", "p50", "p75"],
            "additionalProperties": {"type": "array", "items": {"type": ["number", "null"]}},
        },
        "n_walkers": {"type": "integer", "minimum": 1},
        "seeds_digest": {"type": "string"},
    },
}


# -- setup -------------------------------------------------------------------------

def build_terrain(cfg: EpisodeConfig) -> tuple[ElevationMap, SteepnessMap]:
    emap = load_map(cfg.map_path) if cfg.map_path else generate_terrain(cfg.terrain)
    return emap, steepness_map(emap, cfg.kernel)


def _rot(yaw, vx, vy):
    c, s = np.cos(yaw), np.sin(yaw)
    return c * vx - s * vy, s * vx + c * vy


def _snap(emap: ElevationMap, xy) -> np.ndarray:
    i, j = emap.cell_of(xy[0], xy[1])
    if not (0 <= i < emap.length_cells and 0 <= j < emap.width_cells):
        raise Fall("off_map")
    x, y = emap.world_of(i, j)
    return np.array([float(x), float(y), float(emap.heights[i, j])])


def initial_state(cfg: EpisodeConfig, emap: ElevationMap) -> WalkerState:
    """Standing still on the periodic-gait DCM offset of the opening command."""
    support = _snap(emap, cfg.start_xy)
    _, cmd = cfg.command_at(0.0)
    params = VhipParams(z0=cfg.z0, k=0.0, T=cfg.T, g=cfg.g)
    b = periodic_offset(cmd, cfg.gait.flipped(), params)
    bx, by = _rot(cfg.start_yaw, b[0], b[1])
    x = np.array([float(bx), float(by)])
    v = np.zeros(2)
    ox, oy = _rot(cfg.start_yaw, 0.0, cfg.gait.sign * cfg.gait.l)
    other_xy = (support[0] + float(ox), support[1] + float(oy))
    if emap.contains(*other_xy):
        other = np.array([*other_xy, float(emap.heights[emap.cell_of(*other_xy)])])
    else:
        other = np.array([*other_xy, support[2]])
    return WalkerState(support, cfg.gait.leg_index, DcmState(x.copy(), x, v, 0.0),
                       float(cfg.start_yaw), 0, 0.0, other)


# -- lockstep engine -------------------------------------------------------------------

@dataclass(eq=False)
class _Walkers:
    support: np.ndarray  # (N, 3)
    leg: np.ndarray      # (N,)
    x: np.ndarray        # (N, 2)
    v: np.ndarray        # (N, 2)
    yaw: np.ndarray      # (N,)
    swing: np.ndarray    # (N, 3)
    steps: np.ndarray    # (N,)
    time: np.ndarray     # (N,)

    @classmethod
    def stack(cls, states):
        return cls(np.array([s.support_pos for s in states], dtype=np.float64),
                   np.array([s.leg_index for s in states], dtype=np.int64),
                   np.array([s.dcm.com_pos for s in states], dtype=np.float64),
                   np.array([s.dcm.com_vel for s in states], dtype=np.float64),
                   np.array([s.yaw for s in states], dtype=np.float64),
                   np.array([s.swing_pos for s in states], dtype=np.float64),
                   np.array([s.step_count for s in states], dtype=np.int64),
                   np.array([s.time for s in states], dtype=np.float64))

    def state(self, m: int, cfg: EpisodeConfig) -> WalkerState:
        w0 = math.sqrt(cfg.g / cfg.z0)
        x, v = self.x[m].copy(), self.v[m].copy()
        return WalkerState(self.support[m].copy(), int(self.leg[m]),
                           DcmState(x + v / w0, x, v, 0.0), float(self.yaw[m]),
                           int(self.steps[m]), float(self.time[m]), self.swing[m].copy())


class _Engine:
    def __init__(self, cfg: EpisodeConfig, emap: ElevationMap, steep: SteepnessMap):
        self.cfg, self.emap, self.steep = cfg, emap, steep
        self.T = cfg.T
        self.n_sub = max(1, int(round(self.T / cfg.dt)))
        self.h = self.T / self.n_sub
        self.w0 = math.sqrt(cfg.g / cfg.z0)

    def _request(self, W: _Walkers, m: int, cmd, k: float) -> PlanRequest:
        cfg = self.cfg
        return PlanRequest(
            xi_t=(W.x[m, 0] + W.v[m, 0] / self.w0, W.x[m, 1] + W.v[m, 1] / self.w0),
            t=0.0, params=VhipParams(z0=cfg.z0, k=k, T=self.T, g=cfg.g),
            gait=replace(cfg.gait, leg_index=int(W.leg[m])), cmd=cmd, emap=self.emap,
            steepness=self.steep, weights=cfg.weights,
            support_xy=(W.support[m, 0], W.support[m, 1]), yaw=float(W.yaw[m]),
            half_extent=cfg.half_extent)

    def advance(self, W: _Walkers, cfgs, rngs):
        """Advance every walker by one step.

        Returns the new walkers, a trace (or None) per walker and a fall
        cause (or None) per walker.
        """
        cfg, emap, T = self.cfg, self.emap, self.T
        N = len(cfgs)
        causes: list = [None] * N
        segs, cmds = zip(*(c.command_at(float(t)) for c, t in zip(cfgs, W.time)))
        vx = np.array([c.vx for c in cmds])
        vy = np.array([c.vy for c in cmds])
        wyaw = np.array([c.wyaw for c in cmds])
        sign = np.where(W.leg == 0, 1.0, -1.0)

        # terrain slope of the CoM from the nominal landing height
        nx, ny = _rot(W.yaw, vx * T, vy * T + sign * cfg.gait.l)
        tx, ty = W.support[:, 0] + nx, W.support[:, 1] + ny
        on_map = emap.contains(tx, ty)
        ti, tj = emap.cell_of(tx, ty)
        # off the map the slope is unknown; plan level and let the window decide
        h_nom = np.where(on_map, emap.heights[np.clip(ti, 0, emap.length_cells - 1),
                                              np.clip(tj, 0, emap.width_cells - 1)],
                         W.support[:, 2])
        k = (h_nom - W.support[:, 2]) / T
        ok_height = k * T + cfg.z0 > 0

        live = []
        for m in range(N):
            if not ok_height[m]:
                causes[m] = "no_plan"  # no pendulum reaches that landing height
            else:
                live.append(m)
        plans: list = [None] * N
        reqs = [self._request(W, m, cmds[m], float(k[m])) for m in live]
        for m, res in zip(live, plan_foothold_batch(reqs) if reqs else ()):
            if isinstance(res, Exception):
                causes[m] = getattr(res, "cause", "no_plan")
            else:
                plans[m] = res
        act = np.array([m for m in range(N) if plans[m] is not None], dtype=np.int64)
        traces: list = [None] * N
        if act.size == 0:
            return W, traces, causes

        # swing phase
        x, v = W.x[act].copy(), W.v[act].copy()
        x_start = x.copy()
        kk = k[act][:, None]
        r2max = cfg.fall_radius * cfg.fall_radius
        escaped = np.zeros(act.size, dtype=bool)
        h = self.h
        for s in range(self.n_sub):
            t0 = s * h
            x, v = rk4_step(x, v, t0, h, cfg.g, cfg.z0, kk)
            w = np.sqrt(cfg.g / (kk * (t0 + h) + cfg.z0))
            xi = x + v / w
            escaped |= xi[:, 0] * xi[:, 0] + xi[:, 1] * xi[:, 1] > r2max
        w_end = np.sqrt(cfg.g / (kk * T + cfg.z0))
        xi_end = x + v / w_end

        new = _Walkers(W.support.copy(), W.leg.copy(), W.x.copy(), W.v.copy(), W.yaw.copy(),
                       W.swing.copy(), W.steps.copy(), W.time.copy())
        for a, m in enumerate(act):
            if escaped[a]:
                causes[m] = "fall_radius"
                continue
            plan = plans[m]
            td = plan.u_world.copy()
            if cfg.touchdown_noise > 0:
                td = td + rngs[m].normal(0.0, cfg.touchdown_noise, 2)
                if not emap.contains(td[0], td[1]):
                    causes[m] = "off_map"
                    continue
                h_td = float(emap.heights[emap.cell_of(td[0], td[1])])
            else:
                h_td = plan.h_z
            disp = td - W.support[m, :2]
            xi_new = xi_end[a] - disp
            x_new = x[a] - disp
            if w_end[a, 0] == self.w0:
                v_new = v[a].copy()
            else:
                # height resets at touchdown; keep the DCM continuous
                v_new = self.w0 * (xi_new - x_new)
            touchdown = np.array([td[0], td[1], h_td])
            swing = make_swing(W.swing[m], touchdown, T, cfg.clearance)
            c, s_ = math.cos(W.yaw[m]), math.sin(W.yaw[m])
            d_com = x[a] - x_start[a]
            vel = np.array([c * d_com[0] + s_ * d_com[1], -s_ * d_com[0] + c * d_com[1]]) / T
            traces[m] = StepTrace(
                step=int(W.steps[m]), t=float(W.time[m]), cmd=cmds[m], segment=segs[m],
                k=float(k[m]), plan=plan, touchdown=touchdown, xi_touchdown=xi_end[a].copy(),
                velocity=vel, heading=np.array([c, s_]), swing_apex_z=float(swing.p_apex[2]),
                foot_reward=foothold_reward(touchdown, [*plan.u_world, plan.h_z]))
            new.swing[m] = W.support[m]
            new.support[m] = touchdown
            new.x[m], new.v[m] = x_new, v_new
            new.leg[m] = 1 - W.leg[m]
            new.yaw[m] = W.yaw[m] + wyaw[m] * T
            new.steps[m] = W.steps[m] + 1
            new.time[m] = W.time[m] + T
        return new, traces, causes


def step_once(state: WalkerState, cfg: EpisodeConfig, emap: ElevationMap,
              steepness: SteepnessMap, rng=None) -> tuple[WalkerState, StepTrace]:
    """Plan, swing and land once. Raises ``Fall`` when the step fails."""
    eng = _Engine(cfg, emap, steepness)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    new, traces, causes = eng.advance(_Walkers.stack([state]), [cfg], [rng])
    if causes[0] is not None:
        raise Fall(causes[0], state)
    return new.state(0, cfg), traces[0]


def _metrics(cfg: EpisodeConfig, traces, outcome, cause, start, final) -> EpisodeMetrics:
    seg_pos: dict[int, int] = {}
    errs = []
    devs = []
    for tr in traces:
        n = seg_pos.get(tr.segment, 0)
        seg_pos[tr.segment] = n + 1
        if n >= cfg.transient_steps:
            errs.append(abs(tr.velocity[0] - tr.cmd.vx))
        d = tr.touchdown[:2] - tr.plan.u_world
        devs.append(math.sqrt(d[0] * d[0] + d[1] * d[1]))
    mae = float(np.mean(errs)) if errs else float("nan")
    dev = float(np.mean(devs)) if devs else float("nan")
    dist = float(math.hypot(final[0] - start[0], final[1] - start[1]))
    return EpisodeMetrics(outcome, mae, dev, dist, len(traces), cause)


def _run_lockstep(cfgs, emap, steep):
    """Run several episodes that share engine settings; results in input order."""
    key = cfgs[0].engine_key()
    if any(c.engine_key() != key for c in cfgs[1:]):
        raise ValueError("walkers advanced together must share terrain, dynamics and planner settings")
    eng = _Engine(cfgs[0], emap, steep)
    N = len(cfgs)
    states = []
    done: list = [None] * N
    for m, c in enumerate(cfgs):
        try:
            states.append(initial_state(c, emap))
        except Fall as f:
            done[m] = ("fall", f.cause)
            states.append(None)
    traces = [[] for _ in range(N)]
    starts = [s.support_pos[:2].copy() if s is not None else np.zeros(2) for s in states]
    rngs = [np.random.default_rng(c.seed) for c in cfgs]
    alive = [m for m in range(N) if done[m] is None]
    W = _Walkers.stack([states[m] for m in alive]) if alive else None
    last = {m: states[m].support_pos.copy() for m in alive}
    while alive:
        sub_cfgs = [cfgs[m] for m in alive]
        W, tr, causes = eng.advance(W, sub_cfgs, [rngs[m] for m in alive])
        keep = []
        for a, m in enumerate(alive):
            if causes[a] is not None:
                done[m] = ("fall", causes[a])
                continue
            traces[m].append(tr[a])
            last[m] = W.support[a].copy()
            c = cfgs[m]
            if c.goal_distance is not None and math.hypot(
                    *(W.support[a, :2] - starts[m])) >= c.goal_distance:
                done[m] = ("success", None)
            elif len(traces[m]) >= c.max_steps:
                done[m] = ("timeout", None)
            else:
                keep.append(a)
        alive = [alive[a] for a in keep]
        if alive:
            idx = np.array(keep, dtype=np.int64)
            W = _Walkers(W.support[idx], W.leg[idx], W.x[idx], W.v[idx], W.yaw[idx],
                         W.swing[idx], W.steps[idx], W.time[idx])
    out = []
    for m in range(N):
        outcome, cause = done[m]
        final = last.get(m, np.zeros(3))
        out.append((_metrics(cfgs[m], traces[m], outcome, cause, starts[m], final), traces[m]))
    return out


def run_episode(cfg: EpisodeConfig, terrain=None):
    """Simulate until goal, fall or ``max_steps``. Returns (metrics, traces)."""
    emap, steep = terrain if terrain is not None else build_terrain(cfg)
    return _run_lockstep([cfg], emap, steep)[0]


def walker_config(template: EpisodeConfig, speed: float, walker: int, seed: int,
                  pose_radius: float = 0.1) -> EpisodeConfig:
    """Episode of ensemble member ``walker``: random heading and start offset."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(walker)]))
    yaw = float(rng.uniform(0.0, 2.0 * math.pi))
    off = rng.uniform(-pose_radius, pose_radius, 2)
    walker_seed = int(rng.integers(0, 2**63 - 1))
    return replace(template,
                   schedule=((0.0, CommandVelocity(vx=float(speed))),),
                   start_xy=(template.start_xy[0] + float(off[0]),
                             template.start_xy[1] + float(off[1])),
                   start_yaw=yaw, seed=walker_seed)


def run_ensemble(template: EpisodeConfig, n_walkers: int = 500, speeds=DEFAULT_SPEEDS,
                 seed: int = 0, pose_radius: float = 0.1, workers: int = 1,
                 return_metrics: bool = False):
    """Success ratio and velocity-error quantiles per commanded speed."""
    if n_walkers < 1:
        raise ValueError("n_walkers must be >= 1")
    emap, steep = build_terrain(template)
    ratios, q25, q50, q75, outcomes, all_metrics = [], [], [], [], [], []
    for speed in speeds:
        cfgs = [walker_config(template, speed, w, seed, pose_radius) for w in range(n_walkers)]
        n_chunks = max(1, min(int(workers), n_walkers))
        chunks = [list(c) for c in np.array_split(np.arange(n_walkers), n_chunks) if c.size]
        run = lambda idx: _run_lockstep([cfgs[i] for i in idx], emap, steep)
        if n_chunks == 1:
            parts = [run(chunks[0])]
        else:
            with ThreadPoolExecutor(max_workers=n_chunks) as pool:
                parts = list(pool.map(run, chunks))
        results = [r for part in parts for r in part]
        metrics = [m for m, _ in results]
        all_metrics.append(metrics)
        ratios.append(sum(m.outcome == "success" for m in metrics) / n_walkers)
        maes = np.array([m.velocity_mae for m in metrics])
        maes = maes[np.isfinite(maes)]
        for store, q in ((q25, 0.25), (q50, 0.5), (q75, 0.75)):
            store.append(float(np.quantile(maes, q)) if maes.size else None)
        outcomes.append({o: sum(m.outcome == o for m in metrics)
                         for o in ("success", "fall", "timeout")})
    seeds = [walker_config(template, 0.0, w, seed, pose_radius).seed for w in range(n_walkers)]
    digest = hashlib.sha256(json.dumps([int(seed), n_walkers, seeds]).encode()).hexdigest()
    report = SuccessReport(tuple(float(s) for s in speeds), tuple(ratios),
                           {"p25": q25, "p50": q50, "p75": q75}, n_walkers, digest,
                           tuple(outcomes))
    return (report, all_metrics) if return_metrics else report


def write_trace_csv(traces, path=None) -> str:
    """One row per completed step; floats written with ``repr`` for exact round trips."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for tr in traces:
        w.writerow([v if isinstance(v, int) else repr(float(v)) for v in tr.row()])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
