"""Foothold selection as a discrete search over elevation-map cells.

Every candidate cell center ``c`` (support-relative) is mapped to its DCM
offset through the end-of-step constraint ``c + b = xi_hat`` and scored

    alpha1 * |c - n|^2 + alpha2 * |b - b_nom|^2 + alpha3 * S(c)

where ``n = (L_nom, W_nom)`` and ``S`` is the steepness map. The winner is
the first minimum in (row, col) order.

Three entry points share the per-cell arithmetic and must agree bit for
bit: ``plan_foothold`` slices one window, ``plan_foothold_batch`` gathers
all windows into a (request, row, col) block and reduces once, and
``brute_force_plan`` scans the whole map without a window.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dcm import (
    CommandVelocity,
    DynamicsError,
    GaitConfig,
    VhipParams,
    integrated_frequency,
    offset_components,
)
from .terrain import ElevationMap, SteepnessMap, TerrainError

__all__ = [
    "PlannerWeights",
    "SearchWindow",
    "PlanRequest",
    "FootholdPlan",
    "CandidateCosts",
    "PlanningError",
    "NoPlanError",
    "candidate_costs",
    "plan_foothold",
    "plan_foothold_batch",
    "brute_force_plan",
    "nominal_window",
]

DEFAULT_HALF_EXTENT = 0.3
# cells whose center sits on the window boundary are included
_EDGE_TOL = 1e-9


class PlanningError(ValueError):
    """Invalid planning request."""


class NoPlanError(PlanningError):
    """The search window does not overlap the map."""

    cause = "no_plan"


@dataclass(frozen=True)
class PlannerWeights:
    alpha1: float = 1.0
    alpha2: float = 30.0
    alpha3: float = 0.5

    def __post_init__(self):
        a = (self.alpha1, self.alpha2, self.alpha3)
        if min(a) < 0:
            raise PlanningError("weights must be non-negative")
        if max(a) == 0:
            raise PlanningError("at least one weight must be positive")


@dataclass(frozen=True)
class SearchWindow:
    center: tuple[float, float]  # support-relative
    half_extent: float = DEFAULT_HALF_EXTENT

    def __post_init__(self):
        if not self.half_extent > 0:
            raise PlanningError("half_extent must be positive")


@dataclass(frozen=True, eq=False)
class PlanRequest:
    xi_t: tuple[float, float]
    t: float
    params: VhipParams
    gait: GaitConfig
    cmd: CommandVelocity
    emap: ElevationMap
    steepness: SteepnessMap
    weights: PlannerWeights = PlannerWeights()
    support_xy: tuple[float, float] = (0.0, 0.0)
    yaw: float = 0.0
    half_extent: float = DEFAULT_HALF_EXTENT

    def check(self):
        if not 0 <= self.t <= self.params.T:
            raise PlanningError(f"t={self.t} outside [0, T={self.params.T}]")
        if not self.half_extent > 0:
            raise PlanningError("half_extent must be positive")
        if self.steepness.shape != self.emap.shape:
            raise PlanningError("steepness map does not match elevation map")


@dataclass(frozen=True, eq=False)
class FootholdPlan:
    u_T: np.ndarray          # support-relative landing point
    u_world: np.ndarray
    b: np.ndarray
    h_z: float
    cost_total: float
    cost_target: float
    cost_offset: float
    cost_steep: float
    cell_index: tuple[int, int]
    xi_hat: np.ndarray       # propagated end-of-step DCM
    n: np.ndarray            # nominal target
    b_nom: np.ndarray

    def same_as(self, other: "FootholdPlan") -> bool:
        """Bitwise equality of the decision and its cost breakdown."""
        return (self.cell_index == other.cell_index
                and np.array_equal(self.u_T, other.u_T)
                and np.array_equal(self.b, other.b)
                and self.h_z == other.h_z
                and (self.cost_total, self.cost_target, self.cost_offset, self.cost_steep)
                == (other.cost_total, other.cost_target, other.cost_offset, other.cost_steep))


@dataclass(frozen=True, eq=False)
class CandidateCosts:
    """Weighted cost terms over the rows x cols block of a window."""

    rows: np.ndarray
    cols: np.ndarray
    rel_x: np.ndarray
    rel_y: np.ndarray
    total: np.ndarray
    target: np.ndarray
    offset: np.ndarray
    steep: np.ndarray

    def argmin(self) -> tuple[int, int]:
        a, b = np.unravel_index(int(np.argmin(self.total)), self.total.shape)
        return int(a), int(b)


# -- shared kernels ------------------------------------------------------------

@dataclass
class _Prepared:
    """Per-request scalars as 1-D arrays (length = number of requests)."""

    xi_hat: np.ndarray   # (B, 2)
    n: np.ndarray        # (B, 2)
    b_nom: np.ndarray    # (B, 2)
    support: np.ndarray  # (B, 2)
    alpha: np.ndarray    # (B, 3)
    origin: np.ndarray   # (B, 2)
    res: np.ndarray      # (B,)
    half: np.ndarray     # (B,)
    shape: np.ndarray    # (B, 2) rows, cols


def _prepare(reqs) -> _Prepared:
    B = len(reqs)
    col = lambda fn: np.fromiter((fn(r) for r in reqs), dtype=np.float64, count=B)
    g, z0 = col(lambda r: r.params.g), col(lambda r: r.params.z0)
    k, T, t = col(lambda r: r.params.k), col(lambda r: r.params.T), col(lambda r: r.t)
    vx, vy = col(lambda r: r.cmd.vx), col(lambda r: r.cmd.vy)
    lat, l_p = col(lambda r: r.gait.l), col(lambda r: r.gait.l_p)
    sign = col(lambda r: r.gait.sign)
    yaw = col(lambda r: r.yaw)
    xi = np.array([r.xi_t for r in reqs], dtype=np.float64).reshape(B, 2)

    s_end = integrated_frequency(g, z0, k, T)
    s_now = integrated_frequency(g, z0, k, t)
    growth = np.exp(s_end)
    xi_hat = xi * np.exp(s_end - s_now)[:, None]

    step_len = vx * T
    step_lat_vel = vy * T
    step_lat = step_lat_vel + sign * lat
    # periodic offset: velocity part of W, stance-leg parity
    bx, by = offset_components(step_len, step_lat_vel, l_p, -sign, growth)

    c, s = np.cos(yaw), np.sin(yaw)
    n = np.stack([c * step_len - s * step_lat, s * step_len + c * step_lat], axis=1)
    b_nom = np.stack([c * bx - s * by, s * bx + c * by], axis=1)

    return _Prepared(
        xi_hat=xi_hat,
        n=n,
        b_nom=b_nom,
        support=np.array([r.support_xy for r in reqs], dtype=np.float64).reshape(B, 2),
        alpha=np.array([(r.weights.alpha1, r.weights.alpha2, r.weights.alpha3) for r in reqs],
                       dtype=np.float64).reshape(B, 3),
        origin=np.array([r.emap.origin for r in reqs], dtype=np.float64).reshape(B, 2),
        res=col(lambda r: r.emap.resolution),
        half=col(lambda r: r.half_extent),
        shape=np.array([r.emap.shape for r in reqs], dtype=np.int64).reshape(B, 2),
    )


def _window_bounds(center_world, origin, res, half, shape):
    """Inclusive (row_lo, row_hi, col_lo, col_hi) of the window clipped to the map."""
    lo = np.ceil((center_world - half[:, None] - origin) / res[:, None] - _EDGE_TOL)
    hi = np.floor((center_world + half[:, None] - origin) / res[:, None] + _EDGE_TOL)
    lo = np.maximum(lo, 0).astype(np.int64)
    hi = np.minimum(hi, shape[:, ::-1] - 1).astype(np.int64)
    # columns follow x, rows follow y
    return lo[:, 1], hi[:, 1], lo[:, 0], hi[:, 0]


def _cost_terms(rel_x, rel_y, n, xi_hat, b_nom, steep, alpha):
    """Elementwise cost; every argument broadcasts to the candidate block.

    The expression order is fixed: the scalar, batched and brute-force
    paths all call this and so agree to the last bit.
    """
    dtx = rel_x - n[0]
    dty = rel_y - n[1]
    dox = (xi_hat[0] - rel_x) - b_nom[0]
    doy = (xi_hat[1] - rel_y) - b_nom[1]
    target = alpha[0] * (dtx * dtx + dty * dty)
    offset = alpha[1] * (dox * dox + doy * doy)
    steepc = alpha[2] * steep
    return target + offset + steepc, target, offset, steepc


def _block_costs(req: PlanRequest, prep: _Prepared, rows, cols) -> CandidateCosts:
    ox, oy = prep.origin[0]
    res, (sx, sy) = prep.res[0], prep.support[0]
    rel_x = (ox + cols.astype(np.float64) * res) - sx
    rel_y = (oy + rows.astype(np.float64) * res) - sy
    steep = req.steepness.scores[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    total, target, offset, steepc = _cost_terms(
        rel_x[None, :], rel_y[:, None],
        prep.n[0], prep.xi_hat[0], prep.b_nom[0], steep, prep.alpha[0])
    return CandidateCosts(rows, cols, rel_x, rel_y, total, target, offset, steepc)


def _make_plan(req, prep, b_idx, i, j, rel_x, rel_y, costs) -> FootholdPlan:
    u = np.array([rel_x, rel_y])
    xi_hat = prep.xi_hat[b_idx]
    ox, oy = prep.origin[b_idx]
    res = prep.res[b_idx]
    return FootholdPlan(
        u_T=u,
        u_world=np.array([ox + j * res, oy + i * res]),
        b=xi_hat - u,
        h_z=float(req.emap.heights[i, j]),
        cost_total=float(costs[0]),
        cost_target=float(costs[1]),
        cost_offset=float(costs[2]),
        cost_steep=float(costs[3]),
        cell_index=(int(i), int(j)),
        xi_hat=xi_hat.copy(),
        n=prep.n[b_idx].copy(),
        b_nom=prep.b_nom[b_idx].copy(),
    )


def _single_prepared(req: PlanRequest) -> _Prepared:
    req.check()
    try:
        return _prepare([req])
    except DynamicsError as exc:
        raise PlanningError(str(exc)) from None


# -- public API ------------------------------------------------------------------

def nominal_window(req: PlanRequest) -> SearchWindow:
    """The window centered on the nominal target ``(L_nom, W_nom)``."""
    prep = _single_prepared(req)
    return SearchWindow(tuple(prep.n[0]), req.half_extent)


def _windowed(req: PlanRequest, prep: _Prepared, window: SearchWindow | None) -> CandidateCosts:
    if window is None:
        center, half = prep.n[0], prep.half
    else:
        center, half = np.asarray(window.center, dtype=np.float64), np.array([window.half_extent])
    r_lo, r_hi, c_lo, c_hi = (int(v[0]) for v in _window_bounds(
        (prep.support[0] + center)[None, :], prep.origin, prep.res, half, prep.shape))
    if r_lo > r_hi or c_lo > c_hi:
        raise NoPlanError("search window lies entirely outside the map")
    return _block_costs(req, prep, np.arange(r_lo, r_hi + 1), np.arange(c_lo, c_hi + 1))


def candidate_costs(req: PlanRequest, window: SearchWindow | None = None) -> CandidateCosts:
    """Cost of every cell of ``window`` (default: the nominal window) that lies on the map."""
    return _windowed(req, _single_prepared(req), window)


def _pick(req, prep, cc: CandidateCosts) -> FootholdPlan:
    a, b = cc.argmin()
    costs = (cc.total[a, b], cc.target[a, b], cc.offset[a, b], cc.steep[a, b])
    return _make_plan(req, prep, 0, cc.rows[a], cc.cols[b], cc.rel_x[b], cc.rel_y[a], costs)


def plan_foothold(req: PlanRequest) -> FootholdPlan:
    prep = _single_prepared(req)
    return _pick(req, prep, _windowed(req, prep, None))


def brute_force_plan(req: PlanRequest) -> FootholdPlan:
    """Global argmin over every map cell; the windowed search's oracle."""
    prep = _single_prepared(req)
    rows, cols = np.arange(req.emap.length_cells), np.arange(req.emap.width_cells)
    return _pick(req, prep, _block_costs(req, prep, rows, cols))


def _solve_block(reqs) -> list:
    """Vectorized search for a list of already-checked requests."""
    prep = _prepare(reqs)
    B = len(reqs)
    r_lo, r_hi, c_lo, c_hi = _window_bounds(prep.support + prep.n, prep.origin, prep.res,
                                            prep.half, prep.shape)
    empty = (r_lo > r_hi) | (c_lo > c_hi)
    out: list = [None] * B
    for b in np.flatnonzero(empty):
        out[b] = NoPlanError("search window lies entirely outside the map")
    live = np.flatnonzero(~empty)
    if live.size == 0:
        return out

    # one stacked score grid per distinct steepness map
    slot_of: dict[int, int] = {}
    grids = []
    map_id = np.empty(B, dtype=np.int64)
    for b, r in enumerate(reqs):
        key = id(r.steepness)
        if key not in slot_of:
            slot_of[key] = len(grids)
            grids.append(r.steepness.scores)
        map_id[b] = slot_of[key]
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        raise PlanningError("batched requests must share map dimensions")
    stack = np.stack(grids) if len(grids) > 1 else grids[0][None]
    rows_n, cols_n = stack.shape[1:]

    L = live
    wr = int((r_hi[L] - r_lo[L]).max()) + 1
    wc = int((c_hi[L] - c_lo[L]).max()) + 1
    rows = r_lo[L, None] + np.arange(wr)[None, :]          # (b, wr)
    cols = c_lo[L, None] + np.arange(wc)[None, :]          # (b, wc)
    ok = (rows <= r_hi[L, None])[:, :, None] & (cols <= c_hi[L, None])[:, None, :]
    rows_c = np.minimum(rows, rows_n - 1)
    cols_c = np.minimum(cols, cols_n - 1)
    steep = stack[map_id[L, None, None], rows_c[:, :, None], cols_c[:, None, :]]

    res = prep.res[L, None]
    rel_x = (prep.origin[L, 0, None] + cols.astype(np.float64) * res) - prep.support[L, 0, None]
    rel_y = (prep.origin[L, 1, None] + rows.astype(np.float64) * res) - prep.support[L, 1, None]
    ex = lambda a: a[:, :, None, None]
    total, target, offset, steepc = _cost_terms(
        rel_x[:, None, :], rel_y[:, :, None],
        ex(prep.n[L].T), ex(prep.xi_hat[L].T), ex(prep.b_nom[L].T), steep, ex(prep.alpha[L].T))
    masked = np.where(ok, total, np.inf).reshape(len(L), -1)
    flat = np.argmin(masked, axis=1)
    a_idx, b_idx = np.divmod(flat, wc)
    sel = np.arange(len(L))
    picks = (total[sel, a_idx, b_idx], target[sel, a_idx, b_idx],
             offset[sel, a_idx, b_idx], steepc[sel, a_idx, b_idx])
    for m, b in enumerate(L):
        i, j = rows[m, a_idx[m]], cols[m, b_idx[m]]
        costs = tuple(p[m] for p in picks)
        out[b] = _make_plan(reqs[b], prep, b, i, j, rel_x[m, b_idx[m]], rel_y[m, a_idx[m]], costs)
    return out


def plan_foothold_batch(reqs, workers: int = 1) -> list:
    """Plan every request; a slot holds a ``FootholdPlan`` or the ``PlanningError``.

    Requests are split into contiguous chunks across ``workers`` threads.
    Results do not depend on the chunking.
    """
    reqs = list(reqs)
    if not reqs:
        raise PlanningError("empty batch")
    out: list = [None] * len(reqs)
    good = []
    for idx, r in enumerate(reqs):
        try:
            r.check()
            # parameter validation that would otherwise abort the whole block
            if r.params.k * r.t + r.params.z0 <= 0:
                raise PlanningError("pendulum height is non-positive")
        except (PlanningError, TerrainError) as exc:
            out[idx] = exc if isinstance(exc, PlanningError) else PlanningError(str(exc))
            continue
        good.append(idx)
    if not good:
        return out

    workers = max(1, min(int(workers), len(good)))
    chunks = [c for c in np.array_split(np.asarray(good), workers) if c.size]
    solve = lambda c: _solve_block([reqs[i] for i in c])
    if workers == 1:
        results = [solve(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve, chunks))
    for c, res in zip(chunks, results):
        for i, r in zip(c, res):
            out[i] = r
    return out
