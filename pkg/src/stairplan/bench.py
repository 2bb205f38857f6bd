"""Batched versus one-at-a-time planner throughput.

Both paths are run on the same randomized requests and compared slot by
slot before any timing is reported.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .dcm import CommandVelocity, GaitConfig, VhipParams
from .planner import (
    FootholdPlan,
    PlannerWeights,
    PlanningError,
    PlanRequest,
    plan_foothold,
    plan_foothold_batch,
)
from .terrain import TerrainSpec, generate_terrain, steepness_map

__all__ = ["BenchReport", "BenchMismatch", "bench_planner", "make_requests", "REFERENCE"]

# Published GPU figures; recorded for context, never asserted.
REFERENCE = {"gpu_ms_per_step_batch_4096": 4.0, "gpu_speedup_vs_serial": 25.0}


class BenchMismatch(RuntimeError):
    """Batched and scalar planner outputs differ."""


@dataclass(frozen=True)
class BenchReport:
    batch_size: int
    map_cells: int
    window_cells: int
    reps: int
    ms_batched_median: float
    ms_scalar_median: float
    speedup: float
    workers: int
    correctness_checked: bool
    outputs_digest: str = ""
    n_no_plan: int = 0
    cpu_count: int = 0
    batched_slower: bool = False
    reference: dict = field(default_factory=lambda: dict(REFERENCE))

    TIMING_FIELDS = ("ms_batched_median", "ms_scalar_median", "speedup", "cpu_count",
                     "batched_slower")

    @property
    def ms_per_step_batched(self) -> float:
        return self.ms_batched_median

    @property
    def ms_per_step_scalar_loop(self) -> float:
        return self.ms_scalar_median

    def to_dict(self, timings: bool = True) -> dict:
        d = asdict(self)
        if not timings:
            for key in self.TIMING_FIELDS:
                d.pop(key)
        return d

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True)


def default_bench_map() -> TerrainSpec:
    return TerrainSpec(kind="pyramid_stairs", step_height=0.15, tread_depth=0.30, num_steps=3)


def make_requests(batch_size: int, spec: TerrainSpec | None = None, seed: int = 0,
                  weights: PlannerWeights | None = None) -> list[PlanRequest]:
    """Random mid-step planning queries from the map's center cell."""
    spec = spec or default_bench_map()
    emap = generate_terrain(spec)
    steep = steepness_map(emap)
    weights = weights or PlannerWeights()
    rng = np.random.default_rng(seed)
    ci, cj = emap.length_cells // 2, emap.width_cells // 2
    sx, sy = (float(v) for v in emap.world_of(ci, cj))
    reqs = []
    for _ in range(batch_size):
        f = float(rng.uniform(1.0, 1.5))
        T = 1.0 / (2.0 * f)
        k = float(rng.uniform(-0.4, 0.4))
        t = float(rng.uniform(0.0, 0.5 * T))
        cmd = CommandVelocity(vx=float(rng.uniform(0.0, 1.0)), vy=float(rng.uniform(-0.2, 0.2)),
                              wyaw=float(rng.uniform(-0.5, 0.5)))
        reqs.append(PlanRequest(
            xi_t=tuple(float(v) for v in rng.normal(0.0, 0.08, 2) + (0.1, 0.0)), t=t,
            params=VhipParams(z0=1.0, k=k, T=T), gait=GaitConfig(f=f, leg_index=int(rng.integers(2))),
            cmd=cmd, emap=emap, steepness=steep, weights=weights, support_xy=(sx, sy),
            yaw=float(rng.uniform(-0.3, 0.3))))
    return reqs


def _same(a, b) -> bool:
    if isinstance(a, FootholdPlan) and isinstance(b, FootholdPlan):
        return a.same_as(b)
    if isinstance(a, PlanningError) and isinstance(b, PlanningError):
        return type(a) is type(b) and str(a) == str(b)
    return False


def _digest(results) -> str:
    h = hashlib.sha256()
    for r in results:
        if isinstance(r, FootholdPlan):
            h.update(np.asarray(r.cell_index, dtype=np.int64).tobytes())
            h.update(r.u_T.tobytes())
            h.update(r.b.tobytes())
            h.update(np.float64(r.cost_total).tobytes())
        else:
            h.update(type(r).__name__.encode())
    return h.hexdigest()


def _scalar(reqs):
    out = []
    for r in reqs:
        try:
            out.append(plan_foothold(r))
        except PlanningError as exc:
            out.append(exc)
    return out


def bench_planner(batch_size: int = 4096, map_spec: TerrainSpec | None = None,
                  repetitions: int = 5, workers: int = 1, seed: int = 0) -> BenchReport:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if repetitions < 3:
        raise ValueError("repetitions must be >= 3")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    reqs = make_requests(batch_size, map_spec, seed)

    batched = plan_foothold_batch(reqs, workers=workers)
    scalar = _scalar(reqs)
    bad = [i for i, (a, b) in enumerate(zip(batched, scalar)) if not _same(a, b)]
    if bad:
        raise BenchMismatch(f"{len(bad)} of {batch_size} slots differ, first at {bad[0]}")

    tb, ts = [], []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        plan_foothold_batch(reqs, workers=workers)
        tb.append(1e3 * (time.perf_counter() - t0))
        t0 = time.perf_counter()
        _scalar(reqs)
        ts.append(1e3 * (time.perf_counter() - t0))
    mb, ms = statistics.median(tb), statistics.median(ts)

    r0 = reqs[0]
    side = 2 * int(math.floor(r0.half_extent / r0.emap.resolution + 1e-9)) + 1
    return BenchReport(
        batch_size=batch_size,
        map_cells=int(r0.emap.heights.size),
        window_cells=side * side,
        reps=repetitions,
        ms_batched_median=mb,
        ms_scalar_median=ms,
        speedup=ms / mb if mb > 0 else float("inf"),
        workers=workers,
        correctness_checked=True,
        outputs_digest=_digest(batched),
        n_no_plan=sum(isinstance(r, PlanningError) for r in batched),
        cpu_count=os.cpu_count() or 1,
        batched_slower=mb > ms,
    )
