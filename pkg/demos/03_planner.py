"""Foothold search: the steepness weight moves footholds off stair edges.

Run: python demos/03_planner.py
"""

import time

from stairplan import (
    CommandVelocity,
    GaitConfig,
    PlannerWeights,
    PlanRequest,
    TerrainSpec,
    VhipParams,
    brute_force_plan,
    generate_terrain,
    plan_foothold,
    plan_foothold_batch,
    steepness_map,
)
from stairplan.bench import make_requests

emap = generate_terrain(TerrainSpec(kind="pyramid_stairs", width_cells=81, length_cells=81,
                                    step_height=0.25, tread_depth=0.30, num_steps=6))
steep = steepness_map(emap)

# A stance foot at x = 0.1 m: the nominal 0.4 m step lands near a riser.
base = dict(xi_t=(0.16, -0.09), t=0.0, params=VhipParams(), gait=GaitConfig(leg_index=0),
            cmd=CommandVelocity(vx=1.0), emap=emap, steepness=steep, support_xy=(0.1, 0.0))
print("alpha3   u_T (support frame)   steepness   h_z")
for a3 in (0.0, 0.1, 0.5, 2.0, 100.0):
    plan = plan_foothold(PlanRequest(weights=PlannerWeights(1.0, 30.0, a3), **base))
    print(f"{a3:6.1f}   ({plan.u_T[0]:+.3f}, {plan.u_T[1]:+.3f})      "
          f"{steep.scores[plan.cell_index]:8.3f}   {plan.h_z:.2f}")

# The window bounds reach, so a whole-map scan may find a cheaper cell
# outside it. Both agree whenever the global optimum is inside the window.
req = PlanRequest(weights=PlannerWeights(), **base)
win, full = plan_foothold(req), brute_force_plan(req)
print(f"\nwindowed {win.cell_index} cost {win.cost_total:.4f}, "
      f"whole map {full.cell_index} cost {full.cost_total:.4f}")

# Batched planning evaluates every window in one array pass.
reqs = make_requests(2048, seed=1)
t0 = time.perf_counter()
batch = plan_foothold_batch(reqs)
tb = time.perf_counter() - t0
t0 = time.perf_counter()
scalar = [plan_foothold(r) for r in reqs]
ts = time.perf_counter() - t0
same = all(a.same_as(b) for a, b in zip(batch, scalar))
print(f"2048 requests: batched {1e3 * tb:.0f} ms, one by one {1e3 * ts:.0f} ms, identical: {same}")
