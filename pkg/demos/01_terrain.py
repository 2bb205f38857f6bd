"""Terrain: build a stair pyramid, look at its steepness along one row.

Run: python demos/01_terrain.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from stairplan import TerrainSpec, generate_terrain, save_map, steepness_map
from stairplan.terrain import sobel_gradient, write_pgm

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

spec = TerrainSpec(kind="pyramid_stairs", width_cells=81, length_cells=81,
                   step_height=0.25, tread_depth=0.30, num_steps=4)
emap = generate_terrain(spec)
print(f"map {emap.width_cells}x{emap.length_cells} cells at {emap.resolution} m, "
      f"top at {emap.heights.max():.2f} m")

# Raw Sobel slope spikes at each riser; the footprint average spreads it
# over the 3x3 cells a foot would cover.
grad = sobel_gradient(emap)
steep = steepness_map(emap)
row = emap.length_cells // 2
c = emap.width_cells // 2
print("\ncol  x[m]   height  |grad|  steepness")
for j in range(c, c + 26):
    x = emap.world_of(row, j)[0]
    print(f"{j:3d} {x:6.2f} {emap.heights[row, j]:7.2f} {grad[row, j]:7.2f} {steep.scores[row, j]:9.3f}")

# Each 30 cm tread has a flat core (zero score) between two ramps of
# nonzero score; the planner's steepness term pulls footholds into it.
flat_core = np.mean(steep.scores == 0.0)
print(f"\n{flat_core:.0%} of cells have zero aggregated steepness")

save_map(emap, out / "pyramid.emap")
write_pgm(emap.heights, out / "pyramid_height.pgm")
write_pgm(steep.scores, out / "pyramid_steepness.pgm")
print(f"wrote {out}/pyramid.emap and two PGM images")
