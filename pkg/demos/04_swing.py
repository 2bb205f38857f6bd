"""Swing foot: a quadratic Bezier that clears the higher endpoint.

Run: python demos/04_swing.py
"""

import numpy as np

from stairplan import foothold_reward, make_swing, sample

lift = (0.0, 0.2, 0.0)
land = (0.4, -0.2, 0.25)  # one 25 cm riser up
traj = make_swing(lift, land, T=0.4, clearance=0.05)
print(f"apex keyframe {traj.p_apex}, Bezier control point {traj.control}")
print("\n  t[s]     x      y      z")
for t in np.linspace(0.0, 0.4, 9):
    x, y, z = sample(traj, t)
    print(f"{t:5.2f} {x:6.3f} {y:6.3f} {z:6.3f}")

# Foothold tracking reward: exp(-10 * distance), so a 10 cm miss scores e^-1.
for miss in (0.0, 0.02, 0.05, 0.1):
    print(f"miss {miss:.2f} m -> reward {foothold_reward((miss, 0, 0), (0, 0, 0)):.4f}")
