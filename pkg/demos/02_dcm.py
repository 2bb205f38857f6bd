"""Pendulum and DCM: how a step's height change alters the DCM growth.

Run: python demos/02_dcm.py
"""

import math

import numpy as np

from stairplan import (
    CommandVelocity,
    DcmState,
    GaitConfig,
    VhipParams,
    a_coefficient,
    dcm_propagate,
    nominal_step,
    periodic_offset,
    sigma,
    vhip_integrate,
)

T = 0.4
print("CoM slope k -> exp(sigma(T)) growth of the DCM over one 0.4 s step, and the a factor")
for rise in (-0.25, -0.15, 0.0, 0.15, 0.25):
    p = VhipParams(z0=1.0, k=rise / T, T=T)
    print(f"  rise {rise:+.2f} m  k={p.k:+.3f}  growth {math.exp(sigma(p, T)):.4f}  "
          f"a(0)={a_coefficient(p, 0.0):.4f}")

# Propagation is a pure scaling of the support-relative DCM.
p = VhipParams(z0=1.0, k=0.0, T=T)
xi = np.array([0.10, -0.05])
print(f"\nxi(0) = {xi}, xi(T) = {dcm_propagate(xi, p, 0.0)}")

# Periodic gait: starting from the periodic offset and landing on the
# nominal target reproduces the same offset one step later.
cmd = CommandVelocity(vx=1.0)
gait = GaitConfig(leg_index=0)
b_prev = periodic_offset(cmd, gait.flipped(), p)
n = np.array(nominal_step(cmd, gait, p))
b_next = dcm_propagate(b_prev, p, 0.0) - n
print(f"\nnominal step n = {n}")
print(f"offset entering the step  {b_prev}")
print(f"offset after the step     {b_next}  (mirror image: the other leg)")
print(f"matches periodic_offset:  {np.allclose(b_next, periodic_offset(cmd, gait, p))}")

# RK4 integration of the pendulum keeps xi = x + v / omega by construction
# and follows exp(sigma) growth closely on flat ground.
s = DcmState.from_com((0.05, 0.0), (0.3, 0.0), p)
for _ in range(400):
    s = vhip_integrate(s, p, 1e-3)
print(f"\nRK4 xi(T) = {s.xi[0]:.9f}, closed form {dcm_propagate((0.05 + 0.3 / math.sqrt(9.81), 0), p, 0)[0]:.9f}")
