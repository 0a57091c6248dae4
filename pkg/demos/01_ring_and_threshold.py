"""
Where does the adaptive sampler go next?
========================================

One anomalous point makes a ring of high criterion value around itself.
Whether the next point lands on that ring or somewhere unexplored depends
on how coarse the rest of the design still is.
"""

import math

import numpy as np

from akm2d import GridSpec, SamplerParams, SamplerState, ingest_sample, next_point
from akm2d.sampler import exploration_threshold, ring_radius, trap_index, validate_params

# ring radius from the Lambert-W closed form
params = SamplerParams(h=0.02, lam=5.0, u=0.05)
d_ring = ring_radius(params, p_a=1.0)
print(f"ring radius d_a* = {d_ring:.4f}   (h sqrt(lam) = {params.h * math.sqrt(params.lam):.4f})")

# the threshold on the max-min distance below which the ring wins
for c in (0.5, 1.0, 3.0):
    print(f"  c = {c}: exploration threshold = {exploration_threshold(params, 1.0, c):.4f}")

# build a state: one anomaly, a coarse lattice of normal points elsewhere
grid = GridSpec(100)
state = SamplerState.empty(grid, params)
anomaly = grid.nearest(0.3, 0.3)
ingest_sample(state, anomaly, 1.0)
a0 = grid.coords(anomaly)
for x in np.arange(0.04, 1.0, 0.04):
    for y in np.arange(0.04, 1.0, 0.04):
        if math.hypot(x - a0[0], y - a0[1]) > 0.16:
            ingest_sample(state, grid.nearest(x, y), 0.0)

mmd = math.sqrt(state.d2.max()) / grid.m
pick = next_point(state)
dist = math.hypot(*(grid.coords(pick) - a0))
print(f"\nMMD = {mmd:.4f}, next point at distance {dist:.4f} from the anomaly")

# the trap rule and parameter advice
for p in (SamplerParams(0.02, 5.0, 1e-9), SamplerParams(0.01, 10.0, 1e-9), SamplerParams(0.015, 20.0, 1e-7)):
    codes = [w.code for w in validate_params(p)]
    print(f"h={p.h} lam={p.lam} u={p.u:g}: trap index {trap_index(p):.3f}, advisories {codes or 'none'}")
