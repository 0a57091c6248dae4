"""
Sensitivity of the space-filling rate to (h, lam, u)
====================================================

A single disk anomaly, no anomaly-region fit, and a small parameter grid.
Cells whose MMD barely moves after the first quarter of the run are
flagged as stalled.
"""

import dataclasses

from akm2d import ExperimentConfig
from akm2d.experiment import run_sensitivity

cfg = dataclasses.replace(
    ExperimentConfig(),
    n_max=200,
    sens_h=(0.015, 0.03),
    sens_lam=(5.0, 20.0),
    sens_u=(1e-13, 1e-7),
    sens_radius=(0.0311,),
)
rows = run_sensitivity(cfg)
print("radius      h   lam       u     MMD    AMMD  trap-index  stalled")
for r in rows:
    print(f"{r['radius']:.4f} {r['h']:6.3f} {r['lam']:5.1f} {r['u']:7.0e} {r['mmd']:7.4f} {r['ammd']:7.4f}"
          f" {r['trap_index']:10.3f}  {'yes' if r['stalled'] else 'no'}")
