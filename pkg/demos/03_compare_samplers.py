"""
Adaptive sampling against the benchmarks
========================================

Same phantom seeds, same estimation pipeline, five ways of choosing the
next cell. A handful of replications only; the acceptance suite runs 100.
"""

import dataclasses

import numpy as np

from akm2d import ExperimentConfig, run_single

KINDS = ("akm2d", "random", "grid", "doe", "variance")
seeds = range(4)

print("sampler   recall      F     ER   AMMD    MMD   (means at 250 points)")
for kind in KINDS:
    cfg = dataclasses.replace(ExperimentConfig(), sampler=kind, n_max=250)
    rows = [run_single(cfg, seed=s).row_at(250) for s in seeds]
    m = {k: np.mean([r[k] for r in rows]) for k in ("recall", "f", "er", "ammd", "mmd")}
    print(f"{kind:<9} {m['recall']:6.3f} {m['f']:6.3f} {m['er']:6.3f} {m['ammd']:6.3f} {m['mmd']:6.3f}")
