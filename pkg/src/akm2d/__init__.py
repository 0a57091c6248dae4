"""Adaptive kernelized max-min distance sampling for sparse anomaly detection on 2-D grids."""

from .anomaly import apg_fit, fit_anomaly, render_anomaly, select_sparse_gamma, update_anomaly_bandwidth
from .benchmarks import DOESampler, GridSampler, RandomSampler, VarianceSampler, make_sampler
from .estimation import MeanTracker, RobustFitParams, anomaly_probability, estimate_noise, robust_fit
from .experiment import ExperimentConfig, load_config, run_replicated, run_sensitivity, run_single
from .mathutil import lambert_w0, normal_cdf, normal_quantile, soft_threshold
from .metrics import detection_metrics, sampling_metrics
from .sampler import (
    AKM2DSampler,
    GridSpec,
    SamplerParams,
    SamplerState,
    exploration_threshold,
    ingest_sample,
    init_maximin,
    next_point,
    ring_radius,
    trap_index,
    update_probabilities,
    validate_params,
)
from .simgen import generate_disk_phantom, generate_phantom

__version__ = "0.1.0"
