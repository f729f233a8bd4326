"""Diffusion sampling via reverse transition kernels, with a DDPM baseline.

The package splits denoising into per-segment log-concave sampling problems
(MALA, projected MALA, score-only MALA, ULA, ULD) and benchmarks them against
one-step Gaussian reversal on Gaussian-mixture targets.
"""

from .bench import (
    ExperimentConfig,
    RunReport,
    allocate_nfe,
    config_from_text,
    config_to_text,
    emit_csv,
    emit_plot,
    load_config,
    paper_preset,
    run_experiment,
)
from .metrics import (
    ConditionalHistogram,
    Histogram1D,
    MetricsRow,
    conditional_histogram,
    histogram_tv,
    marginal_accuracy,
    mode_mass,
    pooled_edges,
    second_moment,
)
from .samplers import (
    ChainState,
    DdpmSpec,
    MalaSpec,
    SegmentTrace,
    UlaSpec,
    UldSpec,
    ddpm_run,
    default_projection_params,
    mala_accept_log,
    mala_run,
    projected_gate,
    rtk_run,
    taylor_energy_diff,
    ula_run,
    ula_step,
    uld_noise_covariance,
    uld_noise_pair,
    uld_run,
    uld_step,
)
from .schedule import (
    FixedSchedule,
    GaussianInit,
    RtkSchedule,
    RtkTarget,
    Segment,
    energy_hessian,
    eta_for,
    make_target,
    mala_init,
    outer_steps,
    uld_init,
)
from .targets import (
    DiffusionTime,
    IsotropicGaussianMixture,
    ScoreOracle,
    estimate_smoothness,
    forward_marginal,
    hessian_log_density,
    log_density,
    sample_base,
    score,
)

__version__ = "0.1.0"

__all__ = [
    "ChainState",
    "ConditionalHistogram",
    "DdpmSpec",
    "DiffusionTime",
    "ExperimentConfig",
    "FixedSchedule",
    "GaussianInit",
    "Histogram1D",
    "IsotropicGaussianMixture",
    "MalaSpec",
    "MetricsRow",
    "RtkSchedule",
    "RtkTarget",
    "RunReport",
    "ScoreOracle",
    "Segment",
    "SegmentTrace",
    "UlaSpec",
    "UldSpec",
    "allocate_nfe",
    "conditional_histogram",
    "config_from_text",
    "config_to_text",
    "ddpm_run",
    "default_projection_params",
    "emit_csv",
    "emit_plot",
    "energy_hessian",
    "estimate_smoothness",
    "eta_for",
    "forward_marginal",
    "hessian_log_density",
    "histogram_tv",
    "load_config",
    "log_density",
    "make_target",
    "mala_accept_log",
    "mala_init",
    "mala_run",
    "marginal_accuracy",
    "mode_mass",
    "outer_steps",
    "paper_preset",
    "pooled_edges",
    "projected_gate",
    "rtk_run",
    "run_experiment",
    "sample_base",
    "score",
    "second_moment",
    "taylor_energy_diff",
    "ula_run",
    "ula_step",
    "uld_init",
    "uld_noise_covariance",
    "uld_noise_pair",
    "uld_run",
    "uld_step",
]
