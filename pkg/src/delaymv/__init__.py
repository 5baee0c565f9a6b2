"""Delay-feedback stabilization toolkit for mean-field SDEs with common noise."""

from .bounds import (
    BoundednessThresholds,
    RateBound,
    StabilizationThresholds,
    boundedness_thresholds,
    decay_rate,
    lyapunov_weights,
    phi,
    psi,
    stabilization_thresholds,
    varphi,
)
from .measure import EmpiricalMeasure, mean, second_moment, w2_1d
from .model import (
    AuditReport,
    ConstantsBundle,
    ControlParams,
    LinearMeanFieldModel,
    audit_constants,
    eval_common_diffusion,
    eval_diffusion,
    eval_drift,
)
from .sim import (
    BlowUpError,
    MeanSquareSeries,
    NoisePlan,
    ParticleEnsemble,
    SimConfig,
    TrajectoryRecord,
    init_ensemble,
    run_monte_carlo,
    run_replication,
    run_replications,
    step,
)

__version__ = "0.1.0"
