"""Universal estimators of the conditional variance in power-variation limit theorems."""

from .errors import (
    AccuracyWarning,
    CondvarError,
    ConfigError,
    NumericOverflowError,
    RangeError,
    SubsetRefusalError,
)
from .estimators import (
    EstimatorConfig,
    VarianceReport,
    estimate,
    mz_estimator,
    qv_baseline,
    subsample_estimator,
    v_hat,
    v_tilde,
    v_universal,
)
from .harness import (
    EstimatorSpec,
    ExperimentSpec,
    McSummary,
    run_clt_check,
    run_consistency,
    run_failure_demo,
    run_replications,
)
from .simulate import (
    CompoundPoisson,
    ConstantDrift,
    ConstantVol,
    ContinuousPower,
    GaussianSize,
    GeometricOU,
    JumpPower,
    MeanRevertingDrift,
    ModelSpec,
    NoJumps,
    PointMass,
    Quadratic,
    SimulatedPath,
    TwoPoint,
    VolScaledDrift,
    simulate_path,
    true_variance,
)
from .statistics import (
    ScalingMode,
    block_increment_power,
    block_sum_theta_hat,
    c_p_constant,
    normal_abs_moment,
    power_variation,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyWarning",
    "CompoundPoisson",
    "CondvarError",
    "ConfigError",
    "ConstantDrift",
    "ConstantVol",
    "ContinuousPower",
    "EstimatorConfig",
    "EstimatorSpec",
    "ExperimentSpec",
    "GaussianSize",
    "GeometricOU",
    "JumpPower",
    "McSummary",
    "MeanRevertingDrift",
    "ModelSpec",
    "NoJumps",
    "NumericOverflowError",
    "PointMass",
    "Quadratic",
    "RangeError",
    "ScalingMode",
    "SimulatedPath",
    "SubsetRefusalError",
    "TwoPoint",
    "VarianceReport",
    "VolScaledDrift",
    "block_increment_power",
    "block_sum_theta_hat",
    "c_p_constant",
    "estimate",
    "mz_estimator",
    "normal_abs_moment",
    "power_variation",
    "qv_baseline",
    "run_clt_check",
    "run_consistency",
    "run_failure_demo",
    "run_replications",
    "simulate_path",
    "subsample_estimator",
    "true_variance",
    "v_hat",
    "v_tilde",
    "v_universal",
]
