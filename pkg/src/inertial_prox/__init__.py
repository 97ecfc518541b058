"""Two-step inertial proximal point methods and their splitting variants."""

from .core import (
    CertificateReport,
    Coefficients,
    EngineState,
    InertialParams,
    LyapunovTrace,
    RunConfig,
    RunRecord,
    Status,
    StopMetric,
    check_certificates,
    coefficients,
    delta_lower_bound,
    inertial_extrapolate,
    lyapunov_values,
    ppa_step,
    rate_bound,
    run,
    validate_params,
)

__version__ = "0.1.0"

__all__ = [
    "CertificateReport",
    "Coefficients",
    "EngineState",
    "InertialParams",
    "LyapunovTrace",
    "RunConfig",
    "RunRecord",
    "Status",
    "StopMetric",
    "check_certificates",
    "coefficients",
    "delta_lower_bound",
    "inertial_extrapolate",
    "lyapunov_values",
    "ppa_step",
    "rate_bound",
    "run",
    "validate_params",
]
