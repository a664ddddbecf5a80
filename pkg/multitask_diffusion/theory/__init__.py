from .model import (
    PREDICTOR_MAX_DIM,
    StepSizeBound,
    TheoreticalModel,
    build_model,
    combination_operator,
    spectral_radius,
    stability_report,
    step_size_bound,
    step_size_bound_exact,
)
from .msd import (
    MSDCurve,
    SteadyState,
    apply_k,
    apply_k_adjoint,
    bias,
    driving_matrix,
    export_curve,
    mean_recursion,
    settle_iterations,
    steady_state_msd,
    to_db,
    transient_msd,
)

__all__ = [
    "PREDICTOR_MAX_DIM",
    "MSDCurve",
    "SteadyState",
    "StepSizeBound",
    "TheoreticalModel",
    "apply_k",
    "apply_k_adjoint",
    "bias",
    "build_model",
    "combination_operator",
    "driving_matrix",
    "export_curve",
    "mean_recursion",
    "settle_iterations",
    "spectral_radius",
    "stability_report",
    "steady_state_msd",
    "step_size_bound",
    "step_size_bound_exact",
    "to_db",
    "transient_msd",
]
