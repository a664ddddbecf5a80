from .compare import (
    ComparisonTable,
    compare_curves,
    compare_runs,
    export_comparison,
    export_summary,
    iterations_to_floor,
)
from .localization import (
    LocalizationNoise,
    LocalizationScenario,
    build_localization,
    localization_from_config,
    localization_measurement,
    localization_measurements,
    mean_line_distance,
    run_localization,
)
from .montecarlo import (
    drift_ratio,
    monte_carlo_checkpoint_weights,
    monte_carlo_mean_error,
    monte_carlo_msd,
)
from .settings import (
    ExperimentConfig,
    ResolvedExperiment,
    config_digest,
    config_from_dict,
    config_to_dict,
    leaky_validation_grid,
    load_config,
    resolve,
    save_config,
    small_xi_setting,
    validation_setting,
)

__all__ = [
    "ComparisonTable",
    "ExperimentConfig",
    "LocalizationNoise",
    "LocalizationScenario",
    "ResolvedExperiment",
    "build_localization",
    "compare_curves",
    "compare_runs",
    "config_digest",
    "config_from_dict",
    "config_to_dict",
    "drift_ratio",
    "export_comparison",
    "export_summary",
    "iterations_to_floor",
    "leaky_validation_grid",
    "load_config",
    "localization_from_config",
    "localization_measurement",
    "localization_measurements",
    "mean_line_distance",
    "monte_carlo_checkpoint_weights",
    "monte_carlo_mean_error",
    "monte_carlo_msd",
    "resolve",
    "run_localization",
    "save_config",
    "small_xi_setting",
    "validation_setting",
]
