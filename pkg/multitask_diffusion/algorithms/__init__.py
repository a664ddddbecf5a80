from .runner import (
    BatchRecord,
    SimulationRecord,
    export_weight_trajectory,
    run_adaptive,
    simulate_batch,
)
from .strategies import (
    VARIANTS,
    AlgorithmConfig,
    DisturbanceSpec,
    NetworkState,
    adapt_step_alg1,
    adapt_step_alg2,
    adapt_step_noncoop,
    combine_step_subspace,
    step,
)

__all__ = [
    "VARIANTS",
    "AlgorithmConfig",
    "BatchRecord",
    "DisturbanceSpec",
    "NetworkState",
    "SimulationRecord",
    "adapt_step_alg1",
    "adapt_step_alg2",
    "adapt_step_noncoop",
    "combine_step_subspace",
    "export_weight_trajectory",
    "run_adaptive",
    "simulate_batch",
    "step",
]
