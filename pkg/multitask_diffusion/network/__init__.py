from .combination import (
    CombinationMatrix,
    combination_for,
    combination_from_matrix,
    identity_combination,
    metropolis_combination,
    uniform_combination,
)
from .topology import (
    NetworkTopology,
    build_topology,
    load_topology,
    random_geometric_topology,
    twelve_agent_topology,
)

__all__ = [
    "CombinationMatrix",
    "NetworkTopology",
    "build_topology",
    "combination_for",
    "combination_from_matrix",
    "identity_combination",
    "load_topology",
    "metropolis_combination",
    "random_geometric_topology",
    "twelve_agent_topology",
    "uniform_combination",
]
