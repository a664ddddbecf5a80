"""Undirected agent topologies with mandatory self-loops."""

import logging
from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np

from ..errors import TopologyError

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).resolve().parent / "data"
TWELVE_AGENT_FIXTURE = FIXTURE_DIR / "twelve_agents.txt"

RADIUS_GROWTH = 1.1
MAX_RADIUS_ATTEMPTS = 60


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    n_agents: int
    adjacency: np.ndarray

    def __post_init__(self):
        adjacency = np.asarray(self.adjacency, dtype=bool)
        if adjacency.shape != (self.n_agents, self.n_agents):
            raise TopologyError(f"Adjacency must be {self.n_agents}x{self.n_agents}, got {adjacency.shape}.")
        if not np.array_equal(adjacency, adjacency.T):
            raise TopologyError("Adjacency must be symmetric.")
        if not adjacency.diagonal().all():
            raise TopologyError("Every agent must belong to its own neighborhood (diagonal must be true).")
        adjacency.setflags(write=False)
        object.__setattr__(self, "adjacency", adjacency)

    @property
    def degrees(self):
        """Neighborhood sizes |N_k|, self included."""
        return self.adjacency.sum(axis=0)

    def neighbors(self, agent):
        return np.flatnonzero(self.adjacency[:, agent])

    def edges(self):
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(rows.tolist(), cols.tolist(), strict=True))

    def to_graph(self):
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_agents))
        graph.add_edges_from(self.edges())
        return graph


def build_topology(n_agents, edge_list):
    if n_agents < 1:
        raise TopologyError("A network needs at least one agent.")

    graph = nx.Graph()
    graph.add_nodes_from(range(n_agents))
    for edge in edge_list:
        try:
            u, v = (int(node) for node in edge)
        except (TypeError, ValueError) as exc:
            raise TopologyError(f"Edge {edge!r} must be a pair of node indices.") from exc
        if not (0 <= u < n_agents and 0 <= v < n_agents):
            raise TopologyError(f"Edge ({u}, {v}) references a node outside 0..{n_agents - 1}.")
        if u != v:
            graph.add_edge(u, v)

    if not nx.is_connected(graph):
        reachable = nx.node_connected_component(graph, 0)
        stranded = sorted(set(range(n_agents)) - reachable)
        components = [sorted(c) for c in nx.connected_components(graph) if 0 not in c]
        raise TopologyError(
            f"Topology is disconnected: nodes {stranded} are unreachable from node 0 (components {components})."
        )

    adjacency = nx.to_numpy_array(graph, nodelist=list(range(n_agents)), dtype=bool)
    np.fill_diagonal(adjacency, True)
    return NetworkTopology(n_agents=n_agents, adjacency=adjacency)


def load_topology(path):
    """Read a topology file: node count on the first data line, then one "u v" edge per line."""
    lines = [
        line.strip()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.strip().startswith("#")
    ]
    if not lines:
        raise TopologyError(f"Topology file {path} is empty.")

    try:
        n_agents = int(lines[0])
        edges = [tuple(int(token) for token in line.split()) for line in lines[1:]]
    except ValueError as exc:
        raise TopologyError(f"Topology file {path} is malformed: {exc}") from exc

    bad = [edge for edge in edges if len(edge) != 2]
    if bad:
        raise TopologyError(f"Topology file {path} has edge lines without exactly two nodes: {bad[:3]}")
    return build_topology(n_agents, edges)


def twelve_agent_topology():
    return load_topology(TWELVE_AGENT_FIXTURE)


def random_geometric_topology(n_agents, radius, seed, dim=2, positions=None):
    """Seeded random geometric graph; the radius grows by 10% until the graph is connected.

    ``positions`` (N x dim) may be supplied, otherwise they are drawn uniformly in
    the unit cube. Returns the topology and the positions actually used.
    """
    if positions is None:
        rng = np.random.default_rng(seed)
        positions = rng.uniform(0.0, 1.0, size=(n_agents, dim))
    positions = np.asarray(positions, dtype=float)
    pos = {k: positions[k] for k in range(n_agents)}

    current = float(radius)
    for _ in range(MAX_RADIUS_ATTEMPTS):
        graph = nx.random_geometric_graph(n_agents, current, dim=positions.shape[1], pos=pos, seed=seed)
        if nx.is_connected(graph):
            if current != radius:
                logger.info("Geometric graph connected after growing radius %.3f -> %.3f.", radius, current)
            return build_topology(n_agents, graph.edges()), positions
        current *= RADIUS_GROWTH

    raise TopologyError(f"Could not connect {n_agents} agents by growing the radius from {radius}.")
