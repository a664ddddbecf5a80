"""Cooperative localization of collinear targets in 3-D.

Targets sit on one line, w_q = R₁₂ v + ε_q r₃, where R₁₂ holds the first two
columns of a rotation R and r₃ its third column. Every agent knows its own
position p_k, picks one target, and observes noisy direction vectors towards
it. The shared component R₁₂ v is what cooperation averages; the offsets ε_q
along r₃ stay local.

Data are real-valued and carried in complex arrays with zero imaginary part so
the adaptive strategies run unchanged.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..algorithms import AlgorithmConfig, simulate_batch
from ..datamodel import SAMPLE_CHUNK_SIZE, STREAM_MEASUREMENTS, agent_rng
from ..errors import ConfigError, DataModelError, SimulationError
from ..network import identity_combination, random_geometric_topology, uniform_combination
from ..subspace import make_subspace_pair
from ..theory import MSDCurve

logger = logging.getLogger(__name__)

DEFAULT_ANGLES = (math.pi / 6, math.pi / 3, math.pi / 4)
DEFAULT_ANCHOR = (1.0, 2.0)
DEFAULT_EPSILONS = (0.0, 1.0, 3.0, 4.0, 7.0, 7.5, 9.0)
DEFAULT_AGENTS = 100
DEFAULT_STEP_SIZE = 0.1
DEFAULT_ITERATIONS = 2000
POSITION_MARGIN = 2.0
NETWORK_RADIUS = 0.3
COLOCATION_TOLERANCE = 1e-9
LOCALIZATION_VARIANTS = ("alg1", "noncoop_lms")


@dataclass(frozen=True)
class LocalizationNoise:
    alpha1: float = 0.1
    alpha2: float = 0.1
    beta: float = 0.001
    z: float = 0.3

    def __post_init__(self):
        if min(self.alpha1, self.alpha2, self.beta, self.z) < 0:
            raise ConfigError(f"Noise standard deviations must be nonnegative, got {self}.")


@dataclass(frozen=True, eq=False)
class LocalizationScenario:
    rotation_angles: tuple
    line_anchor: np.ndarray
    epsilons: np.ndarray
    agent_positions: np.ndarray
    assignment: np.ndarray
    noise: LocalizationNoise
    rotation: np.ndarray
    targets: np.ndarray
    directions: np.ndarray
    orthogonals: np.ndarray
    topology: object
    pair: object

    @property
    def n_agents(self):
        return self.agent_positions.shape[0]

    @property
    def n_targets(self):
        return self.targets.shape[0]

    @property
    def line_point(self):
        return self.rotation[:, :2] @ self.line_anchor

    @property
    def line_direction(self):
        return self.rotation[:, 2]

    @property
    def agent_optima(self):
        """Target of every agent, (N, 3)."""
        return self.targets[self.assignment]


def rotation_matrix(theta_x, theta_y, theta_z):
    """R_x(θ_x) R_y(θ_y) R_z(θ_z)."""
    cx, sx = math.cos(theta_x), math.sin(theta_x)
    cy, sy = math.cos(theta_y), math.sin(theta_y)
    cz, sz = math.cos(theta_z), math.sin(theta_z)
    r_x = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    r_y = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    r_z = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    return r_x @ r_y @ r_z


def target_positions(rotation, line_anchor, epsilons):
    anchor = rotation[:, :2] @ np.asarray(line_anchor, dtype=float)
    return anchor[np.newaxis, :] + np.outer(np.asarray(epsilons, dtype=float), rotation[:, 2])


def build_localization(
    rotation_angles=DEFAULT_ANGLES,
    line_anchor=DEFAULT_ANCHOR,
    epsilons=DEFAULT_EPSILONS,
    n_agents=DEFAULT_AGENTS,
    noise=None,
    seed=0,
    margin=POSITION_MARGIN,
    radius=NETWORK_RADIUS,
    positions=None,
    assignment=None,
):
    """Targets, agents, target assignment and the 3-D geometric network.

    Agents are drawn uniformly in the bounding box of the targets grown by
    ``margin`` on every side unless ``positions`` is given; each agent picks a
    target uniformly at random unless ``assignment`` is given.
    """
    angles = tuple(float(a) for a in rotation_angles)
    if len(angles) != 3 or not all(math.isfinite(a) for a in angles):
        raise ConfigError(f"Need three finite rotation angles, got {rotation_angles}.")
    epsilons = np.asarray(epsilons, dtype=float).reshape(-1)
    if epsilons.size < 1:
        raise ConfigError("Need at least one target.")
    line_anchor = np.asarray(line_anchor, dtype=float).reshape(-1)
    if line_anchor.shape != (2,):
        raise ConfigError(f"The line anchor must have two entries, got {line_anchor.shape[0]}.")
    noise = noise if noise is not None else LocalizationNoise()

    rotation = rotation_matrix(*angles)
    targets = target_positions(rotation, line_anchor, epsilons)
    rng = np.random.default_rng(seed)

    if positions is None:
        if n_agents < 1:
            raise ConfigError(f"Need at least one agent, got {n_agents}.")
        low = targets.min(axis=0) - margin
        high = targets.max(axis=0) + margin
        positions = rng.uniform(low, high, size=(n_agents, 3))
    positions = np.asarray(positions, dtype=float)
    n_agents = positions.shape[0]

    if assignment is None:
        assignment = rng.integers(0, epsilons.size, size=n_agents)
    assignment = np.asarray(assignment, dtype=int)
    if assignment.shape != (n_agents,) or assignment.min() < 0 or assignment.max() >= epsilons.size:
        raise ConfigError(f"Assignment must map each of {n_agents} agents to a target in [0, {epsilons.size}).")

    offsets = targets[assignment] - positions
    distances = np.linalg.norm(offsets, axis=1)
    colocated = np.flatnonzero(distances < COLOCATION_TOLERANCE)
    if colocated.size:
        raise DataModelError(f"Agents {colocated.tolist()} sit on their target; the direction vector is undefined.")
    directions = offsets / distances[:, np.newaxis]
    # Rows of each (2, 3) block span the plane orthogonal to the direction.
    orthogonals = np.stack([sla.null_space(direction[np.newaxis, :]).T for direction in directions])

    extent = positions.max(axis=0) - positions.min(axis=0)
    scale = float(extent.max()) if extent.max() > 0 else 1.0
    normalized = (positions - positions.min(axis=0)) / scale
    topology, _ = random_geometric_topology(n_agents, radius, seed, dim=3, positions=normalized)

    pair = make_subspace_pair(rotation[:, :2])
    logger.debug("Built localization scenario: %s agents, %s targets.", n_agents, epsilons.size)
    return LocalizationScenario(
        rotation_angles=angles,
        line_anchor=line_anchor,
        epsilons=epsilons,
        agent_positions=positions,
        assignment=assignment,
        noise=noise,
        rotation=rotation,
        targets=targets,
        directions=directions,
        orthogonals=orthogonals,
        topology=topology,
        pair=pair,
    )


def localization_measurements(scenario, agent, rng, size=None):
    """Noisy (d, x) towards the agent's target: x = (1-β)x̄ + α₁x̄⊥₁ + α₂x̄⊥₂, d = x w_q + z.

    With ``size`` omitted a single real scalar d and a length-3 x are returned,
    otherwise arrays of shape (size,) and (size, 3).
    """
    count = 1 if size is None else int(size)
    noise = scenario.noise
    alpha = rng.standard_normal((count, 2)) * np.array([noise.alpha1, noise.alpha2])
    beta = rng.standard_normal(count) * noise.beta
    z = rng.standard_normal(count) * noise.z

    x = (1.0 - beta)[:, np.newaxis] * scenario.directions[agent] + alpha @ scenario.orthogonals[agent]
    d = x @ scenario.targets[scenario.assignment[agent]] + z
    if size is None:
        return float(d[0]), x[0]
    return d, x


def localization_measurement(scenario, agent, rng):
    return localization_measurements(scenario, agent, rng)


class LocalizationSampler:
    """Chunked per-(run, agent) localization streams with the NetworkSampler interface."""

    def __init__(self, scenario, master_seed, run_indices, chunk_size=SAMPLE_CHUNK_SIZE):
        self.scenario = scenario
        self.run_indices = [int(r) for r in run_indices]
        self.chunk_size = int(chunk_size)
        self._rngs = [
            [agent_rng(master_seed, run, k, STREAM_MEASUREMENTS) for k in range(scenario.n_agents)]
            for run in self.run_indices
        ]
        self._d = None
        self._x = None
        self._cursor = self.chunk_size

    def _refill(self):
        chunk, n_agents = self.chunk_size, self.scenario.n_agents
        d = np.empty((chunk, len(self.run_indices), n_agents), dtype=complex)
        x = np.empty((chunk, len(self.run_indices), n_agents, 3), dtype=complex)
        for r, rngs in enumerate(self._rngs):
            for k, rng in enumerate(rngs):
                d[:, r, k], x[:, r, k, :] = localization_measurements(self.scenario, k, rng, chunk)
        self._d, self._x = d, x
        self._cursor = 0

    def draw(self):
        if self._cursor >= self.chunk_size:
            self._refill()
        i = self._cursor
        self._cursor += 1
        return self._d[i], self._x[i]


@dataclass(frozen=True, eq=False)
class LocalizationResult:
    algorithm: str
    curve: MSDCurve
    estimates: np.ndarray


def run_localization(
    scenario,
    algorithm="alg1",
    mu=DEFAULT_STEP_SIZE,
    n_iterations=DEFAULT_ITERATIONS,
    n_runs=1,
    master_seed=0,
):
    """Network MSD averaged over ``n_runs`` and the final estimates of the first converging run."""
    if algorithm not in LOCALIZATION_VARIANTS:
        raise ConfigError(f"Localization runs {list(LOCALIZATION_VARIANTS)}, got {algorithm!r}.")
    if n_runs < 1:
        raise ConfigError(f"n_runs must be at least 1, got {n_runs}.")

    if algorithm == "alg1":
        combination = uniform_combination(scenario.topology)
    else:
        combination = identity_combination(scenario.n_agents)
    config = AlgorithmConfig(variant=algorithm, step_size=mu, eta2=0.0, combination=combination, pair=scenario.pair)

    run_indices = tuple(range(n_runs))
    sampler = LocalizationSampler(scenario, master_seed, run_indices)
    batch = simulate_batch(
        config,
        scenario.agent_optima,
        sampler,
        n_iterations,
        run_indices,
        master_seed=master_seed,
        checkpoints=(n_iterations,),
    )

    kept = np.flatnonzero(batch.diverged_at < 0)
    if kept.size == 0:
        raise SimulationError(f"All {n_runs} localization runs diverged with μ={mu}.")
    total = np.zeros(n_iterations + 1)
    for i in kept:
        total += batch.msd[i]
    estimates = np.real(batch.checkpoints[n_iterations][kept[0]])

    curve = MSDCurve(
        values=total / kept.size,
        kind="simulated",
        meta={
            "scenario": "localization",
            "variant": algorithm,
            "n_runs": n_runs,
            "n_diverged": n_runs - int(kept.size),
            "master_seed": master_seed,
        },
    )
    logger.info("Localization with %s: tail MSD %.2f dB.", algorithm, curve.tail_average_db())
    return LocalizationResult(algorithm=algorithm, curve=curve, estimates=estimates)


def mean_line_distance(scenario, estimates):
    """Mean orthogonal distance of the estimated positions to the true target line."""
    offsets = np.asarray(estimates, dtype=float) - scenario.line_point
    direction = scenario.line_direction
    residual = offsets - np.outer(offsets @ direction, direction)
    return float(np.mean(np.linalg.norm(residual, axis=1)))


def localization_from_config(config, seed=None):
    """Scenario from the ``localization`` section of an ExperimentConfig."""
    section = dict(config.localization or {})
    noise = section.pop("noise", None)
    known = {"angles", "anchor", "epsilons", "n_agents", "seed", "margin", "radius"}
    unknown = sorted(set(section) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in section 'localization': {unknown}.")
    if noise is not None and not isinstance(noise, dict):
        raise ConfigError("localization.noise must be an object with alpha1, alpha2, beta and z.")
    try:
        noise = LocalizationNoise(**noise) if noise is not None else None
    except TypeError as exc:
        raise ConfigError(f"Invalid localization noise: {exc}") from exc
    return build_localization(
        rotation_angles=section.get("angles", DEFAULT_ANGLES),
        line_anchor=section.get("anchor", DEFAULT_ANCHOR),
        epsilons=section.get("epsilons", DEFAULT_EPSILONS),
        n_agents=section.get("n_agents", DEFAULT_AGENTS),
        noise=noise,
        seed=section.get("seed") if section.get("seed") is not None else (seed or 0),
        margin=section.get("margin", POSITION_MARGIN),
        radius=section.get("radius", NETWORK_RADIUS),
    )
