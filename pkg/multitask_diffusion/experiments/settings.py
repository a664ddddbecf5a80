"""Experiment configuration: JSON schema, resolution into runtime objects, and presets.

A config file is a JSON object with ``schema_version`` 1. Every optional field
is filled in by ``config_to_dict`` so the echo written next to results fully
determines the experiment.
"""

import dataclasses
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..algorithms import VARIANTS, AlgorithmConfig, DisturbanceSpec
from ..datamodel import sample_environments, sample_tasks, stacked_optima
from ..errors import ConfigError, DiffusionError
from ..network import build_topology, combination_for, random_geometric_topology, twelve_agent_topology
from ..network.topology import load_topology
from ..subspace import make_subspace_pair, matrix_subspace, standard_basis_subspace, ula_vandermonde_subspace

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCENARIOS = ("validation1", "validation2", "drift", "localization", "custom")

# Tags for seeds derived from the master seed; run streams use spawn keys of other lengths.
SEED_TAG_TASKS = 1
SEED_TAG_ENVIRONMENT = 2
SEED_TAG_NETWORK = 3
SEED_TAG_LOCALIZATION = 4

THETA2_ANGLES = (math.pi / 6, math.pi / 4, math.pi / 3)
THETA2_SPACING = 0.5
DRIFT_ITERATIONS = 50_000
DEFAULT_ITERATIONS = 3000
ITERATION_ROUNDING = 100


def derive_seed(master_seed, tag):
    sequence = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(tag), 0, 0, 0))
    return int(sequence.generate_state(1)[0])


# ── Schema ───────────────────────────────────────────────────────────


@dataclass(frozen=True)
class NetworkSpec:
    kind: str = "fixture"
    n_agents: int = 12
    edges: tuple = ()
    path: str | None = None
    radius: float = 0.3
    seed: int | None = None
    combination: str = "uniform"


@dataclass(frozen=True)
class SubspaceSpec:
    kind: str = "standard_basis"
    dim: int = 5
    rank: int = 3
    angles: tuple = ()
    spacing_ratio: float = 0.5
    matrix: object = None


@dataclass(frozen=True)
class TaskSpec:
    u_stddev: float = 1.0
    xi_stddev: float = 1.0
    nu_stddev: float = 0.0
    seed: int | None = None


@dataclass(frozen=True)
class EnvironmentSpec:
    covariance_kind: str = "white"
    input_variance_range: tuple = (0.8, 1.2)
    noise_variance_range: tuple = (0.18, 0.22)
    seed: int | None = None


@dataclass(frozen=True)
class AlgorithmSpec:
    variant: str = "alg1"
    step_size: float = 0.01
    eta2: float = 0.0


@dataclass(frozen=True)
class DisturbanceConfig:
    dead_tap: tuple | None = None
    combination_noise_mean: float = 0.0
    combination_noise_stddev: float = 0.0

    def to_spec(self):
        return DisturbanceSpec(
            dead_tap=tuple(self.dead_tap) if self.dead_tap is not None else None,
            combination_noise_mean=self.combination_noise_mean,
            combination_noise_stddev=self.combination_noise_stddev,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "custom"
    algorithm: AlgorithmSpec = field(default_factory=AlgorithmSpec)
    n_runs: int = 100
    n_iterations: int = DEFAULT_ITERATIONS
    master_seed: int = 0
    outputs: tuple = ()
    label: str = ""
    network: NetworkSpec = field(default_factory=NetworkSpec)
    subspace: SubspaceSpec = field(default_factory=SubspaceSpec)
    tasks: TaskSpec = field(default_factory=TaskSpec)
    environment: EnvironmentSpec = field(default_factory=EnvironmentSpec)
    disturbance: DisturbanceConfig | None = None
    g2_form: str = "displayed"
    localization: dict | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"Unknown scenario {self.scenario!r}; expected one of {list(SCENARIOS)}.")
        if self.n_runs < 1:
            raise ConfigError(f"n_runs must be at least 1, got {self.n_runs}.")
        if self.n_iterations < 1:
            raise ConfigError(f"n_iterations must be at least 1, got {self.n_iterations}.")
        if self.algorithm.variant not in VARIANTS:
            raise ConfigError(f"Unknown variant {self.algorithm.variant!r}; expected one of {list(VARIANTS)}.")

    def with_overrides(self, **changes):
        """Copy with top-level fields replaced, ignoring ``None`` values."""
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


_SECTIONS = {
    "algorithm": AlgorithmSpec,
    "network": NetworkSpec,
    "subspace": SubspaceSpec,
    "tasks": TaskSpec,
    "environment": EnvironmentSpec,
    "disturbance": DisturbanceConfig,
}
_TUPLE_FIELDS = {"edges", "angles", "input_variance_range", "noise_variance_range", "dead_tap", "outputs"}


def _freeze(name, value):
    if name in _TUPLE_FIELDS and value is not None:
        if name == "edges":
            try:
                return tuple(tuple(int(node) for node in edge) for edge in value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"Network edges must be lists of node indices: {exc}") from exc
        return tuple(value)
    return value


def _section_from_dict(name, cls, data):
    if not isinstance(data, dict):
        raise ConfigError(f"Section {name!r} must be an object.")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in section {name!r}: {unknown}.")
    return cls(**{key: _freeze(key, value) for key, value in data.items()})


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("An experiment config must be a JSON object.")
    data = dict(data)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"Unsupported schema_version {version}; this build reads version {SCHEMA_VERSION}.")

    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown top-level config keys: {unknown}.")

    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = None if value is None else _section_from_dict(key, _SECTIONS[key], value)
        else:
            kwargs[key] = _freeze(key, value)
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"Invalid experiment config: {exc}") from exc


def _plain(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, tuple | list):
        return [_plain(item) for item in value]
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, np.generic):
        return value.item()
    return value


def config_to_dict(config, resolved=True):
    """JSON-ready dict; with ``resolved`` the derived seeds are written out explicitly."""
    if resolved:
        config = resolve_seeds(config)
    data = {"schema_version": SCHEMA_VERSION}
    data.update(_plain(config))
    return data


def config_digest(config):
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path, default_master_seed=None):
    """Parse a config file; ``default_master_seed`` fills a missing master_seed."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"Config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc
    if isinstance(data, dict) and default_master_seed is not None:
        data.setdefault("master_seed", int(default_master_seed))
    return config_from_dict(data)


def save_config(config, path):
    """Atomically write the resolved config echo."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        json.dump(config_to_dict(config), handle, indent=2, sort_keys=True)
        handle.write("\n")
    os.replace(tmp, str(path))
    return path


# ── Resolution ───────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class ResolvedExperiment:
    config: ExperimentConfig
    topology: object
    combination: object
    pair: object
    tasks: object
    environments: list
    algorithm: AlgorithmConfig
    disturbance: DisturbanceSpec | None

    @property
    def w_opt(self):
        return stacked_optima(self.environments)

    @property
    def dead_tap(self):
        return self.disturbance.dead_tap if self.disturbance is not None else None


def resolve_seeds(config):
    network = config.network
    if network.kind == "geometric" and network.seed is None:
        network = dataclasses.replace(network, seed=derive_seed(config.master_seed, SEED_TAG_NETWORK))
    tasks = config.tasks
    if tasks.seed is None:
        tasks = dataclasses.replace(tasks, seed=derive_seed(config.master_seed, SEED_TAG_TASKS))
    environment = config.environment
    if environment.seed is None:
        environment = dataclasses.replace(environment, seed=derive_seed(config.master_seed, SEED_TAG_ENVIRONMENT))
    localization = config.localization
    if config.scenario == "localization" or localization is not None:
        localization = dict(localization or {})
        if localization.get("seed") is None:
            localization["seed"] = derive_seed(config.master_seed, SEED_TAG_LOCALIZATION)
    return dataclasses.replace(
        config, network=network, tasks=tasks, environment=environment, localization=localization
    )


def build_network(spec):
    if spec.kind == "fixture":
        topology = twelve_agent_topology() if spec.path is None else load_topology(spec.path)
    elif spec.kind == "edges":
        topology = build_topology(spec.n_agents, spec.edges)
    elif spec.kind == "geometric":
        topology, _ = random_geometric_topology(spec.n_agents, spec.radius, spec.seed)
    else:
        raise ConfigError(f"Unknown network kind {spec.kind!r}; expected fixture, edges or geometric.")
    return topology, combination_for(spec.combination, topology)


def build_subspace(spec):
    if spec.kind == "standard_basis":
        return standard_basis_subspace(spec.dim, spec.rank)
    if spec.kind == "ula":
        return ula_vandermonde_subspace(spec.dim, list(spec.angles), spec.spacing_ratio)
    if spec.kind == "matrix":
        if spec.matrix is None:
            raise ConfigError("Subspace kind 'matrix' needs a 'matrix' literal.")
        return matrix_subspace(spec.matrix)
    if spec.kind == "empty":
        return make_subspace_pair(np.zeros((spec.dim, 0), dtype=complex))
    raise ConfigError(f"Unknown subspace kind {spec.kind!r}; expected standard_basis, ula, matrix or empty.")


def resolve(config):
    """Build topology, subspace, tasks, environments and the strategy for a config."""
    config = resolve_seeds(config)
    try:
        topology, combination = build_network(config.network)
        pair = build_subspace(config.subspace)
        tasks = sample_tasks(
            pair,
            topology.n_agents,
            config.tasks.u_stddev,
            config.tasks.xi_stddev,
            config.tasks.nu_stddev,
            config.tasks.seed,
        )
        environments = sample_environments(
            topology,
            tasks,
            input_variance_range=config.environment.input_variance_range,
            noise_variance_range=config.environment.noise_variance_range,
            covariance_kind=config.environment.covariance_kind,
            seed=config.environment.seed,
        )
        algorithm = AlgorithmConfig(
            variant=config.algorithm.variant,
            step_size=config.algorithm.step_size,
            eta2=config.algorithm.eta2,
            combination=combination,
            pair=pair,
        )
        disturbance = config.disturbance.to_spec() if config.disturbance is not None else None
        if disturbance is not None:
            disturbance.validate(topology.n_agents, pair.dim)
    except DiffusionError as exc:
        raise ConfigError(f"Config {config.label or config.scenario!r} does not resolve: {exc}") from exc

    return ResolvedExperiment(
        config=config,
        topology=topology,
        combination=combination,
        pair=pair,
        tasks=tasks,
        environments=environments,
        algorithm=algorithm,
        disturbance=disturbance,
    )


# ── Presets ──────────────────────────────────────────────────────────


def _variant_for(algorithm, s_choice):
    if algorithm == "alg1":
        if s_choice not in ("s_theta", "identity"):
            raise ConfigError(f"s_choice must be 's_theta' or 'identity', got {s_choice!r}.")
        return "alg1" if s_choice == "s_theta" else "alg1_identity_s"
    if algorithm in VARIANTS:
        return algorithm
    raise ConfigError(f"Unknown algorithm {algorithm!r}.")


def _subspace_spec(subspace):
    if subspace == "theta1":
        return SubspaceSpec(kind="standard_basis", dim=5, rank=3)
    if subspace == "theta2":
        return SubspaceSpec(kind="ula", dim=5, rank=3, angles=THETA2_ANGLES, spacing_ratio=THETA2_SPACING)
    raise ConfigError(f"Unknown subspace preset {subspace!r}; expected 'theta1' or 'theta2'.")


def validation_setting(
    setting,
    input_kind="white",
    subspace="theta1",
    mu=0.01,
    eta2=None,
    s_choice="s_theta",
    algorithm="alg1",
    n_runs=100,
    n_iterations=None,
    master_seed=0,
    xi_stddev=1.0,
):
    """The 12-agent validation experiments.

    Setting 1 draws tasks exactly from the latent model, setting 2 perturbs the
    shared part by ν ~ 𝒩(0, 0.01), setting 3 is the weight-drift experiment (a
    dead fifth tap at agent 0 and a biased combination-step disturbance). When
    ``n_iterations`` is omitted it is chosen from the predicted learning curve.
    """
    if setting not in (1, 2, 3):
        raise ConfigError(f"Validation setting must be 1, 2 or 3, got {setting!r}.")
    if input_kind not in ("white", "correlated"):
        raise ConfigError(f"input_kind must be 'white' or 'correlated', got {input_kind!r}.")

    variant = _variant_for(algorithm, s_choice)
    disturbance = None
    nu_stddev = 0.0
    if setting == 2:
        nu_stddev = 0.1
    if setting == 3:
        if subspace != "theta1" or input_kind != "correlated":
            raise ConfigError("The drift setting requires subspace 'theta1' with correlated inputs.")
        disturbance = DisturbanceConfig(dead_tap=(0, 4), combination_noise_mean=1e-4, combination_noise_stddev=1e-4)
        if eta2 is None and variant in ("alg2", "noncoop_leaky"):
            eta2 = 0.1

    config = ExperimentConfig(
        scenario={1: "validation1", 2: "validation2", 3: "drift"}[setting],
        label=f"setting{setting}-{subspace}-{input_kind}-{variant}-mu{mu}",
        algorithm=AlgorithmSpec(variant=variant, step_size=mu, eta2=0.0 if eta2 is None else float(eta2)),
        n_runs=n_runs,
        n_iterations=n_iterations or DEFAULT_ITERATIONS,
        master_seed=master_seed,
        network=NetworkSpec(kind="fixture", combination="uniform"),
        subspace=_subspace_spec(subspace),
        tasks=TaskSpec(u_stddev=1.0, xi_stddev=xi_stddev, nu_stddev=nu_stddev),
        environment=EnvironmentSpec(covariance_kind=input_kind),
        disturbance=disturbance,
    )

    if n_iterations is None:
        if setting == 3:
            config = dataclasses.replace(config, n_iterations=DRIFT_ITERATIONS, meta={"iterations_rule": "drift"})
        else:
            config = with_settled_iterations(config)
    return config


def with_settled_iterations(config, tolerance_db=0.05):
    """Pick n_iterations so the last 10% of the predicted curve is within ``tolerance_db`` of its limit."""
    from ..theory import build_model, settle_iterations

    resolved = resolve(config)
    if resolved.algorithm.variant not in ("alg1", "alg1_identity_s", "alg2"):
        return dataclasses.replace(config, meta={**config.meta, "iterations_rule": "default"})
    model = build_model(
        resolved.algorithm.variant,
        resolved.combination,
        resolved.pair,
        resolved.environments,
        resolved.algorithm.step_size,
        resolved.algorithm.eta2,
        g2_form=config.g2_form,
    )
    settled = settle_iterations(model, resolved.w_opt.reshape(-1), tolerance_db=tolerance_db)
    n_iterations = int(math.ceil(max(settled, 1) / 0.9 / ITERATION_ROUNDING) * ITERATION_ROUNDING)
    logger.info("Predicted curve settles at n=%s; running %s iterations.", settled, n_iterations)
    return dataclasses.replace(
        config,
        n_iterations=n_iterations,
        meta={**config.meta, "iterations_rule": "settled", "settled_at": settled},
    )


def small_xi_setting(eta2, mu=0.01, algorithm="alg2", n_runs=100, n_iterations=None, master_seed=0):
    """Correlated inputs with small local components (ξ ~ 𝒩(0, 0.01)), where leakage pays off."""
    config = validation_setting(
        1,
        input_kind="correlated",
        mu=mu,
        eta2=eta2,
        s_choice="identity",
        algorithm=algorithm,
        n_runs=n_runs,
        n_iterations=n_iterations,
        master_seed=master_seed,
        xi_stddev=0.1,
    )
    return dataclasses.replace(config, label=f"small-xi-{config.algorithm.variant}-eta{eta2}")


def leaky_validation_grid(n_runs=100, master_seed=0):
    """Leaky-strategy step-size / leakage pairs for the mismatched-task setting."""
    grid = [("white", 0.02, 0.01), ("correlated", 0.01, 0.01), ("correlated", 0.01, 0.02), ("correlated", 0.02, 0.01)]
    return [
        validation_setting(
            2, input_kind=kind, mu=mu, eta2=eta2, algorithm="alg2", n_runs=n_runs, master_seed=master_seed
        )
        for kind, mu, eta2 in grid
    ]
