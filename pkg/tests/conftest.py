import numpy as np
import pytest

from multitask_diffusion.algorithms import AlgorithmConfig
from multitask_diffusion.datamodel import make_environment, sample_environments, sample_tasks
from multitask_diffusion.network import (
    build_topology,
    combination_for,
    metropolis_combination,
    twelve_agent_topology,
)
from multitask_diffusion.subspace import make_subspace_pair, standard_basis_subspace, ula_vandermonde_subspace


@pytest.fixture(scope="session")
def runtime():
    """Runtime configured for testing (session-scoped)."""
    from multitask_diffusion import create_runtime

    return create_runtime("testing")


@pytest.fixture(scope="session")
def twelve_agents():
    return twelve_agent_topology()


@pytest.fixture(scope="session")
def theta1():
    return standard_basis_subspace(5, 3)


@pytest.fixture(scope="session")
def theta2():
    return ula_vandermonde_subspace(5, [np.pi / 6, np.pi / 4, np.pi / 3], 0.5)


@pytest.fixture()
def ring4():
    return _make_ring(4)


def _make_ring(n_agents):
    """Cycle over ``n_agents`` nodes. Callable multiple times per test."""
    return build_topology(n_agents, [(k, (k + 1) % n_agents) for k in range(n_agents)])


def _make_environments(
    topology,
    pair,
    covariance_kind="white",
    seed=7,
    u_stddev=1.0,
    xi_stddev=1.0,
    nu_stddev=0.0,
):
    """Tasks drawn from the latent model and one environment per agent."""
    tasks = sample_tasks(pair, topology.n_agents, u_stddev, xi_stddev, nu_stddev, seed)
    return sample_environments(topology, tasks, covariance_kind=covariance_kind, seed=seed + 1)


def _make_algorithm(variant, topology, pair, mu=0.01, eta2=0.0, rule="uniform"):
    return AlgorithmConfig(
        variant=variant,
        step_size=mu,
        eta2=eta2,
        combination=combination_for(rule, topology),
        pair=pair,
    )


def _random_orthonormal_pair(rng, dim, rank):
    """Orthonormal Θ from the QR factor of a circular Gaussian matrix."""
    raw = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    q, _ = np.linalg.qr(raw)
    return make_subspace_pair(q)


def _random_pd(rng, dim, floor=0.1):
    raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return raw @ raw.conj().T / dim + floor * np.eye(dim)


def _random_model_inputs(rng, max_agents=8, max_dim=5):
    """Random connected topology, Metropolis A, orthonormal pair and PD environments."""
    n_agents = int(rng.integers(2, max_agents + 1))
    dim = int(rng.integers(1, max_dim + 1))
    rank = int(rng.integers(0, dim + 1))
    edges = [(k, k + 1) for k in range(n_agents - 1)]
    for u in range(n_agents):
        for v in range(u + 2, n_agents):
            if rng.random() < 0.3:
                edges.append((u, v))
    topology = build_topology(n_agents, edges)
    pair = _random_orthonormal_pair(rng, dim, rank) if rank else make_subspace_pair(np.zeros((dim, 0)))
    environments = [
        make_environment(_random_pd(rng, dim), float(rng.uniform(0.05, 0.3)), rng.standard_normal(dim) + 0j)
        for _ in range(n_agents)
    ]
    return topology, metropolis_combination(topology), pair, environments


def _make_config(variant="alg1", mu=0.05, eta2=0.0, n_runs=6, n_iterations=100, master_seed=3, **overrides):
    """Four-agent ring experiment, cheap enough for Monte Carlo unit tests."""
    from multitask_diffusion.experiments.settings import AlgorithmSpec, ExperimentConfig, NetworkSpec

    ring = tuple((k, (k + 1) % 4) for k in range(4))
    return ExperimentConfig(
        scenario="custom",
        label=overrides.pop("label", "ring4"),
        algorithm=AlgorithmSpec(variant=variant, step_size=mu, eta2=eta2),
        network=overrides.pop("network", NetworkSpec(kind="edges", n_agents=4, edges=ring)),
        n_runs=n_runs,
        n_iterations=n_iterations,
        master_seed=master_seed,
        **overrides,
    )
