"""Collinear-target localization: geometry, measurement model and cooperative gain."""

import numpy as np
import pytest

from multitask_diffusion.errors import ConfigError, DataModelError
from multitask_diffusion.experiments import (
    LocalizationNoise,
    build_localization,
    localization_from_config,
    localization_measurement,
    localization_measurements,
    mean_line_distance,
    run_localization,
)
from multitask_diffusion.experiments.localization import LocalizationSampler, rotation_matrix
from multitask_diffusion.experiments.settings import ExperimentConfig


@pytest.fixture(scope="module")
def scenario():
    return build_localization(n_agents=30, seed=5)


# ── Geometry ───────────────────────────────────────────────────────


def test_rotation_is_orthogonal():
    rotation = rotation_matrix(0.3, -1.1, 2.0)

    assert np.allclose(rotation.T @ rotation, np.eye(3), atol=1e-12)
    assert np.linalg.det(rotation) == pytest.approx(1.0)


def test_targets_are_collinear(scenario):
    offsets = scenario.targets - scenario.targets[0]

    singular_values = np.linalg.svd(offsets, compute_uv=False)
    assert singular_values[1] < 1e-10
    assert np.allclose(offsets[-1], 9.0 * scenario.line_direction)


def test_first_and_last_targets_are_nine_apart(scenario):
    assert np.linalg.norm(scenario.targets[6] - scenario.targets[0]) == pytest.approx(9.0)


def test_first_target_lies_in_the_shared_plane(scenario):
    first = scenario.targets[0]

    assert np.allclose(scenario.pair.p_theta.real @ first, first, atol=1e-12)
    assert np.allclose(first, scenario.line_point)


def test_targets_share_their_plane_component(scenario):
    shared = scenario.targets @ scenario.pair.p_theta.real.T

    assert np.allclose(shared, shared[0], atol=1e-12)


def test_directions_are_unit_and_orthogonal_rows_complete_them(scenario):
    assert np.allclose(np.linalg.norm(scenario.directions, axis=1), 1.0)
    for direction, rows in zip(scenario.directions, scenario.orthogonals, strict=True):
        basis = np.vstack([direction, rows])
        assert np.allclose(basis @ basis.T, np.eye(3), atol=1e-12)


def test_agents_surround_the_targets(scenario):
    low = scenario.targets.min(axis=0) - 2.0
    high = scenario.targets.max(axis=0) + 2.0

    assert scenario.n_agents == 30
    assert np.all(scenario.agent_positions >= low)
    assert np.all(scenario.agent_positions <= high)
    assert scenario.topology.n_agents == 30


def test_scenario_is_seeded():
    first = build_localization(n_agents=10, seed=3)
    second = build_localization(n_agents=10, seed=3)

    assert np.array_equal(first.agent_positions, second.agent_positions)
    assert np.array_equal(first.assignment, second.assignment)


def test_colocated_agent_rejected():
    target = build_localization(n_agents=1, seed=0).targets[2]
    positions = np.array([target, target + 1.0])

    with pytest.raises(DataModelError, match=r"Agents \[0\] sit on their target"):
        build_localization(positions=positions, assignment=[2, 2])


@pytest.mark.parametrize(
    ("kwargs", "message"),
    [
        ({"rotation_angles": (0.1, 0.2)}, "three finite rotation angles"),
        ({"line_anchor": (1.0, 2.0, 3.0)}, "two entries"),
        ({"epsilons": ()}, "at least one target"),
        ({"n_agents": 2, "assignment": [0, 7]}, "Assignment must map"),
    ],
)
def test_invalid_scenarios_rejected(kwargs, message):
    with pytest.raises(ConfigError, match=message):
        build_localization(**kwargs)


def test_negative_noise_rejected():
    with pytest.raises(ConfigError, match="nonnegative"):
        LocalizationNoise(z=-0.1)


# ── Measurements ───────────────────────────────────────────────────


def test_regressor_mean_is_the_direction(scenario):
    rng = np.random.default_rng(0)

    _, x = localization_measurements(scenario, 4, rng, size=100_000)

    direction = scenario.directions[4]
    assert np.linalg.norm(x.mean(axis=0) - direction) < 0.02 * np.linalg.norm(direction)


def test_noiseless_measurement_is_exact(scenario):
    quiet = build_localization(n_agents=5, seed=1, noise=LocalizationNoise(alpha1=0.2, alpha2=0.2, beta=0.0, z=0.0))

    d, x = localization_measurement(quiet, 3, np.random.default_rng(2))

    assert isinstance(d, float)
    assert x.shape == (3,)
    assert d == pytest.approx(x @ quiet.agent_optima[3])


def test_noise_free_measurement_is_range_plus_offset():
    silent = build_localization(n_agents=5, seed=1, noise=LocalizationNoise(alpha1=0.0, alpha2=0.0, beta=0.0, z=0.0))

    for agent in range(silent.n_agents):
        d, x = localization_measurement(silent, agent, np.random.default_rng(agent))
        position = silent.agent_positions[agent]
        distance = np.linalg.norm(silent.agent_optima[agent] - position)

        assert np.allclose(x, silent.directions[agent])
        assert d == pytest.approx(distance + x @ position)


def test_sampler_streams_are_reproducible(scenario):
    first = LocalizationSampler(scenario, master_seed=4, run_indices=[0, 1], chunk_size=16)
    second = LocalizationSampler(scenario, master_seed=4, run_indices=[1], chunk_size=16)

    for _ in range(40):
        d_first, x_first = first.draw()
        d_second, x_second = second.draw()
        assert np.array_equal(d_first[1], d_second[0])
        assert np.array_equal(x_first[1], x_second[0])
    assert np.all(x_first.imag == 0)


# ── Estimation ─────────────────────────────────────────────────────


@pytest.mark.parametrize("algorithm", ["alg1", "noncoop_lms"])
def test_noiseless_runs_recover_the_targets(algorithm):
    noise = LocalizationNoise(alpha1=0.5, alpha2=0.5, beta=0.001, z=0.0)
    quiet = build_localization(n_agents=20, seed=2, noise=noise)

    result = run_localization(quiet, algorithm, mu=0.1, n_iterations=3000)

    assert result.curve.values[-1] < 1e-8 * result.curve.values[0]
    assert np.allclose(result.estimates, quiet.agent_optima, atol=1e-4)


def test_cooperation_beats_isolated_estimation():
    scenario = build_localization(seed=0)

    cooperative = run_localization(scenario, "alg1")
    isolated = run_localization(scenario, "noncoop_lms")

    assert cooperative.curve.tail_average_db() <= isolated.curve.tail_average_db() - 3.0
    assert mean_line_distance(scenario, cooperative.estimates) < mean_line_distance(scenario, isolated.estimates)


def test_unknown_localization_strategy_rejected(scenario):
    with pytest.raises(ConfigError, match="Localization runs"):
        run_localization(scenario, "alg2")


def test_line_distance_is_zero_on_the_line(scenario):
    assert mean_line_distance(scenario, scenario.targets) == pytest.approx(0.0, abs=1e-12)


# ── Config section ─────────────────────────────────────────────────


def test_scenario_from_config_section():
    config = ExperimentConfig(
        scenario="localization",
        localization={"n_agents": 12, "seed": 8, "epsilons": [0.0, 2.0], "noise": {"z": 0.1}},
    )

    scenario = localization_from_config(config)

    assert scenario.n_agents == 12
    assert scenario.n_targets == 2
    assert scenario.noise.z == 0.1
    assert scenario.noise.alpha1 == 0.1


def test_unknown_localization_key_rejected():
    config = ExperimentConfig(scenario="localization", localization={"agents": 12})

    with pytest.raises(ConfigError, match="Unknown keys in section 'localization'"):
        localization_from_config(config)
