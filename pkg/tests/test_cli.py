"""Command-line surface: outputs, reproducibility and exit codes."""

import csv
import io
import json

import pytest

from multitask_diffusion.cli import _json_ready, main
from multitask_diffusion.errors import EXIT_INVALID_INPUT, EXIT_OK, EXIT_UNSTABLE
from multitask_diffusion.experiments import save_config
from multitask_diffusion.experiments.settings import ExperimentConfig
from tests.conftest import _make_config


def _write_config(tmp_path, name="config.json", **kwargs):
    path = tmp_path / "configs" / name
    save_config(_make_config(**kwargs), path)
    return path


def _run(*argv):
    stdout, stderr = io.StringIO(), io.StringIO()
    code = main(["--env", "testing", *[str(arg) for arg in argv]], stdout=stdout, stderr=stderr)
    return code, stdout.getvalue(), stderr.getvalue()


def _rows(path):
    with path.open(encoding="utf-8") as handle:
        return list(csv.reader(handle))


# ── simulate ───────────────────────────────────────────────────────


def test_simulate_writes_curve_environments_and_echo(tmp_path):
    config = _write_config(tmp_path, n_runs=3, n_iterations=40)
    out = tmp_path / "out"

    code, stdout, _ = _run("simulate", config, "--out", out)

    assert code == EXIT_OK
    summary = json.loads(stdout)
    assert summary["command"] == "simulate"
    assert summary["n_runs"] == 3
    assert summary["n_diverged"] == 0
    curve = _rows(out / "simulated_msd.csv")
    assert curve[0] == ["iteration", "msd_db"]
    assert len(curve) == 42
    assert _rows(out / "environments.csv")[0] == ["agent", "input_variance", "noise_variance"]
    assert json.loads((out / "config.json").read_text(encoding="utf-8"))["tasks"]["seed"] is not None


def test_simulate_reruns_are_byte_identical(tmp_path):
    config = _write_config(tmp_path, n_runs=3, n_iterations=40)

    _run("simulate", config, "--out", tmp_path / "first")
    _run("simulate", config, "--out", tmp_path / "second")

    for name in ("simulated_msd.csv", "environments.csv", "config.json"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_command_line_overrides_reach_the_echo(tmp_path):
    config = _write_config(tmp_path, n_runs=3, n_iterations=40)
    out = tmp_path / "out"

    code, _, _ = _run("simulate", config, "--out", out, "--seed", 17, "--runs", 2, "--iters", 10)

    echo = json.loads((out / "config.json").read_text(encoding="utf-8"))
    assert code == EXIT_OK
    assert (echo["master_seed"], echo["n_runs"], echo["n_iterations"]) == (17, 2, 10)
    assert len(_rows(out / "simulated_msd.csv")) == 12


def test_simulate_reports_divergence(tmp_path):
    config = _write_config(tmp_path, mu=20.0, n_runs=2, n_iterations=60)

    code, stdout, stderr = _run("simulate", config, "--out", tmp_path / "out")

    assert code == EXIT_UNSTABLE
    assert stdout == ""
    assert json.loads(stderr)["error"] == "SimulationError"


def test_missing_config_is_invalid_input(tmp_path):
    code, _, stderr = _run("simulate", tmp_path / "absent.json", "--out", tmp_path / "out")

    assert code == EXIT_INVALID_INPUT
    payload = json.loads(stderr)
    assert payload["error"] == "ConfigError"
    assert "not found" in payload["message"]


def test_unknown_config_key_is_invalid_input(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"schema_version": 1, "runs": 5}), encoding="utf-8")

    code, _, stderr = _run("simulate", path, "--out", tmp_path / "out")

    assert code == EXIT_INVALID_INPUT
    assert "Unknown top-level config keys" in json.loads(stderr)["message"]


# ── predict ────────────────────────────────────────────────────────


def test_predict_writes_curve_and_steady_state(tmp_path):
    config = _write_config(tmp_path, n_iterations=300)
    out = tmp_path / "out"

    code, stdout, _ = _run("predict", config, "--out", out)

    assert code == EXIT_OK
    assert len(_rows(out / "predicted_msd.csv")) == 302
    quantities = dict(_rows(out / "steady_state.csv")[1:])
    assert float(quantities["rho_b"]) < 1.0
    assert float(quantities["steady_state_msd_db"]) == pytest.approx(json.loads(stdout)["steady_state_msd_db"])


def test_predict_unstable_step_exits_with_three(tmp_path):
    config = _write_config(tmp_path, mu=20.0)

    code, _, stderr = _run("predict", config, "--out", tmp_path / "out")

    assert code == EXIT_UNSTABLE
    assert json.loads(stderr)["error"] == "StabilityError"


def test_predict_has_no_model_for_isolated_lms(tmp_path):
    config = _write_config(tmp_path, variant="noncoop_lms")

    code, _, stderr = _run("predict", config, "--out", tmp_path / "out")

    assert code == EXIT_INVALID_INPUT
    assert json.loads(stderr)["error"] == "AlgorithmError"


# ── compare ────────────────────────────────────────────────────────


def test_compare_aligns_labelled_curves(tmp_path):
    first = _write_config(tmp_path, "a.json", label="slow", mu=0.01, n_runs=2, n_iterations=30)
    second = _write_config(tmp_path, "b.json", label="fast", mu=0.05, n_runs=2, n_iterations=30)
    out = tmp_path / "out"

    code, stdout, _ = _run("compare", first, second, "--out", out)

    assert code == EXIT_OK
    assert json.loads(stdout)["labels"] == ["slow", "fast"]
    assert _rows(out / "comparison.csv")[0] == ["iteration", "slow", "fast"]
    assert [row[0] for row in _rows(out / "comparison_summary.csv")[1:]] == ["slow", "fast"]
    assert (out / "config_0.json").exists()
    assert (out / "config_1.json").exists()


def test_compare_rejects_mixed_lengths(tmp_path):
    first = _write_config(tmp_path, "a.json", label="a", n_iterations=30)
    second = _write_config(tmp_path, "b.json", label="b", n_iterations=40)

    code, _, stderr = _run("compare", first, second, "--out", tmp_path / "out")

    assert code == EXIT_INVALID_INPUT
    assert "different n_iterations" in json.loads(stderr)["message"]


# ── certify ────────────────────────────────────────────────────────


def test_certify_reports_certificates_and_stability(tmp_path):
    config = _write_config(tmp_path, variant="alg2", eta2=0.1)
    out = tmp_path / "out"

    code, stdout, _ = _run("certify", config, "--out", out)

    assert code == EXIT_OK
    rows = dict(_rows(out / "certificate.csv")[1:])
    assert rows["subspace_certificate_positive_definite"] == "true"
    assert rows["leaky_certificate_positive_definite"] == "true"
    assert float(rows["step_size_bound_exact"]) >= float(rows["step_size_bound"])
    assert json.loads(stdout)["mean_stable"] is True


# ── localize ───────────────────────────────────────────────────────


def test_localize_runs_both_strategies(tmp_path):
    path = tmp_path / "localization.json"
    config = ExperimentConfig(
        scenario="localization",
        n_runs=1,
        n_iterations=50,
        localization={"n_agents": 10, "epsilons": [0.0, 3.0]},
    )
    save_config(config, path)
    out = tmp_path / "out"

    code, stdout, _ = _run("localize", path, "--out", out)

    assert code == EXIT_OK
    assert set(json.loads(stdout)["tail_msd_db"]) == {"alg1", "noncoop_lms"}
    assert _rows(out / "localization_msd.csv")[0] == ["iteration", "alg1", "noncoop_lms"]
    assert len(_rows(out / "localization_estimates.csv")) == 1 + 2 * 10
    assert len(_rows(out / "localization_targets.csv")) == 3


def test_localize_needs_a_localization_config(tmp_path):
    config = _write_config(tmp_path)

    code, _, stderr = _run("localize", config, "--out", tmp_path / "out")

    assert code == EXIT_INVALID_INPUT
    assert "needs a localization config" in json.loads(stderr)["message"]


# ── Summary encoding ───────────────────────────────────────────────


def test_non_finite_summary_values_become_null():
    summary = {"steady_state_msd_db": float("-inf"), "tail_msd_db": {"a": float("nan"), "b": -12.5}, "files": ["x"]}

    encoded = json.dumps(_json_ready(summary), allow_nan=False)

    assert json.loads(encoded) == {"steady_state_msd_db": None, "tail_msd_db": {"a": None, "b": -12.5}, "files": ["x"]}
