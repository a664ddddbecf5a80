"""Runtime configuration and error-boundary tests."""

import io
import json
import logging

import pytest

from multitask_diffusion import create_runtime
from multitask_diffusion.cli import main
from multitask_diffusion.config import ProductionConfig, TestingConfig
from multitask_diffusion.errors import (
    EXIT_FAILURE,
    EXIT_INVALID_INPUT,
    EXIT_OK,
    EXIT_UNSTABLE,
    ConfigError,
    PredictorUnavailable,
    SimulationError,
    StabilityError,
    TopologyError,
    error_payload,
    exit_code_for,
)
from multitask_diffusion.experiments import config_to_dict, load_config, save_config
from multitask_diffusion.experiments.settings import SEED_TAG_TASKS, derive_seed
from tests.conftest import _make_config


class _DummyRuntime:
    logger = logging.getLogger("tests.dummy")


def test_production_rejects_non_integer_workers(monkeypatch):
    monkeypatch.setenv("MTD_WORKERS", "many")
    monkeypatch.delenv("MTD_RUN_BLOCK_SIZE", raising=False)

    with pytest.raises(RuntimeError, match="MTD_WORKERS must be an integer"):
        ProductionConfig.init_app(_DummyRuntime())


def test_production_rejects_zero_block_size(monkeypatch):
    monkeypatch.delenv("MTD_WORKERS", raising=False)
    monkeypatch.setenv("MTD_RUN_BLOCK_SIZE", "0")

    with pytest.raises(RuntimeError, match="MTD_RUN_BLOCK_SIZE must be at least 1"):
        ProductionConfig.init_app(_DummyRuntime())


def test_production_rejects_output_dir_that_is_a_file(monkeypatch, tmp_path):
    target = tmp_path / "results"
    target.write_text("", encoding="utf-8")
    monkeypatch.delenv("MTD_WORKERS", raising=False)
    monkeypatch.delenv("MTD_RUN_BLOCK_SIZE", raising=False)
    monkeypatch.setenv("MTD_OUTPUT_DIR", str(target))

    with pytest.raises(RuntimeError, match="points at a file"):
        ProductionConfig.init_app(_DummyRuntime())


def test_production_accepts_valid_settings(monkeypatch, tmp_path):
    monkeypatch.setenv("MTD_WORKERS", "4")
    monkeypatch.setenv("MTD_RUN_BLOCK_SIZE", "10")
    monkeypatch.setenv("MTD_OUTPUT_DIR", str(tmp_path / "results"))

    # Should not raise.
    ProductionConfig.init_app(_DummyRuntime())


def test_testing_config_stays_serial_and_off_disk():
    assert TestingConfig.WORKERS == 1
    assert TestingConfig.LOG_TO_FILE is False


def test_runtime_defaults(runtime):
    assert runtime.name == "testing"
    assert runtime.config["RUN_BLOCK_SIZE"] >= 1
    assert runtime.config["DIVERGENCE_THRESHOLD"] == 1e12
    assert runtime.config["PREDICTOR_MAX_DIM"] == 256
    assert not runtime.debug


def test_runtime_name_from_environment(monkeypatch):
    monkeypatch.setenv("MTD_ENV", "testing")

    assert create_runtime().name == "testing"


def test_repeated_runtimes_do_not_stack_log_handlers():
    create_runtime("testing")
    runtime = create_runtime("testing")

    managed = [handler for handler in runtime.logger.handlers if getattr(handler, "_mtd_managed", False)]
    assert len(managed) == 1


# ── Error boundary ─────────────────────────────────────────────────


@pytest.mark.parametrize(
    ("exc", "code"),
    [
        (ConfigError("bad"), EXIT_INVALID_INPUT),
        (TopologyError("bad"), EXIT_INVALID_INPUT),
        (PredictorUnavailable("too big"), EXIT_INVALID_INPUT),
        (StabilityError("unstable"), EXIT_UNSTABLE),
        (SimulationError("diverged"), EXIT_UNSTABLE),
        (KeyError("surprise"), EXIT_FAILURE),
    ],
)
def test_exit_codes(exc, code):
    assert exit_code_for(exc) == code


def test_handle_error_writes_one_json_line(runtime):
    stream = io.StringIO()

    code = runtime.handle_error(ConfigError("n_runs must be at least 1, got 0."), stream=stream)

    assert code == EXIT_INVALID_INPUT
    lines = stream.getvalue().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0]) == error_payload(ConfigError("n_runs must be at least 1, got 0."))
    assert json.loads(lines[0])["error"] == "ConfigError"


# ── Default master seed ────────────────────────────────────────────


def _write_unseeded_config(tmp_path, **kwargs):
    data = config_to_dict(_make_config(**kwargs), resolved=False)
    data.pop("master_seed")
    path = tmp_path / "unseeded.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def _certify_echo(tmp_path, config_path):
    out = tmp_path / "out"
    code = main(["--env", "testing", "certify", str(config_path), "--out", str(out)], stdout=io.StringIO())
    assert code == EXIT_OK
    return json.loads((out / "config.json").read_text(encoding="utf-8"))


def test_missing_master_seed_falls_back_to_runtime_default(monkeypatch, tmp_path):
    monkeypatch.setattr(TestingConfig, "DEFAULT_MASTER_SEED", 41)

    echo = _certify_echo(tmp_path, _write_unseeded_config(tmp_path))

    assert echo["master_seed"] == 41
    assert echo["tasks"]["seed"] == derive_seed(41, SEED_TAG_TASKS)


def test_config_master_seed_wins_over_runtime_default(monkeypatch, tmp_path):
    monkeypatch.setattr(TestingConfig, "DEFAULT_MASTER_SEED", 41)
    path = tmp_path / "seeded.json"
    save_config(_make_config(master_seed=8), path)

    assert _certify_echo(tmp_path, path)["master_seed"] == 8


def test_load_config_without_default_keeps_schema_default(tmp_path):
    assert load_config(_write_unseeded_config(tmp_path)).master_seed == 0
