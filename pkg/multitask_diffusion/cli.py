"""Command-line entry point: simulate, predict, compare, localize and certify.

Every command writes CSV files plus a ``config.json`` echo of the fully
resolved experiment into the output directory, then prints a one-line JSON
summary to stdout. Failures print a JSON error object to stderr and exit with
2 (invalid input), 3 (unstable or diverged) or 1 (anything else).
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import create_runtime
from .config import config_by_name
from .datamodel import environment_table
from .errors import EXIT_OK, ConfigError
from .experiments import (
    compare_runs,
    export_comparison,
    export_summary,
    load_config,
    localization_from_config,
    mean_line_distance,
    monte_carlo_msd,
    resolve,
    run_localization,
    save_config,
)
from .experiments.localization import LOCALIZATION_VARIANTS
from .experiments.settings import resolve_seeds
from .subspace import leaky_certificate, subspace_certificate
from .theory import (
    build_model,
    export_curve,
    stability_report,
    steady_state_msd,
    step_size_bound,
    step_size_bound_exact,
    transient_msd,
)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Master seed (overrides the config).")
    common.add_argument("--runs", type=int, default=None, help="Number of Monte Carlo runs.")
    common.add_argument("--iters", type=int, default=None, help="Number of iterations per run.")
    common.add_argument("--out", type=Path, default=None, help="Output directory (default: MTD_OUTPUT_DIR).")
    common.add_argument("--workers", type=int, default=None, help="Worker processes (default: MTD_WORKERS).")

    parser = argparse.ArgumentParser(
        prog="multitask-diffusion",
        description="Multitask diffusion LMS over networks with a shared latent subspace.",
    )
    parser.add_argument("--env", choices=sorted(config_by_name), default=None, help="Runtime configuration.")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="Monte Carlo network MSD curve.")
    simulate.add_argument("config", type=Path)

    predict = commands.add_parser("predict", parents=[common], help="Predicted MSD curve and steady state.")
    predict.add_argument("config", type=Path)

    compare = commands.add_parser("compare", parents=[common], help="Monte Carlo several configs side by side.")
    compare.add_argument("configs", type=Path, nargs="+")

    localize = commands.add_parser("localize", parents=[common], help="Collinear-target localization scenario.")
    localize.add_argument("config", type=Path)

    certify = commands.add_parser("certify", parents=[common], help="Uniqueness certificates and stability report.")
    certify.add_argument("config", type=Path)
    return parser


# ── Helpers ──────────────────────────────────────────────────────────


def _load(path, args, runtime):
    config = load_config(path, default_master_seed=runtime.config["DEFAULT_MASTER_SEED"])
    return config.with_overrides(master_seed=args.seed, n_runs=args.runs, n_iterations=args.iters)


def _write_rows(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _json_ready(value):
    """Non-finite floats become null so summaries stay strict JSON."""
    if isinstance(value, dict):
        return {key: _json_ready(item) for key, item in value.items()}
    if isinstance(value, list | tuple):
        return [_json_ready(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _fmt(value):
    if isinstance(value, bool) or value is None:
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return value


def _require_network_scenario(config):
    if config.scenario == "localization":
        raise ConfigError("Localization configs run through the 'localize' command.")


def _model_for(config, runtime):
    resolved = resolve(config)
    model = build_model(
        resolved.algorithm.variant,
        resolved.combination,
        resolved.pair,
        resolved.environments,
        resolved.algorithm.step_size,
        resolved.algorithm.eta2,
        g2_form=config.g2_form,
        max_dim=runtime.config["PREDICTOR_MAX_DIM"],
    )
    return resolved, model


# ── Commands ─────────────────────────────────────────────────────────


def cmd_simulate(args, runtime, out_dir):
    config = _load(args.config, args, runtime)
    _require_network_scenario(config)
    curve = monte_carlo_msd(
        config,
        workers=args.workers or runtime.config["WORKERS"],
        block_size=runtime.config["RUN_BLOCK_SIZE"],
        divergence_threshold=runtime.config["DIVERGENCE_THRESHOLD"],
    )
    resolved = resolve(config)
    files = [
        export_curve(curve, out_dir / "simulated_msd.csv"),
        _write_rows(
            out_dir / "environments.csv",
            ["agent", "input_variance", "noise_variance"],
            [(k, repr(sx), repr(sz)) for k, sx, sz in environment_table(resolved.environments)],
        ),
        save_config(config, out_dir / "config.json"),
    ]
    return {
        "command": "simulate",
        "label": config.label,
        "tail_msd_db": curve.tail_average_db(),
        "n_runs": config.n_runs,
        "n_diverged": curve.meta["n_diverged"],
        "files": [str(path) for path in files],
    }


def cmd_predict(args, runtime, out_dir):
    config = _load(args.config, args, runtime)
    _require_network_scenario(config)
    resolved, model = _model_for(config, runtime)
    curve = transient_msd(model, resolved.w_opt.reshape(-1), config.n_iterations)
    steady = steady_state_msd(model)
    report = stability_report(model)
    rows = [
        ("steady_state_msd_db", repr(steady.db)),
        ("transient_tail_msd_db", repr(curve.tail_average_db())),
        ("rho_b", repr(report["rho_b"])),
        ("rho_k", repr(report["rho_k"])),
        ("g2_form", model.meta.get("g2_form") or ""),
    ]
    files = [
        export_curve(curve, out_dir / "predicted_msd.csv"),
        _write_rows(out_dir / "steady_state.csv", ["quantity", "value"], rows),
        save_config(config, out_dir / "config.json"),
    ]
    return {
        "command": "predict",
        "label": config.label,
        "steady_state_msd_db": steady.db,
        "files": [str(path) for path in files],
    }


def cmd_compare(args, runtime, out_dir):
    configs = [_load(path, args, runtime) for path in args.configs]
    for config in configs:
        _require_network_scenario(config)
    table = compare_runs(
        configs,
        workers=args.workers or runtime.config["WORKERS"],
        block_size=runtime.config["RUN_BLOCK_SIZE"],
    )
    files = [
        export_comparison(table, out_dir / "comparison.csv"),
        export_summary(table, out_dir / "comparison_summary.csv"),
    ]
    for i, config in enumerate(configs):
        files.append(save_config(config, out_dir / f"config_{i}.json"))
    return {
        "command": "compare",
        "labels": list(table.labels),
        "tail_msd_db": {summary.label: summary.tail_msd_db for summary in table.summaries},
        "files": [str(path) for path in files],
    }


def cmd_localize(args, runtime, out_dir):
    config = _load(args.config, args, runtime)
    if config.scenario != "localization":
        raise ConfigError(f"The 'localize' command needs a localization config, got scenario {config.scenario!r}.")
    scenario = localization_from_config(resolve_seeds(config))

    results = [
        run_localization(
            scenario,
            algorithm=variant,
            mu=config.algorithm.step_size,
            n_iterations=config.n_iterations,
            n_runs=config.n_runs,
            master_seed=config.master_seed,
        )
        for variant in LOCALIZATION_VARIANTS
    ]

    msd_rows = [
        [n, *(repr(float(result.curve.values_db[n])) for result in results)]
        for n in range(config.n_iterations + 1)
    ]
    estimate_rows = [
        [result.algorithm, k, int(scenario.assignment[k]), *(repr(float(c)) for c in result.estimates[k])]
        for result in results
        for k in range(scenario.n_agents)
    ]
    target_rows = [
        [q, repr(float(scenario.epsilons[q])), *(repr(float(c)) for c in scenario.targets[q])]
        for q in range(scenario.n_targets)
    ]
    files = [
        _write_rows(out_dir / "localization_msd.csv", ["iteration", *LOCALIZATION_VARIANTS], msd_rows),
        _write_rows(
            out_dir / "localization_estimates.csv",
            ["algorithm", "agent", "target", "x", "y", "z"],
            estimate_rows,
        ),
        _write_rows(out_dir / "localization_targets.csv", ["target", "epsilon", "x", "y", "z"], target_rows),
        save_config(config, out_dir / "config.json"),
    ]
    return {
        "command": "localize",
        "tail_msd_db": {result.algorithm: result.curve.tail_average_db() for result in results},
        "mean_line_distance": {result.algorithm: mean_line_distance(scenario, result.estimates) for result in results},
        "files": [str(path) for path in files],
    }


def cmd_certify(args, runtime, out_dir):
    config = _load(args.config, args, runtime)
    _require_network_scenario(config)
    resolved = resolve(config)
    covariances = [env.covariance for env in resolved.environments]
    variant = resolved.algorithm.variant
    eta2 = resolved.algorithm.eta2

    certificate = subspace_certificate(resolved.pair, covariances)
    bound = step_size_bound(variant, resolved.environments, eta2, resolved.pair)
    rows = [
        ("subspace_certificate_min_eigenvalue", certificate.min_eigenvalue),
        ("subspace_certificate_positive_definite", certificate.positive_definite),
        ("step_size", resolved.algorithm.step_size),
        ("step_size_bound", bound.value),
        ("step_size_bound_guaranteed", bound.guaranteed),
    ]
    if eta2 > 0:
        leaky = leaky_certificate(resolved.pair.theta, covariances, eta2)
        rows.append(("leaky_certificate_min_eigenvalue", leaky.min_eigenvalue))
        rows.append(("leaky_certificate_positive_definite", leaky.positive_definite))
    if variant in ("alg2", "noncoop_leaky"):
        rows.append(("step_size_bound_exact", step_size_bound_exact(resolved.environments, eta2, resolved.pair)))

    summary = {"command": "certify", "label": config.label, "caveat": bound.caveat}
    if variant in ("alg1", "alg1_identity_s", "alg2"):
        _, model = _model_for(config, runtime)
        report = stability_report(model)
        rows.extend((key, report[key]) for key in ("rho_b", "rho_k", "mean_stable", "mean_square_stable"))
        summary["mean_stable"] = report["mean_stable"]

    files = [
        _write_rows(out_dir / "certificate.csv", ["quantity", "value"], [(key, _fmt(value)) for key, value in rows]),
        save_config(config, out_dir / "config.json"),
    ]
    summary["files"] = [str(path) for path in files]
    return summary


COMMANDS = {
    "simulate": cmd_simulate,
    "predict": cmd_predict,
    "compare": cmd_compare,
    "localize": cmd_localize,
    "certify": cmd_certify,
}


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout if stdout is not None else sys.stdout
    args = build_parser().parse_args(argv)
    runtime = create_runtime(args.env)
    try:
        out_dir = Path(args.out if args.out is not None else runtime.config["OUTPUT_DIR"])
        summary = COMMANDS[args.command](args, runtime, out_dir)
    except Exception as exc:
        return runtime.handle_error(exc, stream=stderr)
    stdout.write(json.dumps(_json_ready(summary), sort_keys=True, allow_nan=False) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
