"""Side-by-side MSD tables and their CSV export."""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .montecarlo import monte_carlo_msd

TAIL_FRACTION = 0.1
FLOOR_MARGIN_DB = 3.0


@dataclass(frozen=True)
class CurveSummary:
    label: str
    tail_msd_db: float
    iterations_to_floor: int
    n_runs: int | None
    n_diverged: int | None


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    labels: tuple
    values_db: np.ndarray
    summaries: tuple

    @property
    def n_iterations(self):
        return self.values_db.shape[0] - 1

    def column(self, label):
        return self.values_db[:, self.labels.index(label)]


def iterations_to_floor(curve, margin_db=FLOOR_MARGIN_DB, fraction=TAIL_FRACTION):
    """First iteration at which the curve is within ``margin_db`` of its tail average."""
    threshold = curve.tail_average_db(fraction) + margin_db
    below = np.flatnonzero(curve.values_db <= threshold)
    return int(below[0]) if below.size else curve.n_iterations


def compare_curves(curves, labels=None):
    curves = list(curves)
    if not curves:
        raise ConfigError("Nothing to compare: no curves given.")
    if labels is None:
        labels = [curve.meta.get("label") or f"curve{i}" for i, curve in enumerate(curves)]
    labels = tuple(labels)
    if len(labels) != len(curves):
        raise ConfigError(f"{len(labels)} labels for {len(curves)} curves.")
    if len(set(labels)) != len(labels):
        raise ConfigError(f"Curve labels must be unique, got {list(labels)}.")

    lengths = {curve.values.size for curve in curves}
    if len(lengths) != 1:
        raise ConfigError(f"Curves have different lengths {sorted(lengths)}; rerun them with the same n_iterations.")

    summaries = tuple(
        CurveSummary(
            label=label,
            tail_msd_db=curve.tail_average_db(TAIL_FRACTION),
            iterations_to_floor=iterations_to_floor(curve),
            n_runs=curve.meta.get("n_runs"),
            n_diverged=curve.meta.get("n_diverged"),
        )
        for label, curve in zip(labels, curves, strict=True)
    )
    values = np.column_stack([curve.values_db for curve in curves])
    return ComparisonTable(labels=labels, values_db=values, summaries=summaries)


def compare_runs(configs, workers=1, block_size=None):
    """Monte Carlo every config and align the curves; all configs must share n_iterations."""
    configs = list(configs)
    counts = {config.n_iterations for config in configs}
    if len(counts) > 1:
        raise ConfigError(f"Configs to compare use different n_iterations {sorted(counts)}.")

    kwargs = {"workers": workers}
    if block_size is not None:
        kwargs["block_size"] = block_size
    curves = [monte_carlo_msd(config, **kwargs) for config in configs]
    labels = [config.label or f"config{i}" for i, config in enumerate(configs)]
    return compare_curves(curves, labels)


def export_comparison(table, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["iteration", *table.labels])
        for n, row in enumerate(table.values_db):
            writer.writerow([n, *(repr(float(value)) for value in row)])
    return path


def export_summary(table, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["label", "tail_msd_db", "iterations_to_floor", "n_runs", "n_diverged"])
        for summary in table.summaries:
            writer.writerow(
                [
                    summary.label,
                    repr(float(summary.tail_msd_db)),
                    summary.iterations_to_floor,
                    "" if summary.n_runs is None else summary.n_runs,
                    "" if summary.n_diverged is None else summary.n_diverged,
                ]
            )
    return path
