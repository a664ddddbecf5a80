"""Iteration driver for a batch of independent runs, with divergence tracking."""

import csv
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..datamodel import SAMPLE_CHUNK_SIZE, STREAM_DISTURBANCE, NetworkSampler, agent_rng, stacked_optima
from ..errors import AlgorithmError
from .strategies import DisturbanceSpec, NetworkState, step

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e12
RECORD_MODES = ("msd-only", "weight-trajectory")


@dataclass(frozen=True, eq=False)
class BatchRecord:
    """Per-run results. ``diverged_at`` is -1 for runs that never diverged."""

    run_indices: tuple
    msd: np.ndarray
    diverged_at: np.ndarray
    weights: np.ndarray | None = None
    checkpoints: dict | None = None

    @property
    def n_diverged(self):
        return int(np.count_nonzero(self.diverged_at >= 0))


@dataclass(frozen=True, eq=False)
class SimulationRecord:
    """One run: network MSD per iteration (linear) and optionally the weight trajectory (n+1, N, L)."""

    msd: np.ndarray
    diverged_at: int | None
    weights: np.ndarray | None = None

    @property
    def diverged(self):
        return self.diverged_at is not None


class DisturbanceSampler:
    """Additive combination-step noise q, chunked per (run, agent) like the measurement streams."""

    def __init__(self, spec, master_seed, run_indices, n_agents, dim, chunk_size=SAMPLE_CHUNK_SIZE):
        self.spec = spec
        self.n_agents = n_agents
        self.dim = dim
        self.chunk_size = int(chunk_size)
        self._rngs = [
            [agent_rng(master_seed, run, k, STREAM_DISTURBANCE) for k in range(n_agents)] for run in run_indices
        ]
        self._buffer = None
        self._cursor = self.chunk_size

    def _refill(self):
        chunk = self.chunk_size
        buffer = np.empty((chunk, len(self._rngs), self.n_agents, self.dim))
        for r, rngs in enumerate(self._rngs):
            for k, rng in enumerate(rngs):
                buffer[:, r, k, :] = rng.normal(
                    self.spec.combination_noise_mean, self.spec.combination_noise_stddev, size=(chunk, self.dim)
                )
        self._buffer = buffer
        self._cursor = 0

    def draw(self):
        if self._cursor >= self.chunk_size:
            self._refill()
        i = self._cursor
        self._cursor += 1
        return self._buffer[i]


def _network_msd(w_opt, weights):
    deviation = w_opt - weights
    return np.mean(np.sum(np.abs(deviation) ** 2, axis=-1), axis=-1)


def simulate_batch(
    config,
    w_opt,
    sampler,
    n_iterations,
    run_indices,
    master_seed=0,
    disturbance=None,
    record="msd-only",
    checkpoints=(),
    divergence_threshold=DIVERGENCE_THRESHOLD,
):
    """Advance ``len(run_indices)`` independent networks for ``n_iterations`` steps.

    ``sampler.draw()`` must return (d, x) shaped (runs, N) and (runs, N, L). The
    MSD array has one column per iteration including n = 0. Diverged runs are
    frozen at zero and their MSD is NaN from the divergence iteration on.
    """
    if n_iterations < 1:
        raise AlgorithmError(f"n_iterations must be at least 1, got {n_iterations}.")
    if record not in RECORD_MODES:
        raise AlgorithmError(f"Unknown record mode {record!r}; expected one of {list(RECORD_MODES)}.")

    run_indices = tuple(int(r) for r in run_indices)
    n_runs = len(run_indices)
    w_opt = np.asarray(w_opt, dtype=complex)
    if w_opt.shape != (config.n_agents, config.dim):
        raise AlgorithmError(f"Optima have shape {w_opt.shape}, expected ({config.n_agents}, {config.dim}).")

    disturbance_sampler = None
    if disturbance is not None:
        disturbance.validate(config.n_agents, config.dim)
        if disturbance.perturbs_combination:
            disturbance_sampler = DisturbanceSampler(disturbance, master_seed, run_indices, config.n_agents, config.dim)

    checkpoints = {int(n) for n in checkpoints if 0 <= int(n) <= n_iterations}
    captured = {}

    state = NetworkState.zeros(config.n_agents, config.dim, batch=(n_runs,))
    msd = np.full((n_runs, n_iterations + 1), np.nan)
    msd[:, 0] = _network_msd(w_opt, state.weights)
    diverged_at = np.full(n_runs, -1, dtype=int)
    trajectory = None
    if record == "weight-trajectory":
        trajectory = np.zeros((n_runs, n_iterations + 1, config.n_agents, config.dim), dtype=complex)
    if 0 in checkpoints:
        captured[0] = state.weights.copy()

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_iterations + 1):
            measurements = sampler.draw()
            q = disturbance_sampler.draw() if disturbance_sampler is not None else None
            state = step(state, measurements, config, q)

            magnitude = np.max(np.abs(state.weights), axis=(-2, -1))
            blown = ~(magnitude <= divergence_threshold) & (diverged_at < 0)
            if np.any(blown):
                diverged_at[blown] = n
                logger.info("Runs %s diverged at iteration %s.", [run_indices[i] for i in np.flatnonzero(blown)], n)
            alive = diverged_at < 0
            if not np.all(alive):
                state.weights[~alive] = 0.0

            msd[alive, n] = _network_msd(w_opt, state.weights[alive])
            if trajectory is not None:
                trajectory[:, n] = state.weights
            if n in checkpoints:
                captured[n] = state.weights.copy()

    return BatchRecord(
        run_indices=run_indices,
        msd=msd,
        diverged_at=diverged_at,
        weights=trajectory,
        checkpoints=captured or None,
    )


def run_adaptive(
    config,
    environments,
    n_iterations,
    seed,
    disturbance=None,
    record="msd-only",
    run_index=0,
    divergence_threshold=DIVERGENCE_THRESHOLD,
):
    """Single run ``run_index`` of the strategy over the given environments."""
    environments = list(environments)
    if len(environments) != config.n_agents:
        raise AlgorithmError(f"{len(environments)} environments for a {config.n_agents}-agent network.")
    dead_tap = disturbance.dead_tap if isinstance(disturbance, DisturbanceSpec) else None
    sampler = NetworkSampler(environments, seed, [run_index], dead_tap=dead_tap)

    started = time.perf_counter()
    batch = simulate_batch(
        config,
        stacked_optima(environments),
        sampler,
        n_iterations,
        [run_index],
        master_seed=seed,
        disturbance=disturbance,
        record=record,
        divergence_threshold=divergence_threshold,
    )
    logger.debug("Run %s finished %s iterations in %.2f ms.", run_index, n_iterations, _elapsed_ms(started))

    diverged = int(batch.diverged_at[0])
    return SimulationRecord(
        msd=batch.msd[0],
        diverged_at=diverged if diverged >= 0 else None,
        weights=batch.weights[0] if batch.weights is not None else None,
    )


def _elapsed_ms(started):
    return (time.perf_counter() - started) * 1000


def export_weight_trajectory(record, path):
    """Write (iteration, agent, tap, real, imag) rows; returns the path written."""
    if record.weights is None:
        raise AlgorithmError("This record holds no weight trajectory; rerun with record='weight-trajectory'.")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_steps, n_agents, dim = record.weights.shape
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["iteration", "agent", "tap", "real", "imag"])
        for n in range(n_steps):
            for k in range(n_agents):
                for tap in range(dim):
                    value = record.weights[n, k, tap]
                    writer.writerow([n, k, tap, repr(float(value.real)), repr(float(value.imag))])
    return path
