"""Monte Carlo averaging over independent runs.

Runs are processed in fixed blocks of consecutive run indices. Blocks may run
in worker processes, but results are always reduced one run at a time in run
order, so the averaged curve does not depend on the number of workers.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..algorithms import simulate_batch
from ..algorithms.runner import DIVERGENCE_THRESHOLD
from ..datamodel import NetworkSampler
from ..errors import SimulationError
from ..theory import MSDCurve
from .settings import config_digest, resolve

logger = logging.getLogger(__name__)

RUN_BLOCK_SIZE = 25


@dataclass(frozen=True, eq=False)
class MeanErrorEstimate:
    """Empirical E{v_n} and its standard error at each checkpoint, arrays shaped (N, L)."""

    mean: dict
    stderr: dict
    n_runs: int
    n_diverged: int


def run_blocks(n_runs, block_size):
    if block_size < 1:
        raise SimulationError(f"Run block size must be at least 1, got {block_size}.")
    return [tuple(range(start, min(start + block_size, n_runs))) for start in range(0, n_runs, block_size)]


def _simulate_block(config, run_indices, checkpoints=(), divergence_threshold=DIVERGENCE_THRESHOLD):
    resolved = resolve(config)
    sampler = NetworkSampler(resolved.environments, config.master_seed, run_indices, dead_tap=resolved.dead_tap)
    return simulate_batch(
        resolved.algorithm,
        resolved.w_opt,
        sampler,
        config.n_iterations,
        run_indices,
        master_seed=config.master_seed,
        disturbance=resolved.disturbance,
        checkpoints=checkpoints,
        divergence_threshold=divergence_threshold,
    )


def _map_blocks(fn, config, blocks, workers, **kwargs):
    if workers <= 1 or len(blocks) <= 1:
        return [fn(config, block, **kwargs) for block in blocks]
    with ProcessPoolExecutor(max_workers=min(workers, len(blocks))) as pool:
        futures = [pool.submit(fn, config, block, **kwargs) for block in blocks]
        return [future.result() for future in futures]


def monte_carlo_msd(
    config,
    workers=1,
    block_size=RUN_BLOCK_SIZE,
    divergence_threshold=DIVERGENCE_THRESHOLD,
):
    """Average network MSD over ``config.n_runs`` seeded runs.

    Diverged runs are left out of the average and counted in the curve
    metadata. If every run diverges a SimulationError is raised.
    """
    blocks = run_blocks(config.n_runs, block_size)
    started = time.perf_counter()
    records = _map_blocks(
        _simulate_block, config, blocks, workers, divergence_threshold=divergence_threshold
    )

    total = np.zeros(config.n_iterations + 1)
    n_used = 0
    first_divergence = None
    for record in records:
        for row, diverged_at in zip(record.msd, record.diverged_at, strict=True):
            if diverged_at >= 0:
                if first_divergence is None or diverged_at < first_divergence:
                    first_divergence = int(diverged_at)
                continue
            total += row
            n_used += 1

    n_diverged = config.n_runs - n_used
    duration_ms = (time.perf_counter() - started) * 1000
    if n_used == 0:
        raise SimulationError(
            f"All {config.n_runs} runs diverged (first at iteration {first_divergence}); "
            "reduce the step size or check ρ(B) with the certify command."
        )
    if n_diverged:
        logger.warning("%s of %s runs diverged and were excluded from the average.", n_diverged, config.n_runs)
    logger.info(
        "Monte Carlo %s: %s runs x %s iterations in %.2f ms.",
        config.label or config.scenario,
        config.n_runs,
        config.n_iterations,
        duration_ms,
    )

    return MSDCurve(
        values=total / n_used,
        kind="simulated",
        meta={
            "label": config.label,
            "scenario": config.scenario,
            "variant": config.algorithm.variant,
            "n_runs": config.n_runs,
            "n_used": n_used,
            "n_diverged": n_diverged,
            "master_seed": config.master_seed,
            "config_digest": config_digest(config),
        },
        diverged_at=first_divergence,
    )


def monte_carlo_mean_error(config, checkpoints, workers=1, block_size=RUN_BLOCK_SIZE):
    """Empirical mean weight error v_n = w° - w_n over runs, with standard errors."""
    checkpoints = sorted({int(n) for n in checkpoints})
    if not checkpoints or checkpoints[0] < 0 or checkpoints[-1] > config.n_iterations:
        raise SimulationError(f"Checkpoints {checkpoints} must lie in [0, {config.n_iterations}].")

    resolved = resolve(config)
    w_opt = resolved.w_opt
    blocks = run_blocks(config.n_runs, block_size)
    records = _map_blocks(_simulate_block, config, blocks, workers, checkpoints=tuple(checkpoints))

    sums = {n: np.zeros_like(w_opt) for n in checkpoints}
    squares = {n: np.zeros(w_opt.shape) for n in checkpoints}
    n_used = 0
    for record in records:
        for i, diverged_at in enumerate(record.diverged_at):
            if diverged_at >= 0:
                continue
            n_used += 1
            for n in checkpoints:
                error = w_opt - record.checkpoints[n][i]
                sums[n] += error
                squares[n] += np.abs(error) ** 2

    if n_used < 2:
        raise SimulationError(f"Need at least two converging runs for a standard error, got {n_used}.")

    mean, stderr = {}, {}
    for n in checkpoints:
        mean[n] = sums[n] / n_used
        variance = (squares[n] - n_used * np.abs(mean[n]) ** 2) / (n_used - 1)
        stderr[n] = np.sqrt(np.maximum(variance, 0.0) / n_used)
    return MeanErrorEstimate(mean=mean, stderr=stderr, n_runs=n_used, n_diverged=config.n_runs - n_used)


def monte_carlo_checkpoint_weights(config, checkpoints, workers=1, block_size=RUN_BLOCK_SIZE):
    """Run-averaged weights (N, L) at each checkpoint; used to track weight drift."""
    checkpoints = tuple(sorted({int(n) for n in checkpoints}))
    blocks = run_blocks(config.n_runs, block_size)
    records = _map_blocks(_simulate_block, config, blocks, workers, checkpoints=checkpoints)

    totals = {}
    n_used = 0
    for record in records:
        for i, diverged_at in enumerate(record.diverged_at):
            if diverged_at >= 0:
                continue
            n_used += 1
            for n in checkpoints:
                totals[n] = totals.get(n, 0) + record.checkpoints[n][i]
    if n_used == 0:
        raise SimulationError(f"All {config.n_runs} runs diverged.")
    return {n: totals[n] / n_used for n in checkpoints}


def drift_ratio(weights, agent, tap, start, end):
    """|w_end[agent, tap]| / |w_start[agent, tap]| for a trajectory array or a checkpoint mapping."""
    first = abs(complex(weights[start][agent, tap]))
    last = abs(complex(weights[end][agent, tap]))
    if first == 0.0:
        return float("inf") if last > 0 else 1.0
    return last / first
