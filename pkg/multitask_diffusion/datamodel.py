"""Ground-truth tasks, agent environments and streaming measurement generation.

Measurements follow d_k(n) = x_{k,n} w_k^o + z_k(n) with circular complex
Gaussian regressors (E{x* x} = R_{x,k}) and noise. Random streams are split
per (master seed, run, agent, purpose) through numpy's SeedSequence spawn keys,
so any run can be regenerated in isolation and parallel runs never share a
generator.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DataModelError
from .subspace import require_hermitian_pd

FACTOR_TOLERANCE = 1e-12
SAMPLE_CHUNK_SIZE = 256

STREAM_MEASUREMENTS = 0
STREAM_DISTURBANCE = 1

CORRELATED_FIRST_ROW = np.array([1.0, -0.4 + 0.3j, 0.2 - 0.1j, 0.1 - 0.05j, 0.02 + 0.02j])


# ── Seeding ──────────────────────────────────────────────────────────


def split_seed(master_seed, run_index):
    """SeedSequence owning everything random in run ``run_index``."""
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(run_index),))


def agent_rng(master_seed, run_index, agent_index, purpose=STREAM_MEASUREMENTS):
    run = split_seed(master_seed, run_index)
    sequence = np.random.SeedSequence(entropy=run.entropy, spawn_key=(*run.spawn_key, int(agent_index), int(purpose)))
    return np.random.default_rng(sequence)


def circular_gaussian(rng, shape, variance=1.0):
    """Circular complex Gaussian samples with E|.|² = variance."""
    scale = np.sqrt(variance / 2.0)
    real = rng.standard_normal(shape)
    imag = rng.standard_normal(shape)
    return scale * (real + 1j * imag)


# ── Ground truth ─────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class AgentEnvironment:
    covariance: np.ndarray
    covariance_factor: np.ndarray
    noise_variance: float
    w_opt: np.ndarray

    def __post_init__(self):
        if self.noise_variance < 0:
            raise DataModelError(f"Noise variance must be nonnegative, got {self.noise_variance}.")
        residual = self.covariance_factor @ self.covariance_factor.conj().T - self.covariance
        scale = max(1.0, float(np.max(np.abs(self.covariance))))
        if np.max(np.abs(residual)) > FACTOR_TOLERANCE * scale:
            raise DataModelError("Covariance factor does not reproduce the covariance.")
        if self.w_opt.shape != (self.covariance.shape[0],):
            raise DataModelError(f"Optimum has shape {self.w_opt.shape}, expected ({self.covariance.shape[0]},).")

    @property
    def dim(self):
        return self.covariance.shape[0]

    @property
    def input_variance(self):
        """Average regressor power, tr(R)/L."""
        return float(np.real(np.trace(self.covariance))) / self.dim


def make_environment(covariance, noise_variance, w_opt):
    """Noise variance zero is accepted for noise-free diagnostics."""
    covariance = require_hermitian_pd(covariance, "regressor covariance", error_cls=DataModelError)
    factor = sla.cholesky(covariance, lower=True)
    return AgentEnvironment(
        covariance=covariance,
        covariance_factor=factor,
        noise_variance=float(noise_variance),
        w_opt=np.asarray(w_opt, dtype=complex),
    )


@dataclass(frozen=True, eq=False)
class TaskModel:
    u_common: np.ndarray
    xi_locals: np.ndarray
    nu_locals: np.ndarray | None
    pair: object

    @property
    def n_agents(self):
        return self.xi_locals.shape[0]

    def optimum(self, agent):
        u = self.u_common if self.nu_locals is None else self.u_common + self.nu_locals[agent]
        return self.pair.compose(u, self.xi_locals[agent])

    def optima(self):
        """All optima stacked as an (N, L) array."""
        return np.stack([self.optimum(k) for k in range(self.n_agents)])


def sample_tasks(pair, n_agents, u_stddev, xi_stddev, nu_stddev, seed):
    if min(u_stddev, xi_stddev, nu_stddev) < 0:
        raise DataModelError("Task standard deviations must be nonnegative.")
    if n_agents < 1:
        raise DataModelError("Need at least one agent.")

    rng = np.random.default_rng(seed)
    u_common = circular_gaussian(rng, (pair.rank,), u_stddev**2)
    xi_locals = circular_gaussian(rng, (n_agents, pair.dim - pair.rank), xi_stddev**2)
    nu_locals = circular_gaussian(rng, (n_agents, pair.rank), nu_stddev**2) if nu_stddev > 0 else None
    return TaskModel(u_common=u_common, xi_locals=xi_locals, nu_locals=nu_locals, pair=pair)


def correlated_covariance(sigma_sq):
    if sigma_sq <= 0:
        raise DataModelError(f"Input variance must be positive, got {sigma_sq}.")
    base = sla.toeplitz(CORRELATED_FIRST_ROW.conj(), CORRELATED_FIRST_ROW)
    if sla.eigvalsh(base)[0] <= 0:
        raise RuntimeError("Correlated input template is not positive definite.")
    return sigma_sq * base


def sample_environments(
    topology,
    task_model,
    input_variance_range=(0.8, 1.2),
    noise_variance_range=(0.18, 0.22),
    covariance_kind="white",
    seed=0,
):
    if topology.n_agents != task_model.n_agents:
        raise DataModelError(
            f"Topology has {topology.n_agents} agents but the task model has {task_model.n_agents}."
        )
    for name, (low, high) in (("input", input_variance_range), ("noise", noise_variance_range)):
        if low <= 0 or high < low:
            raise DataModelError(f"The {name} variance range must be positive and ordered, got ({low}, {high}).")

    dim = task_model.pair.dim
    if covariance_kind == "correlated" and dim != CORRELATED_FIRST_ROW.size:
        raise DataModelError(f"Correlated inputs are defined for L={CORRELATED_FIRST_ROW.size}, got L={dim}.")
    if covariance_kind not in ("white", "correlated"):
        raise DataModelError(f"Unknown covariance kind {covariance_kind!r}; expected 'white' or 'correlated'.")

    rng = np.random.default_rng(seed)
    input_variances = rng.uniform(*input_variance_range, size=topology.n_agents)
    noise_variances = rng.uniform(*noise_variance_range, size=topology.n_agents)

    environments = []
    for k in range(topology.n_agents):
        if covariance_kind == "white":
            covariance = input_variances[k] * np.eye(dim, dtype=complex)
        else:
            covariance = correlated_covariance(input_variances[k])
        environments.append(make_environment(covariance, noise_variances[k], task_model.optimum(k)))
    return environments


def environment_table(environments):
    """Rows (agent, input_variance, noise_variance) for export alongside results."""
    return [(k, env.input_variance, env.noise_variance) for k, env in enumerate(environments)]


def stacked_optima(environments):
    return np.stack([env.w_opt for env in environments])


# ── Measurements ─────────────────────────────────────────────────────


def emit_measurement(env, rng):
    g = circular_gaussian(rng, (env.dim,))
    x = g @ env.covariance_factor.conj().T
    z = circular_gaussian(rng, (), env.noise_variance)
    return x @ env.w_opt + z, x


class NetworkSampler:
    """Per-iteration (d, x) for a batch of runs, drawn from per-(run, agent) streams.

    Samples are generated in fixed chunks of ``SAMPLE_CHUNK_SIZE`` iterations per
    stream so the values a run sees depend only on its seeds. ``dead_tap`` =
    (agent, tap) zeroes that regressor entry before d is formed.
    """

    def __init__(self, environments, master_seed, run_indices, dead_tap=None, chunk_size=SAMPLE_CHUNK_SIZE):
        self.environments = list(environments)
        self.run_indices = [int(r) for r in run_indices]
        self.n_agents = len(self.environments)
        self.dim = self.environments[0].dim
        self.dead_tap = dead_tap
        self.chunk_size = int(chunk_size)
        self._factors_h = [env.covariance_factor.conj().T for env in self.environments]
        self._noise_std = np.array([np.sqrt(env.noise_variance) for env in self.environments])
        self._optima = stacked_optima(self.environments)
        self._rngs = [
            [agent_rng(master_seed, run, k, STREAM_MEASUREMENTS) for k in range(self.n_agents)]
            for run in self.run_indices
        ]
        self._d = None
        self._x = None
        self._cursor = self.chunk_size

        if dead_tap is not None:
            agent, tap = dead_tap
            if not (0 <= agent < self.n_agents and 0 <= tap < self.dim):
                raise DataModelError(f"Dead tap {dead_tap} is outside the ({self.n_agents}, {self.dim}) network.")

    def _refill(self):
        n_runs, chunk = len(self.run_indices), self.chunk_size
        x = np.empty((chunk, n_runs, self.n_agents, self.dim), dtype=complex)
        z = np.empty((chunk, n_runs, self.n_agents), dtype=complex)
        for r, rngs in enumerate(self._rngs):
            for k, rng in enumerate(rngs):
                x[:, r, k, :] = circular_gaussian(rng, (chunk, self.dim)) @ self._factors_h[k]
                z[:, r, k] = circular_gaussian(rng, (chunk,)) * self._noise_std[k]
        if self.dead_tap is not None:
            agent, tap = self.dead_tap
            x[:, :, agent, tap] = 0.0
        self._d = np.einsum("crkl,kl->crk", x, self._optima) + z
        self._x = x
        self._cursor = 0

    def draw(self):
        """Next iteration: d of shape (runs, N) and x of shape (runs, N, L)."""
        if self._cursor >= self.chunk_size:
            self._refill()
        i = self._cursor
        self._cursor += 1
        return self._d[i], self._x[i]
