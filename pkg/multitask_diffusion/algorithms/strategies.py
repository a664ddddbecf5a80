"""Adapt and combine steps of the subspace-constrained diffusion strategies.

All steps act on arrays whose last two axes are (agent, tap), so the same code
advances one network or a stacked batch of independent Monte Carlo runs.
Weights are stored as rows: the column-vector update ψ = w + μ S x* e becomes
ψ = w + μ e conj(x) Sᵀ on row vectors.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import AlgorithmError

VARIANTS = ("alg1", "alg1_identity_s", "alg2", "noncoop_lms", "noncoop_leaky")
COOPERATIVE_VARIANTS = ("alg1", "alg1_identity_s", "alg2")
LEAKY_VARIANTS = ("alg2", "noncoop_leaky")


@dataclass(frozen=True, eq=False)
class AlgorithmConfig:
    """One adaptive strategy. ``step_size`` zero is allowed and freezes the weights."""

    variant: str
    step_size: float
    eta2: float
    combination: object
    pair: object

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise AlgorithmError(f"Unknown variant {self.variant!r}; expected one of {list(VARIANTS)}.")
        if self.step_size < 0:
            raise AlgorithmError(f"Step size must be nonnegative, got {self.step_size}.")
        if self.eta2 < 0:
            raise AlgorithmError(f"Leakage η₂ must be nonnegative, got {self.eta2}.")
        if self.combination.n_agents < 1:
            raise AlgorithmError("Combination matrix is empty.")

    @property
    def n_agents(self):
        return self.combination.n_agents

    @property
    def dim(self):
        return self.pair.dim

    @property
    def adaptation_matrix(self):
        if self.variant == "alg1":
            return self.pair.s_theta
        return np.eye(self.dim, dtype=complex)

    @property
    def cooperative(self):
        return self.variant in COOPERATIVE_VARIANTS


@dataclass
class NetworkState:
    weights: np.ndarray
    intermediates: np.ndarray
    iteration: int = 0

    @classmethod
    def zeros(cls, n_agents, dim, batch=()):
        shape = (*batch, n_agents, dim)
        return cls(weights=np.zeros(shape, dtype=complex), intermediates=np.zeros(shape, dtype=complex))


@dataclass(frozen=True)
class DisturbanceSpec:
    dead_tap: tuple | None = None
    combination_noise_mean: float = 0.0
    combination_noise_stddev: float = 0.0

    @property
    def perturbs_combination(self):
        return self.combination_noise_mean != 0.0 or self.combination_noise_stddev > 0.0

    def validate(self, n_agents, dim):
        if self.combination_noise_stddev < 0:
            raise AlgorithmError("Disturbance standard deviation must be nonnegative.")
        if self.dead_tap is not None:
            agent, tap = self.dead_tap
            if not (0 <= agent < n_agents and 0 <= tap < dim):
                raise AlgorithmError(f"Dead tap {self.dead_tap} is outside the ({n_agents}, {dim}) network.")


def _check_shapes(state, measurements, config):
    d, x = measurements
    weights = state.weights
    if weights.shape[-2:] != (config.n_agents, config.dim):
        raise AlgorithmError(
            f"Weights have shape {weights.shape[-2:]}, expected ({config.n_agents}, {config.dim})."
        )
    if x.shape != weights.shape or d.shape != weights.shape[:-1]:
        raise AlgorithmError(f"Measurements (d {d.shape}, x {x.shape}) do not match weights {weights.shape}.")
    return d, x


def _error_gradient(weights, d, x):
    """Rows of x* (d - x w) for every agent."""
    error = d - np.sum(x * weights, axis=-1)
    return x.conj() * error[..., np.newaxis]


def adapt_step_alg1(state, measurements, config):
    """ψ = w + μ S x*(d - x w) with S = S_Θ (alg1) or I (alg1_identity_s)."""
    if config.variant not in ("alg1", "alg1_identity_s"):
        raise AlgorithmError(f"adapt_step_alg1 does not run variant {config.variant!r}.")
    d, x = _check_shapes(state, measurements, config)
    gradient = _error_gradient(state.weights, d, x)
    if config.variant == "alg1":
        gradient = gradient @ config.adaptation_matrix.T
    return state.weights + config.step_size * gradient


def adapt_step_alg2(state, measurements, config):
    """ψ = (I - μη₂P_Θ⊥) w + μ x*(d - x w)."""
    if config.variant != "alg2":
        raise AlgorithmError(f"adapt_step_alg2 does not run variant {config.variant!r}.")
    d, x = _check_shapes(state, measurements, config)
    gradient = _error_gradient(state.weights, d, x)
    leak = state.weights @ config.pair.p_theta_perp.T
    return state.weights - config.step_size * config.eta2 * leak + config.step_size * gradient


def adapt_step_noncoop(state, measurements, config):
    """Stand-alone LMS per agent; noncoop_leaky shrinks every tap by μη₂."""
    if config.variant not in ("noncoop_lms", "noncoop_leaky"):
        raise AlgorithmError(f"adapt_step_noncoop does not run variant {config.variant!r}.")
    d, x = _check_shapes(state, measurements, config)
    gradient = _error_gradient(state.weights, d, x)
    shrink = 1.0 - config.step_size * config.eta2 if config.variant == "noncoop_leaky" else 1.0
    return shrink * state.weights + config.step_size * gradient


def combine_step_subspace(intermediates, config, disturbance_draw=None):
    """w_k = Σ_l a_lk P_Θ ψ_l + P_Θ⊥ ψ_k, then the optional additive disturbance."""
    if not config.cooperative:
        weights = intermediates.copy()
    else:
        shared = intermediates @ config.pair.p_theta.T
        local = intermediates @ config.pair.p_theta_perp.T
        # Row k of Aᵀ (shared) aggregates the neighbours of agent k.
        weights = config.combination.entries.T @ shared + local
    if disturbance_draw is not None:
        weights = weights + disturbance_draw
    return weights


ADAPT_STEPS = {
    "alg1": adapt_step_alg1,
    "alg1_identity_s": adapt_step_alg1,
    "alg2": adapt_step_alg2,
    "noncoop_lms": adapt_step_noncoop,
    "noncoop_leaky": adapt_step_noncoop,
}


def step(state, measurements, config, disturbance_draw=None):
    """One synchronous iteration: every agent adapts, then every agent combines."""
    psi = ADAPT_STEPS[config.variant](state, measurements, config)
    weights = combine_step_subspace(psi, config, disturbance_draw)
    return NetworkState(weights=weights, intermediates=psi, iteration=state.iteration + 1)
