"""Network-level matrices of the weight-error recursion v_n = B_n v_{n-1} - μ g_n - r.

Blocks are stacked agent by agent, so an LN-vector holds agent 0's L taps
first. The combination operator M = 𝒜ᵀ D_P + D_P⊥ (𝒜 = A ⊗ I_L) appears in
every quantity: B = M (I - μ D_S H_x) for the S-scaled strategy and
B = M (I - μη₂ D_P⊥ - μ H_x) for the leaky one.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ..errors import AlgorithmError, PredictorUnavailable

logger = logging.getLogger(__name__)

PREDICTOR_MAX_DIM = 256
PREDICTABLE_VARIANTS = ("alg1", "alg1_identity_s", "alg2")
G2_FORMS = ("displayed", "wrapped")


@dataclass(frozen=True, eq=False)
class TheoreticalModel:
    b_matrix: np.ndarray
    g_matrix: np.ndarray
    r_vector: np.ndarray
    h_x: np.ndarray
    dims: tuple
    variant: str
    step_size: float
    eta2: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_agents(self):
        return self.dims[0]

    @property
    def size(self):
        return self.dims[0] * self.dims[1]


@dataclass(frozen=True)
class StepSizeBound:
    value: float
    guaranteed: bool
    caveat: str = ""


def block_diag_repeat(block, n_agents):
    return np.kron(np.eye(n_agents), block)


def combination_operator(combination, pair):
    """𝒜ᵀ D_P + D_P⊥; its spectral norm is at most one for doubly stochastic A."""
    n_agents = combination.n_agents
    extended = np.kron(combination.entries, np.eye(pair.dim))
    return extended.T @ block_diag_repeat(pair.p_theta, n_agents) + block_diag_repeat(pair.p_theta_perp, n_agents)


def spectral_radius(matrix):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Spectral radius needs a square matrix, got shape {matrix.shape}.")
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(sla.eigvals(matrix))))


def build_model(
    variant,
    combination,
    pair,
    environments,
    mu,
    eta2=0.0,
    w_opt_stacked=None,
    g2_form="displayed",
    max_dim=PREDICTOR_MAX_DIM,
):
    """Assemble B, G and r for one strategy.

    ``g2_form`` picks the noise covariance of the leaky strategy: "displayed"
    uses diag{σ²_z,k R_x,k} directly, "wrapped" sandwiches it by the
    combination operator as the noise term g_n itself is defined.
    """
    if variant not in PREDICTABLE_VARIANTS:
        raise AlgorithmError(f"No performance model for variant {variant!r}; expected one of {PREDICTABLE_VARIANTS}.")
    if g2_form not in G2_FORMS:
        raise AlgorithmError(f"Unknown G form {g2_form!r}; expected one of {G2_FORMS}.")

    environments = list(environments)
    n_agents, dim = combination.n_agents, pair.dim
    if len(environments) != n_agents or any(env.dim != dim for env in environments):
        raise AlgorithmError(f"Expected {n_agents} environments of dimension {dim}.")
    size = n_agents * dim
    if size > max_dim:
        raise PredictorUnavailable(
            f"Prediction declined: N*L = {size} exceeds the dense predictor limit of {max_dim}."
        )

    if w_opt_stacked is None:
        w_opt_stacked = np.concatenate([env.w_opt for env in environments])
    w_opt_stacked = np.asarray(w_opt_stacked, dtype=complex).reshape(size)

    identity = np.eye(size)
    extended_t = np.kron(combination.entries, np.eye(dim)).T
    d_p = block_diag_repeat(pair.p_theta, n_agents)
    d_perp = block_diag_repeat(pair.p_theta_perp, n_agents)
    m_comb = extended_t @ d_p + d_perp
    h_x = sla.block_diag(*[env.covariance for env in environments])
    noise = sla.block_diag(*[env.noise_variance * env.covariance for env in environments])

    r_vector = (extended_t - identity) @ d_p @ w_opt_stacked
    if variant in ("alg1", "alg1_identity_s"):
        scaling = pair.s_theta if variant == "alg1" else np.eye(dim)
        d_s = block_diag_repeat(scaling, n_agents)
        b_matrix = m_comb @ (identity - mu * d_s @ h_x)
        wrapped = m_comb @ d_s
        g_matrix = wrapped @ noise @ wrapped.conj().T
    else:
        b_matrix = m_comb @ (identity - mu * eta2 * d_perp - mu * h_x)
        r_vector = r_vector - mu * eta2 * m_comb @ d_perp @ w_opt_stacked
        g_matrix = noise if g2_form == "displayed" else m_comb @ noise @ m_comb.conj().T

    g_matrix = 0.5 * (g_matrix + g_matrix.conj().T)
    logger.debug("Built %s model with N=%s, L=%s, mu=%s, eta2=%s.", variant, n_agents, dim, mu, eta2)
    return TheoreticalModel(
        b_matrix=b_matrix,
        g_matrix=g_matrix,
        r_vector=r_vector,
        h_x=h_x,
        dims=(n_agents, dim),
        variant=variant,
        step_size=float(mu),
        eta2=float(eta2),
        meta={"g2_form": g2_form if variant == "alg2" else None},
    )


# ── Stability ────────────────────────────────────────────────────────


def _largest_input_eigenvalue(environments):
    return max(float(sla.eigvalsh(env.covariance)[-1]) for env in environments)


def step_size_bound(variant, environments, eta2=0.0, pair=None):
    """Sufficient mean-stability bound on μ for doubly stochastic A."""
    lam = _largest_input_eigenvalue(environments)
    if variant in ("alg2", "noncoop_leaky"):
        return StepSizeBound(value=2.0 / (eta2 + lam), guaranteed=True)
    if variant in ("alg1_identity_s", "noncoop_lms"):
        return StepSizeBound(value=2.0 / lam, guaranteed=True)
    if variant == "alg1":
        if pair is not None and pair.is_orthonormal:
            return StepSizeBound(value=2.0 / lam, guaranteed=True)
        return StepSizeBound(
            value=2.0 / lam,
            guaranteed=False,
            caveat="Θ is not orthonormal so S_Θ ≠ I; check ρ(B) < 1 directly.",
        )
    raise AlgorithmError(f"No step-size bound for variant {variant!r}.")


def step_size_bound_exact(environments, eta2, pair):
    """Tighter leaky bound 2 / max_k λ_max(η₂ P_Θ⊥ + R_x,k)."""
    shift = eta2 * pair.p_theta_perp
    lam = max(float(sla.eigvalsh(0.5 * (shift + shift.conj().T) + env.covariance)[-1]) for env in environments)
    return 2.0 / lam


def stability_report(model):
    rho_b = spectral_radius(model.b_matrix)
    return {
        "variant": model.variant,
        "step_size": model.step_size,
        "eta2": model.eta2,
        "rho_b": rho_b,
        "rho_k": rho_b**2,
        "mean_stable": rho_b < 1.0,
        "mean_square_stable": rho_b**2 < 1.0,
    }
