"""Mean and mean-square predictions from a TheoreticalModel.

The variance operator K = Bᵀ ⊗ B* is never formed. Its action on a weighting
matrix is Σ -> B* Σ B (``apply_k``); its transpose acts on covariance-like
matrices as X -> B X B* (``apply_k_adjoint``). For a Hermitian driving matrix
S_{n-1} = μ²G + r r* - (B m r* + r m* B*), with m the mean error, the network
MSD obeys

    ζ_n = ζ_{n-1} + (1/N)[Re tr(Γ_{n-1} + S_{n-1}) - v0*(Σ_{n-1} - Σ_n)v0]
    Γ_n = B(Γ_{n-1} + S_{n-1})B* - S_{n-1}
    Σ_n = B* Σ_{n-1} B,  Σ_0 = I

which is the vectorised learning-curve recursion rewritten on LN×LN matrices.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from ..errors import StabilityError
from .model import spectral_radius

logger = logging.getLogger(__name__)

FIXED_POINT_TOLERANCE = 1e-12
MAX_DOUBLINGS = 64
MAX_FIXED_POINT_ITERATIONS = 1_000_000


@dataclass(frozen=True, eq=False)
class MSDCurve:
    """Network MSD per iteration; index n is iteration n (n = 0 included)."""

    values: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)
    diverged_at: int | None = None

    @property
    def values_db(self):
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.values)

    @property
    def n_iterations(self):
        return self.values.size - 1

    def tail_average(self, fraction=0.1):
        """Mean of the final ``fraction`` of iterations, in linear units."""
        count = max(1, int(math.ceil(fraction * self.values.size)))
        return float(np.mean(self.values[-count:]))

    def tail_average_db(self, fraction=0.1):
        return to_db(self.tail_average(fraction))


@dataclass(frozen=True)
class SteadyState:
    linear: float
    iterations: int
    method: str

    @property
    def db(self):
        return to_db(self.linear)


def to_db(value):
    return 10.0 * math.log10(value) if value > 0 else float("-inf")


def _require_stable(model, what):
    rho = spectral_radius(model.b_matrix)
    if not rho < 1.0:
        raise StabilityError(f"Cannot compute {what}: the mean recursion is unstable (ρ(B) = {rho:.6f} ≥ 1).")
    return rho


# ── Mean behaviour ───────────────────────────────────────────────────


def mean_recursion(model, v0, n_iterations):
    """E{v_n} for n = 0..n_iterations as rows of an (n+1, LN) array."""
    means = np.empty((n_iterations + 1, model.size), dtype=complex)
    means[0] = np.asarray(v0, dtype=complex).reshape(model.size)
    for n in range(1, n_iterations + 1):
        means[n] = model.b_matrix @ means[n - 1] - model.r_vector
    return means


def bias(model):
    """Steady-state mean error -(I - B)^{-1} r."""
    _require_stable(model, "the bias")
    return -sla.solve(np.eye(model.size) - model.b_matrix, model.r_vector)


# ── Variance operator ────────────────────────────────────────────────


def apply_k(model, sigma):
    """B* Σ B, i.e. unvec(K vec Σ) with column-major vec."""
    b = model.b_matrix
    return b.conj().T @ sigma @ b


def apply_k_adjoint(model, sigma):
    b = model.b_matrix
    return b @ sigma @ b.conj().T


def driving_matrix(model, mean_error):
    """μ²G + r r* - (B m r* + r m* B*) for mean error m."""
    r = model.r_vector
    projected = model.b_matrix @ mean_error
    cross = np.outer(projected, r.conj())
    return model.step_size**2 * model.g_matrix + np.outer(r, r.conj()) - (cross + cross.conj().T)


# ── Learning curves ──────────────────────────────────────────────────


def transient_msd(model, v0, n_iterations):
    _require_stable(model, "the transient MSD")
    size, n_agents = model.size, model.n_agents
    v0 = np.asarray(v0, dtype=complex).reshape(size)

    values = np.empty(n_iterations + 1)
    values[0] = float(np.real(np.vdot(v0, v0))) / n_agents

    gamma = np.zeros((size, size), dtype=complex)
    sigma = np.eye(size, dtype=complex)
    mean_error = v0.copy()
    for n in range(1, n_iterations + 1):
        driving = driving_matrix(model, mean_error)
        sigma_next = apply_k(model, sigma)
        initial_term = float(np.real(np.vdot(v0, (sigma - sigma_next) @ v0)))
        accumulated = gamma + driving
        values[n] = values[n - 1] + (float(np.real(np.trace(accumulated))) - initial_term) / n_agents
        gamma = apply_k_adjoint(model, accumulated) - driving
        mean_error = model.b_matrix @ mean_error - model.r_vector
        sigma = sigma_next

    return MSDCurve(values=values, kind="predicted", meta={"variant": model.variant, **model.meta})


def _solve_weighting(model, tolerance, method):
    """Σ with Σ - B*ΣB = I/N, by doubling (default) or plain fixed-point iteration."""
    size = model.size
    rhs = np.eye(size, dtype=complex) / model.n_agents
    sigma = rhs.copy()

    if method == "doubling":
        power = model.b_matrix.copy()
        for iteration in range(1, MAX_DOUBLINGS + 1):
            updated = sigma + power.conj().T @ sigma @ power
            change = np.linalg.norm(updated - sigma) / max(np.linalg.norm(updated), np.finfo(float).tiny)
            sigma = updated
            power = power @ power
            if change < tolerance:
                return sigma, iteration
        limit = MAX_DOUBLINGS
    elif method == "fixed_point":
        for iteration in range(1, MAX_FIXED_POINT_ITERATIONS + 1):
            updated = apply_k(model, sigma) + rhs
            change = np.linalg.norm(updated - sigma) / max(np.linalg.norm(updated), np.finfo(float).tiny)
            sigma = updated
            if change < tolerance:
                return sigma, iteration
        limit = MAX_FIXED_POINT_ITERATIONS
    else:
        raise ValueError(f"Unknown steady-state method {method!r}; expected 'doubling' or 'fixed_point'.")

    raise StabilityError(f"Steady-state weighting did not converge after {limit} {method} steps; ρ(K) >= 1.")


def steady_state_msd(model, tolerance=FIXED_POINT_TOLERANCE, method="doubling"):
    _require_stable(model, "the steady-state MSD")
    sigma, iterations = _solve_weighting(model, tolerance, method)
    driving = driving_matrix(model, bias(model))
    linear = float(np.real(np.sum(driving.conj() * sigma)))
    logger.debug("Steady-state MSD %.6e after %s %s steps.", linear, iterations, method)
    return SteadyState(linear=linear, iterations=iterations, method=method)


def settle_iterations(model, v0, tolerance_db=0.05, max_iterations=65_536, initial_horizon=1024):
    """First n after which the predicted curve stays within ``tolerance_db`` of its limit.

    The prediction horizon doubles until the curve has settled inside it.
    """
    limit_db = steady_state_msd(model).db
    horizon = min(initial_horizon, max_iterations)
    while True:
        curve_db = transient_msd(model, v0, horizon).values_db
        outside = np.flatnonzero(np.abs(curve_db - limit_db) > tolerance_db)
        if outside.size == 0:
            return 0
        if outside[-1] < horizon:
            return int(outside[-1] + 1)
        if horizon >= max_iterations:
            raise StabilityError(f"Predicted curve is still settling after {max_iterations} iterations.")
        horizon = min(2 * horizon, max_iterations)


def export_curve(curve, path):
    """CSV with columns (iteration, msd_db)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["iteration", "msd_db"])
        for n, value in enumerate(curve.values_db):
            writer.writerow([n, repr(float(value))])
    return path
