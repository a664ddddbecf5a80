"""Latent subspace geometry: Θ, its orthonormal complement, projectors and S_Θ.

Also builds the positive-definiteness certificates showing that the
subspace-constrained network problems have a unique solution.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import SubspaceError

RANK_TOLERANCE = 1e-10
ORTHONORMAL_TOLERANCE = 1e-12
CERTIFICATE_TOLERANCE = 1e-10


def hermitian_part(matrix):
    return 0.5 * (matrix + matrix.conj().T)


def require_hermitian_pd(matrix, name="matrix", error_cls=SubspaceError):
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise error_cls(f"{name} must be square, got shape {matrix.shape}.")
    scale = max(1.0, float(np.max(np.abs(matrix))))
    if np.max(np.abs(matrix - matrix.conj().T)) > 1e-12 * scale:
        raise error_cls(f"{name} is not Hermitian.")
    smallest = float(sla.eigvalsh(hermitian_part(matrix))[0])
    if smallest <= 0:
        raise error_cls(f"{name} is not positive definite (smallest eigenvalue {smallest:.3e}).")
    return matrix


@dataclass(frozen=True, eq=False)
class SubspacePair:
    theta: np.ndarray
    theta_perp: np.ndarray
    p_theta: np.ndarray
    p_theta_perp: np.ndarray
    s_theta: np.ndarray

    @property
    def dim(self):
        return self.theta.shape[0]

    @property
    def rank(self):
        return self.theta.shape[1]

    @property
    def is_orthonormal(self):
        gram = self.theta.conj().T @ self.theta
        return bool(np.max(np.abs(gram - np.eye(self.rank)), initial=0.0) < ORTHONORMAL_TOLERANCE)

    def decompose(self, w):
        """Latent coordinates (u, ξ) of w = Θu + Θ⊥ξ."""
        w = np.asarray(w, dtype=complex)
        if self.rank:
            gram = self.theta.conj().T @ self.theta
            u = sla.solve(gram, self.theta.conj().T @ w, assume_a="her")
        else:
            u = np.zeros(0, dtype=complex)
        xi = self.theta_perp.conj().T @ w
        return u, xi

    def compose(self, u, xi):
        return self.theta @ np.asarray(u, dtype=complex) + self.theta_perp @ np.asarray(xi, dtype=complex)


@dataclass(frozen=True, eq=False)
class UniquenessCertificate:
    schur_complement: np.ndarray
    min_eigenvalue: float
    positive_definite: bool

    def as_dict(self):
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "positive_definite": self.positive_definite,
            "size": int(self.schur_complement.shape[0]),
        }


# ── Construction ─────────────────────────────────────────────────────


def _check_rank(theta):
    if theta.shape[1] == 0:
        return
    singular_values = sla.svdvals(theta)
    if singular_values[-1] <= RANK_TOLERANCE * singular_values[0]:
        raise SubspaceError(
            f"Θ is rank deficient (singular values {np.array2string(singular_values, precision=3)})."
        )


def orthonormal_complement(theta):
    """Orthonormal basis of the orthogonal complement of span(Θ)."""
    theta = np.asarray(theta, dtype=complex)
    if theta.ndim != 2:
        raise SubspaceError(f"Θ must be a 2-D array, got shape {theta.shape}.")
    dim, rank = theta.shape
    if rank > dim:
        raise SubspaceError(f"Θ has more columns ({rank}) than rows ({dim}).")
    if rank == 0:
        return np.eye(dim, dtype=complex)
    _check_rank(theta)
    left, _, _ = sla.svd(theta, full_matrices=True)
    return left[:, rank:]


def make_subspace_pair(theta):
    theta = np.array(theta, dtype=complex)
    if theta.ndim != 2:
        raise SubspaceError(f"Θ must be a 2-D array, got shape {theta.shape}.")
    dim, rank = theta.shape
    if dim < 1:
        raise SubspaceError("Θ must have at least one row.")

    theta_perp = orthonormal_complement(theta)
    if rank:
        gram = theta.conj().T @ theta
        p_theta = theta @ sla.solve(gram, theta.conj().T, assume_a="her")
        p_theta = hermitian_part(p_theta)
    else:
        p_theta = np.zeros((dim, dim), dtype=complex)
    p_theta_perp = theta_perp @ theta_perp.conj().T
    s_theta = theta @ theta.conj().T + p_theta_perp

    for matrix in (theta, theta_perp, p_theta, p_theta_perp, s_theta):
        matrix.setflags(write=False)
    return SubspacePair(theta, theta_perp, p_theta, p_theta_perp, s_theta)


def standard_basis_subspace(dim, rank):
    if not 1 <= rank <= dim:
        raise SubspaceError(f"Rank M={rank} must satisfy 1 <= M <= L={dim}.")
    return make_subspace_pair(np.eye(dim, rank, dtype=complex))


def empty_subspace(dim):
    """Θ with no columns: every direction is local, P_Θ⊥ = I."""
    return make_subspace_pair(np.zeros((dim, 0), dtype=complex))


def ula_vandermonde_subspace(dim, angles, spacing_ratio):
    """Unnormalised ULA steering matrix, Θ[l, m] = exp(-j l ψ_m) with ψ_m = 2π (d/λ₀) sin θ_m."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if not 1 <= angles.size <= dim:
        raise SubspaceError(f"Need between 1 and L={dim} steering angles, got {angles.size}.")
    psi = 2.0 * np.pi * spacing_ratio * np.sin(angles)
    wrapped = np.mod(psi, 2.0 * np.pi)
    if np.unique(np.round(wrapped, 12)).size != wrapped.size:
        raise SubspaceError(f"Steering angles {angles.tolist()} produce repeated phases; Θ would be rank deficient.")
    rows = np.arange(dim)[:, np.newaxis]
    theta = np.exp(-1j * rows * psi[np.newaxis, :])
    return make_subspace_pair(theta)


def matrix_subspace(literal):
    """Θ from a config literal: a nested list, or {"re": [...], "im": [...]}."""
    if isinstance(literal, dict):
        real = np.asarray(literal.get("re", []), dtype=float)
        imag = np.asarray(literal.get("im", np.zeros_like(real)), dtype=float)
        if real.shape != imag.shape:
            raise SubspaceError(f"Real part {real.shape} and imaginary part {imag.shape} differ in shape.")
        theta = real + 1j * imag
    else:
        theta = np.asarray(literal, dtype=complex)
    if theta.ndim == 1:
        theta = theta[:, np.newaxis]
    return make_subspace_pair(theta)


# ── Uniqueness certificates ──────────────────────────────────────────


def _certificate(schur):
    schur = hermitian_part(schur)
    if schur.shape[0] == 0:
        return UniquenessCertificate(schur, float("inf"), True)
    min_eigenvalue = float(sla.eigvalsh(schur)[0])
    return UniquenessCertificate(schur, min_eigenvalue, min_eigenvalue > CERTIFICATE_TOLERANCE)


def subspace_certificate(pair, covariances):
    """Schur complement of the local corner of the projected network Hessian; PD means a unique (u, ξ) solution."""
    theta, theta_perp = pair.theta, pair.theta_perp
    schur = np.zeros((pair.rank, pair.rank), dtype=complex)
    for k, covariance in enumerate(covariances):
        covariance = require_hermitian_pd(covariance, f"covariance of agent {k}")
        corner = theta.conj().T @ covariance @ theta
        if theta_perp.shape[1] == 0:
            schur += corner
            continue
        cross = theta.conj().T @ covariance @ theta_perp
        local = theta_perp.conj().T @ covariance @ theta_perp
        try:
            factor = sla.cho_factor(hermitian_part(local))
        except sla.LinAlgError as exc:
            raise SubspaceError(f"Θ⊥* R Θ⊥ is singular for agent {k}.") from exc
        schur += corner - cross @ sla.cho_solve(factor, cross.conj().T)
    return _certificate(schur)


def leaky_certificate(theta, covariances, eta2):
    if eta2 <= 0:
        raise SubspaceError(f"Leakage η₂ must be positive for this certificate, got {eta2}.")
    theta = np.asarray(theta, dtype=complex)
    dim, rank = theta.shape
    schur = np.zeros((rank, rank), dtype=complex)
    for k, covariance in enumerate(covariances):
        covariance = require_hermitian_pd(covariance, f"covariance of agent {k}")
        projected = covariance @ theta
        shifted = covariance + eta2 * np.eye(dim)
        schur += theta.conj().T @ projected - projected.conj().T @ sla.solve(shifted, projected, assume_a="her")
    return _certificate(schur)
