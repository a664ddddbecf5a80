"""Subspace pairs, projectors and the uniqueness certificates."""

import numpy as np
import pytest

from multitask_diffusion.errors import SubspaceError
from multitask_diffusion.subspace import (
    empty_subspace,
    leaky_certificate,
    make_subspace_pair,
    matrix_subspace,
    orthonormal_complement,
    standard_basis_subspace,
    subspace_certificate,
    ula_vandermonde_subspace,
)
from tests.conftest import _random_orthonormal_pair, _random_pd


def _assert_projector_pair(pair):
    identity = np.eye(pair.dim)
    assert np.allclose(pair.p_theta + pair.p_theta_perp, identity, atol=1e-12)
    assert np.allclose(pair.p_theta @ pair.p_theta, pair.p_theta, atol=1e-12)
    assert np.allclose(pair.p_theta, pair.p_theta.conj().T, atol=1e-12)
    assert np.allclose(pair.theta.conj().T @ pair.theta_perp, 0.0, atol=1e-12)


# ── Construction ───────────────────────────────────────────────────


def test_standard_basis_pair(theta1):
    _assert_projector_pair(theta1)
    assert theta1.is_orthonormal
    assert np.allclose(theta1.s_theta, np.eye(5))
    assert np.allclose(theta1.p_theta, np.diag([1, 1, 1, 0, 0]))


def test_ula_pair_is_not_orthonormal(theta2):
    _assert_projector_pair(theta2)
    assert theta2.rank == 3
    assert not theta2.is_orthonormal
    assert np.allclose(np.abs(theta2.theta), 1.0)
    assert np.min(np.linalg.eigvalsh(theta2.s_theta)) > 0


def test_ula_first_row_is_ones(theta2):
    assert np.allclose(theta2.theta[0], 1.0)


def test_ula_rejects_repeated_phases():
    with pytest.raises(SubspaceError, match="repeated phases"):
        ula_vandermonde_subspace(5, [0.3, 0.3], 0.5)


def test_empty_subspace_makes_everything_local():
    pair = empty_subspace(4)

    assert pair.rank == 0
    assert np.allclose(pair.p_theta_perp, np.eye(4))
    assert np.allclose(pair.p_theta, 0.0)


def test_full_rank_subspace_has_no_complement():
    pair = standard_basis_subspace(3, 3)

    assert pair.theta_perp.shape == (3, 0)
    assert np.allclose(pair.p_theta, np.eye(3))


def test_rank_deficient_theta_is_rejected():
    theta = np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]])

    with pytest.raises(SubspaceError, match="rank deficient"):
        make_subspace_pair(theta)


def test_too_many_columns_rejected():
    with pytest.raises(SubspaceError, match="more columns"):
        orthonormal_complement(np.ones((2, 3)))


def test_standard_basis_rank_bounds():
    with pytest.raises(SubspaceError):
        standard_basis_subspace(3, 4)


def test_matrix_subspace_from_real_and_imaginary_parts():
    pair = matrix_subspace({"re": [[1, 0], [0, 1], [0, 0]], "im": [[0, 0], [0, 0], [1, 0]]})

    assert pair.dim == 3
    assert pair.rank == 2
    _assert_projector_pair(pair)


def test_pair_arrays_are_read_only(theta1):
    with pytest.raises(ValueError):
        theta1.p_theta[0, 0] = 0.0


def test_decompose_and_compose_recover_latent_coordinates(theta2):
    rng = np.random.default_rng(3)
    u = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    xi = rng.standard_normal(2) + 1j * rng.standard_normal(2)

    w = theta2.compose(u, xi)
    u_back, xi_back = theta2.decompose(w)

    assert np.allclose(u_back, u, atol=1e-10)
    assert np.allclose(xi_back, xi, atol=1e-10)


# ── Certificates ───────────────────────────────────────────────────


def test_subspace_certificate_positive_for_random_inputs():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        dim = int(rng.integers(2, 6))
        rank = int(rng.integers(1, dim + 1))
        pair = _random_orthonormal_pair(rng, dim, rank)
        covariances = [_random_pd(rng, dim) for _ in range(int(rng.integers(1, 6)))]

        certificate = subspace_certificate(pair, covariances)

        assert certificate.positive_definite
        assert certificate.min_eigenvalue > 1e-10


def test_leaky_certificate_positive_for_random_inputs():
    rng = np.random.default_rng(2025)
    for _ in range(100):
        dim = int(rng.integers(2, 6))
        rank = int(rng.integers(1, dim + 1))
        theta = _random_orthonormal_pair(rng, dim, rank).theta
        covariances = [_random_pd(rng, dim) for _ in range(int(rng.integers(1, 6)))]

        certificate = leaky_certificate(theta, covariances, float(rng.uniform(0.01, 1.0)))

        assert certificate.positive_definite
        assert certificate.min_eigenvalue > 1e-10


def test_certificate_for_empty_theta_is_trivially_positive():
    pair = empty_subspace(3)

    certificate = subspace_certificate(pair, [np.eye(3)])

    assert certificate.positive_definite
    assert certificate.as_dict()["size"] == 0


def test_subspace_certificate_rejects_indefinite_covariance(theta1):
    covariance = np.diag([1.0, 1.0, 1.0, 1.0, -1.0])

    with pytest.raises(SubspaceError, match="not positive definite"):
        subspace_certificate(theta1, [covariance])


def test_leaky_certificate_needs_positive_leakage(theta1):
    with pytest.raises(SubspaceError, match="must be positive"):
        leaky_certificate(theta1.theta, [np.eye(5)], 0.0)
