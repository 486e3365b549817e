import numpy as np
import pytest

from toricnet import NotWeaklyReversible, UnbalancedFlux, stoich_decomp, toric_membership
from toricnet.fluxcone import (
    balance_matrix,
    finite_difference_jacobian,
    flux_space,
    immersion_rank_check,
    phi_embedding,
    phi_hat_jacobian,
    phi_inverse,
    sample_flux,
)


def _parallel(u, v):
    return np.isclose(abs(np.dot(u, v)), np.linalg.norm(u) * np.linalg.norm(v))


def test_flux_space_examples(cycle3, ab, segre):
    fs = flux_space(cycle3)
    assert fs.dim == 1 and _parallel(fs.basis[0], [1, 1, 1])
    fs = flux_space(ab)
    assert fs.dim == 1 and _parallel(fs.basis[0], [1, 1])
    assert flux_space(segre).dim == 2


@pytest.mark.parametrize("name", ["segre", "ab", "cycle3", "mixed"])
def test_flux_space_invariants(name, request):
    g = request.getfixturevalue(name)
    fs = flux_space(g)
    np.testing.assert_allclose(fs.balance_matrix @ fs.basis.T, 0, atol=1e-12)
    assert fs.dim == g.n_edges - np.linalg.matrix_rank(fs.balance_matrix)
    assert fs.dim >= len(g.components)


def test_balance_matrix_sign_convention(cycle3):
    np.testing.assert_array_equal(balance_matrix(cycle3), [[-1, 0, 1], [1, -1, 0], [0, 1, -1]])


def test_sample_flux_examples(cycle3, segre, irrev):
    for seed in (0, 1, 99):
        b = sample_flux(cycle3, seed=seed)
        assert b[0] > 0 and np.allclose(b, b[0])
    b = sample_flux(segre, seed=7)
    assert b[0] == b[1] and b[2] == b[3] and np.all(b > 0)
    np.testing.assert_array_equal(b, sample_flux(segre, seed=7))
    with pytest.raises(NotWeaklyReversible):
        sample_flux(irrev, seed=0)


@pytest.mark.parametrize("name", ["segre", "ab", "cycle3", "mixed"])
def test_sample_flux_balanced_and_positive(name, request):
    g = request.getfixturevalue(name)
    for seed in range(20):
        b = sample_flux(g, seed=seed)
        assert np.max(np.abs(balance_matrix(g) @ b)) <= 1e-12
        assert np.min(b) >= 1e-6 * np.max(b)


def test_phi_embedding_examples(segre, cycle3):
    np.testing.assert_allclose(phi_embedding([1, 1], [1, 1, 1, 1], segre), [1, 1, 1, 1])
    k = np.array([2.0, 3, 4, 6])
    x = np.array([1.2, 0.8])
    beta = k * np.prod(x ** segre.source_exponents, axis=1)
    np.testing.assert_allclose(phi_embedding(x, beta, segre), k, rtol=1e-14)
    kc = phi_embedding([1, 1, 1], [1, 1, 1], cycle3)
    np.testing.assert_allclose(kc, [1, 1, 1])
    assert toric_membership(cycle3, kc).is_member


def test_phi_embedding_unbalanced(segre):
    with pytest.raises(UnbalancedFlux):
        phi_embedding([1, 1], [1, 2, 1, 1], segre)


def test_phi_inverse_examples(segre):
    x, beta = phi_inverse(segre, [2, 3, 4, 6], [1, 1])
    np.testing.assert_allclose(x, [1.2, 0.8])
    # x^{y1} = 1.2^3 = 1.728, so beta_{1->2} = 2 * 1.728 = beta_{2->1} = 3 * 1.2^2 * 0.8
    np.testing.assert_allclose(beta[:2], [3.456, 3.456])
    np.testing.assert_allclose(beta[2:], [3.072, 3.072])
    x, beta = phi_inverse(segre, [1, 1, 1, 1], [1, 1])
    np.testing.assert_allclose(x, [1, 1])
    np.testing.assert_allclose(beta, [1, 1, 1, 1])


def test_phi_inverse_roundtrip_random(mixed):
    rng = np.random.default_rng(5)
    for seed in range(25):
        x = rng.uniform(0.3, 3, mixed.n)
        beta = sample_flux(mixed, seed=seed)
        k = phi_embedding(x, beta, mixed)
        x2, beta2 = phi_inverse(mixed, k, x)
        np.testing.assert_allclose(x2, x, rtol=1e-10)
        np.testing.assert_allclose(beta2, beta, rtol=1e-10)


def test_jacobian_at_unit_state(segre):
    beta = np.array([1.5, 1.5, 0.7, 0.7])
    J = phi_hat_jacobian([1, 1], beta, segre)
    np.testing.assert_allclose(J[:, 2:], np.eye(4))
    np.testing.assert_allclose(J[:, :2], -beta[:, None] * segre.source_exponents)


def test_jacobian_zero_flux_rows(segre):
    x = np.array([1.3, 0.6])
    J = phi_hat_jacobian(x, np.zeros(4), segre)
    np.testing.assert_array_equal(J[:, :2], 0)
    np.testing.assert_allclose(np.diag(J[:, 2:]), 1 / np.prod(x ** segre.source_exponents, axis=1))


@pytest.mark.parametrize("name", ["segre", "cycle3", "mixed"])
def test_jacobian_matches_finite_differences(name, request):
    g = request.getfixturevalue(name)
    rng = np.random.default_rng(11)
    for _ in range(10):
        x = rng.uniform(0.3, 3, g.n)
        beta = rng.uniform(0.2, 4, g.n_edges)
        J = phi_hat_jacobian(x, beta, g)
        F = finite_difference_jacobian(x, beta, g)
        assert np.max(np.abs(J - F)) <= 1e-6 * np.max(np.abs(J))


def test_immersion_rank_examples(segre, ab, cycle3):
    x, beta = phi_inverse(segre, [2, 3, 4, 6], [1, 1])
    rc = immersion_rank_check(x, beta, segre)
    assert (rc.rank, rc.expected, rc.passed) == (3, 3, True)
    rc = immersion_rank_check([0.7, 1.9], [2.0, 2.0], ab)
    assert (rc.rank, rc.expected, rc.passed) == (2, 2, True)
    rc = immersion_rank_check([1, 1, 1], [1, 1, 1], cycle3, stoich_decomp(cycle3), flux_space(cycle3))
    assert (rc.rank, rc.expected, rc.passed) == (3, 3, True)
