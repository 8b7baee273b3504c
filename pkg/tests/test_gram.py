import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from adaflr import sequences as seq
from adaflr.data_gen import NoiseSpec, Sample, draw_sample, make_cov, make_slope
from adaflr.errors import ConfigError, ConvergenceError, SingularMatrixError
from adaflr.gram import (
    accumulate,
    gram_from_moments,
    inv_spectral_norm,
    jacobi_eigenvalues,
    min_eigenvalue,
    nested_cholesky,
    quad_form_g,
    weighted_inv_spectral_norm,
)


def random_spd(rng, m, cond=1e3):
    Q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    lam = np.geomspace(1.0, 1.0 / cond, m)
    return (Q * lam) @ Q.T


@st.composite
def spd_matrices(draw, max_size=8):
    m = draw(st.integers(1, max_size))
    seed = draw(st.integers(0, 2**32 - 1))
    cond = draw(st.sampled_from([1.0, 10.0, 1e3, 1e6]))
    return random_spd(np.random.default_rng(seed), m, cond)


def sample(n=300, J=32, seed=0, rotations=()):
    cfg = seq.pp(0, 2, 1)
    return draw_sample(make_slope(cfg, "smooth_poly", J), make_cov(cfg, J, rotations), NoiseSpec("gaussian", 0.5), n, seed)


def test_hand_example():
    g = accumulate(Sample(np.array([2.0, 0.0]), np.eye(2)), 2)
    np.testing.assert_array_equal(g.gamma_hat, np.diag([0.5, 0.5]))
    np.testing.assert_array_equal(g.g_hat, [1.0, 0.0])
    assert g.sy2 == 2.0
    assert g.rank == 2 and g.fail_pivot is None
    assert min_eigenvalue(g, 2) == 0.5


def test_rank_one():
    g = accumulate(Sample(np.array([1.0]), np.array([[1.0, 1.0]])), 2)
    assert g.rank == 1 and g.fail_pivot == 2
    assert g.is_nonsingular(1) and not g.is_nonsingular(2)
    assert min_eigenvalue(g, 2) == 0.0
    assert inv_spectral_norm(g, 2) == np.inf
    with pytest.raises(SingularMatrixError) as err:
        quad_form_g(g, 2)
    assert err.value.m == 2


def test_brute_force_moments():
    s = sample()
    g = accumulate(s, 6)
    X = s.X[:, :6]
    np.testing.assert_allclose(g.gamma_hat, X.T @ X / s.n, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(g.g_hat, X.T @ s.Y / s.n, rtol=1e-12)
    np.testing.assert_allclose(g.gamma_hat, g.gamma_hat.T, rtol=0, atol=0)
    with pytest.raises(ConfigError):
        accumulate(s, 33)


def test_order_invariance():
    s = sample(rotations=[(1, 3, 0.5)])
    perm = np.random.default_rng(1).permutation(s.n)
    a = accumulate(s, 5)
    b = accumulate(Sample(s.Y[perm], s.X[perm]), 5)
    assert a.gamma_hat.tobytes() == b.gamma_hat.tobytes()
    assert a.g_hat.tobytes() == b.g_hat.tobytes() and a.sy2 == b.sy2


def test_min_eigenvalue_examples():
    assert min_eigenvalue(np.array([[2.0, 1.0], [1.0, 2.0]]), 2) == pytest.approx(1.0, rel=1e-13)


@given(spd_matrices())
def test_jacobi_against_lapack(A):
    np.testing.assert_allclose(jacobi_eigenvalues(A), np.linalg.eigvalsh(A), rtol=1e-9, atol=1e-12 * np.linalg.norm(A))


@given(spd_matrices())
def test_jacobi_determinant(A):
    L, rank = nested_cholesky(A)
    assert rank == A.shape[0]
    det = np.prod(np.diag(L)) ** 2
    assert np.prod(jacobi_eigenvalues(A)) == pytest.approx(det, rel=1e-9)


def test_jacobi_sweep_limit():
    A = random_spd(np.random.default_rng(3), 6)
    with pytest.raises(ConvergenceError):
        jacobi_eigenvalues(A, rtol=0.0, max_sweeps=1)


@given(spd_matrices())
def test_nested_cholesky(A):
    L, rank = nested_cholesky(A)
    for m in range(1, rank + 1):
        np.testing.assert_allclose(L[:m, :m] @ L[:m, :m].T, A[:m, :m], atol=1e-12 * np.abs(A).max())
        assert np.linalg.det(A[:m, :m]) > 0


def test_quad_form_examples():
    assert quad_form_g(gram_from_moments(np.eye(2), [1.0, 2.0], 1.0, 10), 2) == pytest.approx(5.0)
    assert quad_form_g(gram_from_moments(np.diag([0.5, 0.25]), [1.0, 1.0], 1.0, 10), 2) == pytest.approx(6.0)


@given(spd_matrices(), st.integers(0, 2**31))
def test_quad_form_against_inverse(A, seed):
    g = np.random.default_rng(seed).standard_normal(A.shape[0])
    gram = gram_from_moments(A, g, 1.0, 100)
    m = A.shape[0]
    assert quad_form_g(gram, m) == pytest.approx(float(g @ np.linalg.inv(A) @ g), rel=1e-10)


def test_weighted_norm_examples():
    assert weighted_inv_spectral_norm(np.diag([0.5, 0.125]), 2, [1, 4]) == pytest.approx(32.0, rel=1e-13)
    for m in (1, 3, 5):
        assert weighted_inv_spectral_norm(np.eye(5), m, np.ones(5)) == pytest.approx(1.0, rel=1e-13)
    with pytest.raises(SingularMatrixError):
        weighted_inv_spectral_norm(np.ones((2, 2)), 2, [1, 1])


def test_weighted_norm_power_iteration():
    rng = np.random.default_rng(7)
    K = random_spd(rng, 3, 50)
    omega = np.array([1.0, 4.0, 9.0])
    D = np.diag(np.sqrt(omega))
    M = D @ np.linalg.inv(K) @ D
    v = np.ones(3)
    for _ in range(2000):
        v = M @ v
        v /= np.linalg.norm(v)
    assert weighted_inv_spectral_norm(K, 3, omega) == pytest.approx(float(v @ M @ v), rel=1e-9)


@given(spd_matrices(), st.integers(0, 2**31))
def test_weighted_norm_against_explicit(A, seed):
    omega = np.sort(np.random.default_rng(seed).uniform(1, 10, A.shape[0]))
    m = A.shape[0]
    assert weighted_inv_spectral_norm(A, m, omega) == pytest.approx(oracles.weighted_norm(A, omega), rel=1e-9)
    assert weighted_inv_spectral_norm(A, m, np.ones(m)) == pytest.approx(1.0 / min_eigenvalue(A, m), rel=1e-9)


@given(st.integers(0, 2**31), st.integers(20, 400))
def test_sampled_monotonicity(seed, n):
    g = accumulate(sample(n=n, seed=seed, rotations=[(1, 2, 0.3), (2, 6, 1.1)]), 8)
    quads = [quad_form_g(g, m) for m in range(1, g.rank + 1)]
    assert all(q1 <= q2 + 1e-10 for q1, q2 in zip(quads, quads[1:]))
    lams = [min_eigenvalue(g, m) for m in range(1, 9)]
    assert all(l2 <= l1 + 1e-12 for l1, l2 in zip(lams, lams[1:]))
