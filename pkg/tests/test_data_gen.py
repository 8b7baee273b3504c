import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaflr import sequences as seq
from adaflr.basis import Grid, basis_eval
from adaflr.data_gen import (
    CovSpec,
    NoiseSpec,
    Sample,
    SlopeSpec,
    default_truncation,
    derive_seed,
    draw_sample,
    load_sample,
    make_cov,
    make_slope,
    write_sample_csv,
)
from adaflr.errors import ClassMembershipError, ConfigError, IngestionError, ResolutionError

PP = seq.pp(0, 2, 1)


def e1(J=16):
    c = np.zeros(J)
    c[0] = 1.0
    return c


def test_smooth_poly_norm():
    slope = make_slope(PP, "smooth_poly", 50)
    j = np.arange(1, 51)
    c2 = 0.9 / np.sum(j**-2.0)
    np.testing.assert_allclose(slope.coeffs, np.sqrt(c2) * j**-3.0, rtol=1e-12)
    assert np.sum(j**4 * slope.coeffs**2) == pytest.approx(0.9, rel=1e-12)
    assert slope.b_norm == pytest.approx(0.9)


def test_custom_slopes():
    ok = make_slope(PP, "custom", coeffs=e1())
    assert ok.b_norm == pytest.approx(1.0)
    with pytest.raises(ClassMembershipError):
        make_slope(PP, "custom", coeffs=2 * e1())


def test_analytic_profile_and_truncation_guard():
    slope = make_slope(PP, "analytic", 64)
    assert slope.coeffs[1] / slope.coeffs[0] == pytest.approx(math.exp(-1))
    with pytest.raises(ClassMembershipError):
        make_slope(seq.ep(0, 2, 1), "analytic", 64)
    with pytest.raises(ConfigError):
        make_slope(seq.pp(0, 0.2, 0.6), "smooth_poly", 8)
    with pytest.raises(ConfigError):
        make_slope(PP, "smooth_poly", 4)


def test_default_truncation():
    assert default_truncation(4096) == 128
    assert default_truncation(10**12) == 4 * 1000


def test_noiseless_identity():
    slope = make_slope(PP, "custom", 16, coeffs=e1())
    cov = make_cov(PP, 16)
    s = draw_sample(slope, cov, NoiseSpec("gaussian", 0.0), 200, 5)
    np.testing.assert_array_equal(s.Y, s.X[:, 0])


def test_response_variance():
    slope = make_slope(PP, "smooth_poly", 128)
    cov = make_cov(PP, 128)
    n = 100_000
    s = draw_sample(slope, cov, NoiseSpec("gaussian", 0.5), n, 11)
    target = 0.25 + float(np.sum(cov.eigenvalues * slope.coeffs**2))
    se = math.sqrt(2.0) * target / math.sqrt(n)
    assert abs(np.var(s.Y) - target) < 3 * se


def test_regressor_covariance():
    slope = make_slope(PP, "smooth_poly", 128)
    cov = make_cov(PP, 128)
    n = 100_000
    X = draw_sample(slope, cov, NoiseSpec(), n, 3).X[:, :4]
    lam = cov.eigenvalues[:4]
    C = X.T @ X / n
    for i in range(4):
        assert abs(C[i, i] - lam[i]) < 5 * math.sqrt(2 * lam[i] ** 2 / n)
        for k in range(i + 1, 4):
            assert abs(C[i, k]) < 5 * math.sqrt(lam[i] * lam[k] / n)


@pytest.mark.parametrize("law,mu4", [("gaussian", 3.0), ("uniform", 1.8), ("laplace", 6.0)])
def test_noise_moments(law, mu4):
    n = 100_000
    slope = SlopeSpec(np.zeros(8), "custom", 0.0)
    s = draw_sample(slope, CovSpec(np.ones(8)), NoiseSpec(law, 1.0), n, 21)
    eps = s.Y
    assert abs(eps.mean()) < 5 / math.sqrt(n)
    assert abs(eps.var() - 1) < 5 * math.sqrt((mu4 - 1) / n)


def test_seeds():
    slope = make_slope(PP, "smooth_poly", 32)
    cov = make_cov(PP, 32, rotations=[(1, 2, 0.3)])
    a = draw_sample(slope, cov, NoiseSpec(), 50, 9)
    b = draw_sample(slope, cov, NoiseSpec(), 50, 9)
    c = draw_sample(slope, cov, NoiseSpec(), 50, 10)
    assert a.X.tobytes() == b.X.tobytes() and a.Y.tobytes() == b.Y.tobytes()
    assert not np.array_equal(a.Y, c.Y)


@given(st.integers(0, 2**63), st.tuples(st.integers(0, 10**6), st.integers(0, 10**4)))
def test_derive_seed_is_a_pure_function(master, key):
    assert derive_seed(master, *key) == derive_seed(master, *key)
    assert derive_seed(master, *key) != derive_seed(master, key[0], key[1] + 1)


def test_rotated_covariance():
    cov = make_cov(PP, 64, rotations=[(1, 2, 0.4), (2, 5, -0.7)])
    G = cov.matrix()
    np.testing.assert_allclose(G, G.T, atol=1e-15)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(G)), np.sort(cov.eigenvalues), rtol=1e-12, atol=1e-15)
    n = 100_000
    X = draw_sample(make_slope(PP, "smooth_poly", 64), cov, NoiseSpec(), n, 4).X
    C = X.T @ X / n
    for i, k in [(0, 1), (1, 4), (0, 4), (0, 0)]:
        se = math.sqrt((G[i, i] * G[k, k] + G[i, k] ** 2) / n)
        assert abs(C[i, k] - G[i, k]) < 5 * se


def test_d_factor():
    gamma = seq.weights(PP, "gamma", 16)
    assert make_cov(PP, 16).d_factor(gamma) == pytest.approx((1.0, 1.0), abs=1e-12)
    d_basis, d_op = make_cov(PP, 16, rotations=[(1, 2, 0.4)]).d_factor(gamma)
    assert 1.0 < d_basis <= d_op


def test_cov_validation():
    with pytest.raises(ConfigError):
        CovSpec(np.array([1.0, -1.0]))
    with pytest.raises(ConfigError):
        CovSpec(np.ones(3), rotations=[(1, 4, 0.1)])
    with pytest.raises(ConfigError):
        NoiseSpec("cauchy", 1.0)
    with pytest.raises(ConfigError):
        Sample(np.zeros(2), np.zeros((3, 2)))


def _write(tmp_path, header, rows, ys):
    c = tmp_path / "c.csv"
    y = tmp_path / "y.csv"
    c.write_text(",".join(header) + "\n" + "".join(",".join(r) + "\n" for r in rows))
    y.write_text("y\n" + "".join(f"{v}\n" for v in ys))
    return c, y


def test_load_two_curves(tmp_path):
    grid = Grid.periodic(256)
    psi2 = basis_eval(2, grid.points)
    header = [repr(float(t)) for t in grid.points]
    c, y = _write(tmp_path, header, [[repr(float(v)) for v in psi2], [repr(float(-v)) for v in psi2]], [1, -1])
    s = load_sample(c, y, 2)
    assert s.n == 2
    np.testing.assert_allclose(s.X[:, 1], [1, -1], atol=1e-9)
    np.testing.assert_allclose(s.Y, [1, -1])


def test_load_errors(tmp_path):
    header = [repr(float(t)) for t in Grid.periodic(8).points]
    c, y = _write(tmp_path, header, [["0"] * 8] * 3, [1, 2])
    with pytest.raises(IngestionError, match="3 curves.*2 responses"):
        load_sample(c, y, 1)
    c, y = _write(tmp_path, header, [["0"] * 7 + ["x"]], [1])
    with pytest.raises(IngestionError, match="line 2, column 8"):
        load_sample(c, y, 1)
    c, y = _write(tmp_path, header, [["0"] * 8], [1])
    with pytest.raises(ResolutionError):
        load_sample(c, y, 3)


def test_csv_round_trip(tmp_path):
    slope = make_slope(PP, "smooth_poly", 64)
    s = draw_sample(slope, make_cov(PP, 64), NoiseSpec(), 20, 1)
    write_sample_csv(s, tmp_path / "c.csv", tmp_path / "y.csv")
    back = load_sample(tmp_path / "c.csv", tmp_path / "y.csv", 64)
    np.testing.assert_allclose(back.X, s.X, atol=1e-9)
    np.testing.assert_allclose(back.Y, s.Y - s.Y.mean(), atol=1e-12)
