"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The protocol is fixed up front: master seed 0, kappa calibrated by the
dimension jump over ``96 * 2**-k`` (k = 0..20) with 50 preliminary samples
at the largest sample size of the study, then 200 replications.
Lines are collected by ``record`` and printed in the terminal summary.
"""

import filecmp

import numpy as np
import pytest

from adaflr import sequences as seq
from adaflr import theory
from adaflr.adapt import delta_triplet, select_dimension
from adaflr.basis import Grid, basis_matrix, projection_matrix
from adaflr.data_gen import NoiseSpec, derive_seed, draw_sample, make_cov, make_slope
from adaflr.estimator import galerkin_solve, omega_risk_sq, threshold_estimate
from adaflr.gram import accumulate, weighted_inv_spectral_norm
from adaflr.harness import StudySpec, calibrate_kappa, fit_rate, run_study

import oracles

SEED = 0
KAPPA_GRID = tuple(96.0 * 2.0**-k for k in range(21))
N_GRID = (256, 512, 1024, 2048, 4096)
NOISE = NoiseSpec("gaussian", 0.5)
DESK = {"pp": seq.pp(0, 2, 1), "ep": seq.ep(0, 2, 1), "pe": seq.pe(0, 2, 1)}

RESULTS = {}


def record(key, ok, detail):
    RESULTS[key] = (bool(ok), detail)
    print(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")


def calibrated_study(config, n_grid, replications=200):
    spec = StudySpec(config=config, n_grid=n_grid, replications=replications, seed=SEED, noise=NOISE)
    cal = calibrate_kappa(spec, KAPPA_GRID, replications=50)
    spec.kappa = cal.kappa
    return run_study(spec, threads=4, write=False), cal


@pytest.fixture(scope="module")
def pp_study():
    return calibrated_study(DESK["pp"], N_GRID)


@pytest.fixture(scope="module")
def pe_study():
    return calibrated_study(DESK["pe"], N_GRID)


def test_1_polynomial_rate(pp_study):
    result, cal = pp_study
    fit = fit_rate(result.risk, "adaptive")
    target = -4 / 7
    ok = abs(fit.slope - target) <= 0.15
    record("1 rate pp", ok, f"slope {fit.slope:.4f} (target {target:.4f} +/- 0.15), kappa {cal.kappa:.4g}")
    assert ok


def test_2_logarithmic_rate(pe_study):
    result, cal = pe_study
    fit = fit_rate(result.risk, "adaptive", family="pe")
    _, risk = result.risk.series("adaptive")
    monotone = bool(np.all(np.diff(risk) <= 0))
    ok = abs(fit.slope + 2) <= 0.5 and monotone
    record("2 rate pe", ok, f"slope on log log n {fit.slope:.4f} (target -2 +/- 0.5), "
                            f"monotone {monotone}, kappa {cal.kappa:.4g}")
    assert ok


def test_3_empirical_oracle_inequality():
    ratios = {}
    for kind, config in DESK.items():
        result, _ = calibrated_study(config, (1024,))
        adaptive = result.risk.row(1024, "adaptive").mean_risk
        best = result.risk.row(1024, "best_fixed_empirical").mean_risk
        ratios[kind] = adaptive / best
    ok = all(r <= 10 for r in ratios.values())
    record("3 oracle inequality", ok, "adaptive/best fixed " + ", ".join(f"{k} {r:.3f}" for k, r in ratios.items()))
    assert ok


def test_4_risk_bound_every_dimension():
    config, n = DESK["pp"], 512
    slope = make_slope(config, "smooth_poly", 128)
    cov = make_cov(config, slope.J)
    checked, violations, worst = 0, 0, 0.0
    for rep in range(100):
        sample = draw_sample(slope, cov, NOISE, n, derive_seed(SEED, 2, n, rep))
        sel = select_dimension(sample, config)
        if not sel.table.is_monotone():
            continue
        checked += 1
        lhs, rhs = theory.risk_bound_terms(sel, slope, cov, config)
        violations += int(np.sum(lhs > rhs))
        worst = max(worst, float(lhs / np.min(rhs)))
    ok = checked == 100 and violations == 0
    record("4 risk bound", ok, f"{checked} replications checked, {violations} violations, max lhs/rhs {worst:.3g}")
    assert ok


def test_5_penalty_monotone():
    rng = np.random.default_rng(SEED)
    configs = [seq.pp(0, 2, 1), seq.pp(-1, 1.5, 0.75), seq.pp(1, 3, 1), seq.ep(0, 1, 1), seq.ep(0.5, 2, 0.75),
               seq.pe(0, 2, 1), seq.pe(-0.5, 1, 0.5)]
    bad = 0
    for i in range(1000):
        config = configs[i % len(configs)]
        n = int(rng.integers(16, 3000))
        slope = make_slope(config, "smooth_poly", 128)
        cov = make_cov(config, slope.J)
        sample = draw_sample(slope, cov, NOISE, n, derive_seed(SEED, 3, n, i))
        kappa = float(10 ** rng.uniform(-4, 2.5))
        bad += not select_dimension(sample, config, kappa).table.is_monotone()
    ok = bad == 0
    record("5 penalty monotone", ok, f"{bad} of 1000 datasets out of order")
    assert ok


def test_6_event_sandwich(pp_study):
    result, _ = pp_study
    ev = result.events
    low, high = ev.row(N_GRID[0]).freq_M_sandwich, ev.row(N_GRID[-1]).freq_M_sandwich
    fails = {n: ev.row(n).freq_threshold_fail for n in N_GRID if n >= 1024}
    ok = high >= low and all(f <= 0.05 for f in fails.values())
    record("6 event sandwich", ok, f"freq n=256 {low:.3f}, n=4096 {high:.3f}, "
                                   f"threshold fail max {max(fails.values()):.3f}")
    assert ok


def _random_config(rng):
    kind = rng.choice(["pp", "ep", "pe"])
    a = float(rng.uniform(0.55, 1.5))
    p = float(rng.uniform(1.5, 3.0))
    s = float(rng.uniform(-min(a, 1.0), min(p - 1.0, 0.5)))
    if kind == "ep":
        s = min(s, p)
    d = float(rng.uniform(1.0, 2.0))
    return getattr(seq, str(kind))(s, p, a, d=d)


def test_7_numerical_oracles():
    rng = np.random.default_rng(SEED)
    residual, rel = 0.0, 0.0

    for i in range(20):
        config = _random_config(rng)
        f = config.family
        n = int(rng.integers(256, 200_000))

        m_ref, R_ref = oracles.mstar(n, f.kind, f.s, f.p, f.a)
        m, R = theory.oracle_mstar(n, config)
        assert m == m_ref
        rel = max(rel, abs(R - R_ref) / R_ref)

        Mm, Mp, md, Rd = oracles.diamond(n, f.kind, f.s, f.p, f.a, config.d)
        dq = theory.diamond_quantities(n, config)
        assert (dq.M_minus, dq.M_plus, dq.m_diamond) == (Mm, Mp, md)
        rel = max(rel, abs(dq.R_diamond - Rd) / Rd)

        slope = make_slope(config, "smooth_poly", 1024)
        cov = make_cov(config, slope.J, rotations=((1, 2, 0.3), (2, 4, -0.5)))
        G, g, ey2 = theory.population_moments(slope, cov, NOISE)
        # stay where the population covariance is comfortably invertible
        top = max(1, min(6, int(np.sum(cov.eigenvalues >= 1e-6))))
        omega = seq.weights(config, "omega", top)
        pen, _, _ = theory.population_penalties(top, slope, cov, NOISE, config, 96.0, n)
        for k in range(1, top + 1):
            norms = [oracles.weighted_norm(G[:j, :j], omega[:j]) for j in range(1, k + 1)]
            Delta, Lam, delta = oracles.delta_triplet(norms, k)
            ref = (Delta, Lam, delta, oracles.penalty(k, G, g, ey2, omega, 96.0, n))
            ours_norms = [weighted_inv_spectral_norm(G, j, omega) for j in range(1, k + 1)]
            ours = (*delta_triplet(ours_norms, k), pen[k - 1])
            rel = max(rel, max(abs(x - y) / abs(y) for x, y in zip(ours, ref)))

        sample = draw_sample(slope, cov, NOISE, 400, derive_seed(SEED, 4, 400, i))
        gram = accumulate(sample, 4)
        for k in range(1, gram.rank + 1):
            x = galerkin_solve(gram, k)
            r = np.linalg.norm(gram.gamma_hat[:k, :k] @ x - gram.g_hat[:k]) / (1 + np.linalg.norm(gram.g_hat[:k]))
            residual = max(residual, float(r))

    gram_err = 0.0
    for size, m in ((64, 16), (256, 64), (1024, 100)):
        grid = Grid.periodic(size)
        P = projection_matrix(grid, m)
        B = basis_matrix(grid.points[: P.shape[0]], m)
        gram_err = max(gram_err, float(np.max(np.abs(B.T @ P - np.eye(m)))))

    ok = residual <= 1e-10 and rel <= 1e-9 and gram_err <= 1e-10
    record("7 numerical oracles", ok, f"residual {residual:.2e}, max relative mismatch {rel:.2e}, "
                                      f"quadrature gram {gram_err:.2e}")
    assert ok


def test_8_diagonal_truncation():
    config, n, m = DESK["pp"], 10_000, 4
    slope = make_slope(config, "smooth_poly", 128)
    cov = make_cov(config, slope.J)
    assert np.array_equal(theory.galerkin_population(slope, cov, m), slope.coeffs[:m])
    omega = seq.weights(config, "omega", m)
    dists = []
    for rep in range(50):
        sample = draw_sample(slope, cov, NOISE, n, derive_seed(SEED, 5, n, rep))
        est = threshold_estimate(accumulate(sample, m), m)
        dists.append(omega_risk_sq(est, slope.coeffs[:m], omega))
    mean = float(np.mean(dists))
    ok = mean < 0.05
    record("8 diagonal truncation", ok, f"mean omega distance {mean:.3e} over 50 replications")
    assert ok


def test_9_thread_determinism(tmp_path):
    same = True
    for threads in (2, 5):
        dirs = []
        for t in (1, threads):
            out = tmp_path / f"t{threads}_{t}"
            spec = StudySpec(config=DESK["pp"], n_grid=(128, 256, 512), replications=30, kappa=0.01,
                             seed=SEED, noise=NOISE, out_dir=str(out))
            run_study(spec, threads=t)
            dirs.append(out)
        for name in ("risk_table.csv", "events.csv"):
            same &= filecmp.cmp(dirs[0] / name, dirs[1] / name, shallow=False)
    record("9 determinism", same, "CSV outputs byte-identical for 1, 2 and 5 threads" if same else "CSV outputs differ")
    assert same
