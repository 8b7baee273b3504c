"""Draw one dataset and let the procedure pick the dimension."""

from adaflr import sequences as seq
from adaflr.adapt import select_dimension
from adaflr.data_gen import NoiseSpec, draw_sample, make_cov, make_slope
from adaflr.estimator import omega_risk_sq

config = seq.pp(s=0, p=2, a=1)
slope = make_slope(config, "smooth_poly", 128)
cov = make_cov(config, slope.J)
sample = draw_sample(slope, cov, NoiseSpec("gaussian", 0.5), n=2000, seed=7)

for kappa in (96.0, 0.01):
    sel = select_dimension(sample, config, kappa)
    risk = omega_risk_sq(sel.estimate, slope, config)
    print(f"kappa={kappa:g}: M_hat={sel.M_hat} m_hat={sel.m_hat} risk={risk:.3e}")
    for row, psi in zip(sel.table.rows(), sel.contrasts):
        print(f"   m={row['m']} pen={row['pen']:.3e} contrast={psi:.3e}")
print("true leading coefficients:", slope.coeffs[:4])
