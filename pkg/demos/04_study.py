"""Calibrate kappa, run a small Monte Carlo study and fit the risk slope.

Writes its outputs to ./demo_study. The replication count is kept small
so the script finishes in seconds; the acceptance suite uses 200.
"""

from adaflr import sequences as seq
from adaflr.data_gen import NoiseSpec
from adaflr.harness import StudySpec, calibrate_kappa, fit_rate, run_study

spec = StudySpec(config=seq.pp(0, 2, 1), n_grid=(256, 512, 1024, 2048, 4096), replications=40,
                 noise=NoiseSpec("gaussian", 0.5), out_dir="demo_study")
grid = tuple(96.0 * 2.0**-k for k in range(21))
cal = calibrate_kappa(spec, grid, replications=50)
print("median m_hat along the grid:", cal.medians)
print("calibrated kappa:", cal.kappa)

spec.kappa = cal.kappa
result = run_study(spec, threads=4)
for row in result.risk.rows:
    print(f"n={row.n:>5} {row.method:<21} risk={row.mean_risk:.3e} (se {row.stderr:.1e}) m={row.mean_mhat:.2f}")
fit = fit_rate(result.risk)
print(f"fitted slope {fit.slope:.3f} +/- {fit.stderr:.3f}; theoretical -4/7 = {-4 / 7:.3f}")
