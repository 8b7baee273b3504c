"""Oracle dimensions and rates for the three weight families."""

from adaflr import sequences as seq
from adaflr import theory

configs = {"pp": seq.pp(0, 2, 1), "ep": seq.ep(0, 2, 1), "pe": seq.pe(0, 2, 1)}
for name, config in configs.items():
    print(name, theory.rate_exponent(config))
    for n in (10**3, 10**4, 10**5, 10**6):
        m_star, R_star = theory.oracle_mstar(n, config)
        dq = theory.diamond_quantities(n, config)
        print(f"   n={n:>7}: m*={m_star} R*={R_star:.3e}  M-={dq.M_minus} M+={dq.M_plus} "
              f"m_diamond={dq.m_diamond} R_diamond={dq.R_diamond:.3e}")
