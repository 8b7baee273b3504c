"""Truth-aware quantities: oracle dimensions, rates, population penalties
and approximation errors.

Everything that involves the weight sequences is evaluated from their
logarithms, so exponential families stay finite well past the point where
their raw values overflow. Argmins use the smallest-index convention.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc, logsumexp

from . import sequences as seq
from .adapt import KAPPA_GAUSSIAN, delta_sequence, omega_dimension, quarter_root, upper_bound
from .errors import ConfigError, InconclusiveError
from .gram import nested_cholesky, weighted_inv_spectral_norm

EXACT = "exact"
BOUNDED_TAIL = "bounded-tail"
TRUNCATED_SUP = "truncated-sup"


def _logcumsumexp(x):
    return np.logaddexp.accumulate(np.asarray(x, dtype=float))


def log_bias_variance(n, config, m_max):
    """Logs of ``omega_m / b_m`` and ``sum_{j<=m} omega_j / (n gamma_j)`` for ``m = 1..m_max``."""
    lo = seq.log_weights(config, "omega", m_max)
    lb = seq.log_weights(config, "b", m_max)
    lg = seq.log_weights(config, "gamma", m_max)
    return lo - lb, _logcumsumexp(lo - lg) - math.log(n)


def oracle_mstar(n, config, m_max=1000):
    """``(m*_n, R*_n)``: smallest minimizer of ``max(omega_m/b_m, sum_{j<=m} omega_j/(n gamma_j))``.

    Raises
    ------
    InconclusiveError
        If the minimizer sits at ``m_max``.
    """
    if config.family.kind == "custom":
        m_max = min(m_max, config.family.length)
    bias, var = log_bias_variance(n, config, m_max)
    crit = np.maximum(bias, var)
    m = int(np.argmin(crit)) + 1
    if m == m_max:
        raise InconclusiveError(f"m* scan reached its boundary m_max={m_max}; increase m_max")
    return m, float(math.exp(crit[m - 1]))


def log_delta_gamma(config, m_max):
    """Logs of ``Delta^gamma_m``, ``Lambda^gamma_m`` (plain) and ``delta^gamma_m``.

    In the diagonal case ``Delta^gamma_m = max_{k<=m} omega_k / gamma_k``.
    """
    lo = seq.log_weights(config, "omega", m_max)
    lg = seq.log_weights(config, "gamma", m_max)
    logDelta = np.maximum.accumulate(lo - lg)
    m = np.arange(1, m_max + 1, dtype=float)
    log_m2 = np.log(m + 2)
    Lam = np.maximum(logDelta, log_m2) / log_m2
    return logDelta, Lam, np.log(m) + logDelta + np.log(Lam)


def delta_gamma(config, m_max):
    """``(Delta^gamma, Lambda^gamma, delta^gamma)`` as floats for ``m = 1..m_max``."""
    logDelta, Lam, logdelta = log_delta_gamma(config, m_max)
    return np.exp(logDelta), Lam, np.exp(logdelta)


@dataclass(frozen=True)
class DiamondQuantities:
    M_minus: int
    M_plus: int
    m_diamond: int
    R_diamond: float
    M_omega: int


def diamond_quantities(n, config):
    """``M^-_n``, ``M^+_n``, ``m^diamond_n`` and ``R^diamond_n`` for sample size ``n``."""
    top = max(quarter_root(n), 1)
    d = config.d
    omega = seq.weights(config, "omega", top)
    lg = seq.log_weights(config, "gamma", top)
    with np.errstate(over="ignore"):
        a_minus = 16 * d**3 * np.exp(-lg)
        a_plus = np.exp(-lg) / (4 * d)
    M_minus = upper_bound(n, omega, a_minus)
    M_plus = upper_bound(n, omega, a_plus)
    lo = np.log(omega[:M_minus])
    lb = seq.log_weights(config, "b", M_minus)
    _, _, logdelta = log_delta_gamma(config, M_minus)
    crit = np.maximum(lo - lb, logdelta - math.log(n))
    m_d = int(np.argmin(crit)) + 1
    return DiamondQuantities(M_minus, M_plus, m_d, float(math.exp(crit[m_d - 1])), omega_dimension(n, omega))


@dataclass(frozen=True)
class SigmaConstant:
    """Class constant ``Sigma`` with the two sums it dominates.

    Values are stored as logarithms as well; ``value`` is ``inf`` when
    ``exp(log_value)`` overflows (which happens for exponential decay).
    """

    value: float
    log_value: float
    gamma_sum: float
    log_second_sum: float
    rigor: str


def _gamma_sum(config, m_tail):
    fam = config.family
    lg = seq.log_weights(config, "gamma", m_tail if fam.kind != "custom" else fam.length)
    head = math.exp(logsumexp(lg))
    if fam.kind == "custom":
        return head, EXACT
    if fam.kind in ("pp", "ep"):
        a = fam.a
        if a <= 0.5:
            raise ConfigError("gamma is not summable for a <= 1/2")
        # sum_{j>M} j^-2a <= int_M^inf x^-2a dx
        return head + m_tail ** (1 - 2 * a) / (2 * a - 1), BOUNDED_TAIL
    # sum_{j>M} exp(1 - j^2a) <= int_M^inf exp(1 - x^2a) dx = e Gamma(1/2a, M^2a) / 2a
    a = fam.a
    s = 1.0 / (2 * a)
    tail = math.e * gammaincc(s, m_tail ** (2 * a)) * gamma_fn(s) / (2 * a)
    return head + tail, BOUNDED_TAIL


def sigma_constant(config, m_tail=1000):
    """Constant ``Sigma >= max(sum_j gamma_j, sum_m Delta^gamma_m exp(-m Lambda^gamma_m / (16 (1 + log d))))``.

    The first sum gets an integral-comparison tail bound. The second sum is
    truncated at ``m_tail`` and completed by a geometric bound from the ratio
    of its last two terms (only when that ratio is below one; the result
    is then flagged ``bounded-tail``, otherwise ``truncated-sup``).
    """
    if m_tail < 1000 and config.family.kind != "custom":
        raise ConfigError("sigma_constant needs m_tail >= 1000")
    if config.family.kind == "custom":
        m_tail = config.family.length
    gsum, rigor = _gamma_sum(config, m_tail)
    logDelta, Lam, _ = log_delta_gamma(config, m_tail)
    m = np.arange(1, m_tail + 1, dtype=float)
    logterms = logDelta - m * Lam / (16 * (1 + math.log(config.d)))
    log_second = float(logsumexp(logterms))
    if config.family.kind != "custom":
        log_q = logterms[-1] - logterms[-2]
        if log_q < 0:
            log_tail = logterms[-1] + log_q - math.log1p(-math.exp(log_q))
            log_second = float(np.logaddexp(log_second, log_tail))
        else:
            rigor = TRUNCATED_SUP
    log_value = max(math.log(gsum), log_second)
    value = math.exp(log_value) if log_value < 709 else math.inf
    return SigmaConstant(value, log_value, gsum, log_second, rigor)


def population_moments(slope, cov, noise=None):
    """``(Gamma, g, E Y^2)`` of the simulated model (noise-free when ``noise`` is None)."""
    G = cov.matrix()
    g = G @ slope.coeffs
    sigma = 0.0 if noise is None else noise.sigma
    ey2 = sigma**2 + float(slope.coeffs @ g)
    return G, g, ey2


def population_penalties(m_max, slope, cov, noise, config, kappa=KAPPA_GAUSSIAN, n=1):
    """``(pen, sigma2, delta)`` for ``m = 1..m_max`` from the true covariance.

    ``pen_m = kappa * sigma_m^2 * delta^[Gamma]_m / n`` with
    ``sigma_m^2 = 2 (E Y^2 + g_m^T Gamma_m^{-1} g_m)``.
    """
    G, g, ey2 = population_moments(slope, cov, noise)
    G = G[:m_max, :m_max]
    L, rank = nested_cholesky(G)
    if rank < m_max:
        raise ConfigError(f"population covariance is numerically singular at m={rank + 1}")
    omega = seq.weights(config, "omega", m_max)
    norms = np.array([weighted_inv_spectral_norm(G, m, omega) for m in range(1, m_max + 1)])
    _, _, delta = delta_sequence(norms)
    z = solve_triangular(L, g[:m_max], lower=True)
    sigma2 = 2.0 * (ey2 + np.cumsum(z * z))
    return kappa * sigma2 * delta / n, sigma2, delta


def population_penalty(m, slope, cov, noise, config, kappa=KAPPA_GAUSSIAN, n=1):
    """Population penalty ``pen_m`` for a single dimension."""
    pen, _, _ = population_penalties(m, slope, cov, noise, config, kappa, n)
    return float(pen[m - 1])


def galerkin_population(slope, cov, k):
    """Population Galerkin solution ``[Gamma]_k^{-1} [Gamma beta]_k``."""
    if cov.diagonal:
        return slope.coeffs[:k].copy()
    G, g, _ = population_moments(slope, cov)
    return np.linalg.solve(G[:k, :k], g[:k])


def bias_sq(m, slope, cov, config, k_max=None):
    """``(sup_{k >= m} ||beta^k - beta||_omega^2, rigor)``.

    With a diagonal covariance the Galerkin solution is the truncation and
    the supremum sits at ``k = m``. Otherwise the supremum is scanned over
    ``k = m..k_max`` (default: the numerically nonsingular prefix).
    """
    J = slope.J
    omega = seq.weights(config, "omega", J)
    beta = slope.coeffs
    if m >= J:
        return 0.0, EXACT
    if cov.diagonal:
        return float(np.sum(omega[m:] * beta[m:] ** 2)), EXACT
    G, g, _ = population_moments(slope, cov)
    if k_max is None:
        _, rank = nested_cholesky(G)
        k_max = rank
    k_max = min(k_max, J)
    best = 0.0
    for k in range(m, k_max + 1):
        diff = beta.copy()
        diff[:k] -= np.linalg.solve(G[:k, :k], g[:k])
        best = max(best, float(np.sum(omega * diff * diff)))
    return best, (EXACT if k_max >= J else TRUNCATED_SUP)


def bias_sq_table(m_max, slope, cov, config, k_max=None):
    return np.array([bias_sq(m, slope, cov, config, k_max)[0] for m in range(1, m_max + 1)])


@dataclass(frozen=True)
class RateDescriptor:
    """Minimax rate ``n^n_exponent * (log n)^log_exponent * (log log n)^loglog_exponent``.

    ``kind`` names the dominant factor: ``n-power``, ``n-power-log``,
    ``n-power-loglog`` or ``log-power``.
    """

    family: str
    kind: str
    n_exponent: float
    log_exponent: float = 0.0
    loglog_exponent: float = 0.0

    @property
    def exponent(self):
        """Exponent of the dominant factor (of ``log n`` for ``log-power``)."""
        return self.log_exponent if self.kind == "log-power" else self.n_exponent

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        out = n**self.n_exponent * np.log(n) ** self.log_exponent
        if self.loglog_exponent:
            out = out * np.log(np.log(n)) ** self.loglog_exponent
        return out

    def __str__(self):
        return f"{self.exponent:.6f} ({self.kind})"


def rate_exponent(config):
    """Closed-form minimax rate for the pp, ep and pe families."""
    fam = config.family
    s, p, a = fam.s, fam.p, fam.a
    if fam.kind == "pp":
        if s + a > -0.5:
            return RateDescriptor("pp", "n-power", -(2 * p - 2 * s) / (2 * a + 2 * p + 1))
        if s + a < -0.5:
            return RateDescriptor("pp", "n-power", -1.0)
        return RateDescriptor("pp", "n-power-log", -1.0, 1.0)
    if fam.kind == "ep":
        if s + a > -0.5:
            return RateDescriptor("ep", "n-power-log", -1.0, (2 * a + 1 + 2 * s) / (2 * p))
        if s + a < -0.5:
            return RateDescriptor("ep", "n-power", -1.0)
        return RateDescriptor("ep", "n-power-loglog", -1.0, 0.0, 1.0)
    if fam.kind == "pe":
        return RateDescriptor("pe", "log-power", 0.0, -(p - s) / a)
    raise ConfigError("closed-form rates exist only for the pp, ep and pe families")


def rate_ratio(config, ns):
    """``R^diamond_n / R*_n`` over the given sample sizes."""
    return np.array([diamond_quantities(n, config).R_diamond / oracle_mstar(n, config)[1] for n in ns])


def risk_bound_terms(selection, slope, cov, config):
    """Both sides of the elementary risk bound for every ``m = 1..M_hat``.

    Returns ``(lhs, rhs)`` with ``lhs = ||beta_hat_{m_hat} - beta||_omega^2``
    (a scalar) and ``rhs[m-1] = 7 pen_m + 78 bias_m^2 + 42 max_{m<=k<=M}
    (||beta_hat_k - beta^k||_omega^2 - pen_k / 6)_+``.
    """
    M = selection.M_hat
    J = slope.J
    omega = seq.weights(config, "omega", J)
    beta = slope.coeffs
    est = selection.estimate.coeffs
    diff = beta.copy()
    diff[: est.size] -= est
    lhs = float(np.sum(omega * diff * diff))
    pen = selection.table.pen
    bias2 = bias_sq_table(M, slope, cov, config)
    excess = np.empty(M)
    for k in range(1, M + 1):
        d = selection.estimates[k - 1].coeffs - galerkin_population(slope, cov, k)
        excess[k - 1] = float(np.sum(omega[:k] * d * d)) - pen[k - 1] / 6
    rhs = np.array([7 * pen[m] + 78 * bias2[m] + 42 * max(np.max(excess[m:]), 0.0) for m in range(M)])
    return lhs, rhs


@dataclass
class TheoryReport:
    """Truth-aware summary for one sample size; JSON keys follow the symbol names."""

    n: int
    m_star: int
    R_star: float
    m_diamond: int
    R_diamond: float
    M_minus: int
    M_plus: int
    M_omega: int
    Sigma: float | None
    log_Sigma: float
    Sigma_rigor: str
    rate: dict
    tables: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def theory_report(n, config, slope=None, cov=None, noise=None, kappa=KAPPA_GAUSSIAN, m_table=None):
    """Collect the truth-aware quantities for sample size ``n``.

    Population penalties and approximation errors are included when the
    model specs are supplied.
    """
    m_star, R_star = oracle_mstar(n, config)
    dq = diamond_quantities(n, config)
    sig = sigma_constant(config)
    m_table = m_table or max(dq.M_omega, m_star)
    bias, var = log_bias_variance(n, config, m_table)
    Delta, Lam, delta = log_delta_gamma(config, m_table)
    tables = {
        "m": list(range(1, m_table + 1)),
        "omega_over_b": np.exp(bias).tolist(),
        "variance_sum": np.exp(var).tolist(),
        "Delta_gamma": np.exp(Delta).tolist(),
        "Lambda_gamma": Lam.tolist(),
        "delta_gamma": np.exp(delta).tolist(),
    }
    if slope is not None and cov is not None and noise is not None:
        m_pen = min(m_table, nested_cholesky(cov.matrix(m_table))[1])
        pen, sigma2, _ = population_penalties(m_pen, slope, cov, noise, config, kappa, n)
        tables["pen"] = pen.tolist()
        tables["sigma2"] = sigma2.tolist()
        tables["bias2"] = bias_sq_table(m_table, slope, cov, config).tolist()
    try:
        rate = asdict(rate_exponent(config))
    except ConfigError:
        rate = {}
    return TheoryReport(
        n=int(n),
        m_star=m_star,
        R_star=R_star,
        m_diamond=dq.m_diamond,
        R_diamond=dq.R_diamond,
        M_minus=dq.M_minus,
        M_plus=dq.M_plus,
        M_omega=dq.M_omega,
        Sigma=None if math.isinf(sig.value) else sig.value,
        log_Sigma=sig.log_value,
        Sigma_rigor=sig.rigor,
        rate=rate,
        tables=tables,
    )
