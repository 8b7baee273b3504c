"""Fully data-driven choice of the projection dimension.

The dimension is the smallest minimizer of ``Psi_m + pen_hat_m`` over
``1 <= m <= M_hat`` where

* ``Psi_m = max_{m <= k <= M_hat} (||beta_k - beta_m||_omega^2 - pen_hat_k)``,
* ``pen_hat_m = 14 * kappa * sigma_hat_m^2 * delta_hat_m / n``,
* ``sigma_hat_m^2 = 2 (mean(Y^2) + g_m^T Gamma_m^{-1} g_m)``,
* ``delta_m = m * Delta_m * log(max(Delta_m, m + 2)) / log(m + 2)`` with
  ``Delta_m`` the running maximum of ``||D_omega^{1/2} K_k^{-1} D_omega^{1/2}||_s``,
* ``M_hat`` the random upper bound given by :func:`upper_bound` applied to
  ``||Gamma_hat_m^{-1}||_s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import sequences as seq
from .estimator import GalerkinEstimate, threshold_estimate
from .gram import accumulate, inv_spectral_norm, quad_form_g, weighted_inv_spectral_norm

KAPPA_GAUSSIAN = 96.0
KAPPA_MOMENT = 288.0
PENALTY_FACTOR = 14.0
MONOTONE_SLACK = 1e-10


def quarter_root(n):
    """``floor(n ** 0.25)`` computed exactly for integers."""
    return math.isqrt(math.isqrt(int(n)))


def omega_dimension(n, omega):
    """``M_n^omega = max{1 <= m <= floor(n^1/4) : max_{k<=m} omega_k <= n}``.

    ``omega`` must hold at least ``floor(n^1/4)`` weights.
    """
    top = max(quarter_root(n), 1)
    om = seq.running_max(np.asarray(omega, dtype=float)[:top])
    ok = np.nonzero(om <= n)[0]
    return int(ok[-1]) + 1 if ok.size else 1


def upper_bound(n, omega, a):
    """``min{2 <= m <= M_n^omega : m * omega_(m) * a_m > n / (1 + log n)} - 1``.

    Falls back to ``M_n^omega`` when the set is empty. ``a`` is indexed from
    ``m = 1`` and may contain ``inf``.
    """
    M_omega = omega_dimension(n, omega)
    om = seq.running_max(np.asarray(omega, dtype=float)[:M_omega])
    a = np.asarray(a, dtype=float)
    level = n / (1.0 + math.log(n))
    for m in range(2, M_omega + 1):
        if m * om[m - 1] * a[m - 1] > level:
            return m - 1
    return M_omega


def delta_triplet(norm_values, m):
    """``(Delta_m, Lambda_m, delta_m)`` from the per-dimension norms ``k = 1..m``."""
    vals = np.asarray(norm_values, dtype=float)[:m]
    Delta = float(np.max(vals))
    Lam = math.log(max(Delta, m + 2)) / math.log(m + 2)
    return Delta, Lam, m * Delta * Lam


def delta_sequence(norm_values):
    """Vectorized :func:`delta_triplet` for every ``m = 1..len(norm_values)``."""
    vals = np.asarray(norm_values, dtype=float)
    m = np.arange(1, vals.size + 1, dtype=float)
    Delta = seq.running_max(vals)
    Lam = np.log(np.maximum(Delta, m + 2)) / np.log(m + 2)
    return Delta, Lam, m * Delta * Lam


def random_upper_bound(gram, config):
    """``(M_n^omega, M_hat)`` from the empirical inverse spectral norms."""
    n = gram.n
    omega = seq.weights(config, "omega", max(quarter_root(n), 1))
    M_omega = omega_dimension(n, omega)
    if M_omega > gram.M_cap:
        raise ValueError(f"gram covers m <= {gram.M_cap} but M_n^omega = {M_omega}")
    a = [inv_spectral_norm(gram, m) for m in range(1, M_omega + 1)]
    return M_omega, upper_bound(n, omega, a)


@dataclass
class PenaltyTable:
    """Per-dimension penalty ingredients for ``m = 1..M_hat``.

    ``truncated_from`` records the original ``M_hat`` when the nonsingular
    prefix of the empirical covariance forced a smaller upper bound.
    """

    Delta: np.ndarray
    Lambda: np.ndarray
    delta: np.ndarray
    sigma2: np.ndarray
    pen: np.ndarray
    kappa: float
    n: int
    M_omega: int
    M_hat: int
    truncated_from: int | None = None
    factor: float = PENALTY_FACTOR

    def is_monotone(self, slack=MONOTONE_SLACK):
        return bool(np.all(np.diff(self.pen) >= -slack))

    def rows(self):
        for m in range(1, self.M_hat + 1):
            yield {
                "m": m,
                "Delta": float(self.Delta[m - 1]),
                "Lambda": float(self.Lambda[m - 1]),
                "delta": float(self.delta[m - 1]),
                "sigma2": float(self.sigma2[m - 1]),
                "pen": float(self.pen[m - 1]),
            }


def penalty_values(gram, config, kappa, m_max, factor=PENALTY_FACTOR):
    """Penalty ingredients for ``m = 1..m_max``; ``m_max`` must lie in the nonsingular prefix."""
    omega = seq.weights(config, "omega", m_max)
    norms = np.array([weighted_inv_spectral_norm(gram, m, omega) for m in range(1, m_max + 1)])
    Delta, Lam, delta = delta_sequence(norms)
    z = gram.whitened_g(m_max)
    quad = np.cumsum(z * z)
    sigma2 = 2.0 * (gram.sy2 + quad)
    pen = factor * kappa * sigma2 * delta / gram.n
    return Delta, Lam, delta, sigma2, pen


def penalty_table(gram, config, kappa, M_hat=None, factor=PENALTY_FACTOR):
    """Penalty table up to ``M_hat`` (computed from the data when omitted)."""
    if M_hat is None:
        M_omega, M_hat = random_upper_bound(gram, config)
    else:
        M_omega = omega_dimension(gram.n, seq.weights(config, "omega", max(quarter_root(gram.n), 1)))
    truncated_from = None
    if M_hat > gram.rank:
        truncated_from, M_hat = M_hat, gram.rank
    if M_hat < 1:
        # [Gamma_hat]_1 itself singular: nothing estimable, penalties undefined
        inf = np.array([math.inf])
        return PenaltyTable(inf, np.array([1.0]), inf, np.array([2 * gram.sy2]), inf,
                            kappa, gram.n, M_omega, 1, truncated_from, factor)
    Delta, Lam, delta, sigma2, pen = penalty_values(gram, config, kappa, M_hat, factor)
    return PenaltyTable(Delta, Lam, delta, sigma2, pen, kappa, gram.n, M_omega, M_hat, truncated_from, factor)


def pairwise_distances(estimates, omega):
    """``D[m, k] = ||beta_k - beta_m||_omega^2`` with zero padding (0-based indices)."""
    M = len(estimates)
    B = np.zeros((M, M))
    for i, est in enumerate(estimates):
        c = est.coeffs if isinstance(est, GalerkinEstimate) else np.asarray(est, dtype=float)
        B[i, : c.size] = c
    w = np.asarray(omega, dtype=float)[:M]
    diff = B[None, :, :] - B[:, None, :]
    return np.einsum("mkj,j->mk", diff * diff, w)


def contrast_values(estimates, pen, config_or_omega):
    """``Psi_m = max_{m <= k <= M} (||beta_k - beta_m||_omega^2 - pen_k)`` for ``m = 1..M``."""
    M = len(estimates)
    pen = np.asarray(pen.pen if isinstance(pen, PenaltyTable) else pen, dtype=float)[:M]
    if isinstance(config_or_omega, seq.WeightConfig):
        omega = seq.weights(config_or_omega, "omega", M)
    else:
        omega = np.asarray(config_or_omega, dtype=float)
    D = pairwise_distances(estimates, omega)
    psi = np.empty(M)
    for m in range(M):
        psi[m] = np.max(D[m, m:] - pen[m:])
    return psi


def smallest_argmin(values):
    """1-based smallest index attaining the minimum."""
    return int(np.argmin(np.asarray(values, dtype=float))) + 1


@dataclass
class SelectionResult:
    table: PenaltyTable
    contrasts: np.ndarray
    m_hat: int
    estimate: GalerkinEstimate
    estimates: list = field(repr=False)

    @property
    def M_hat(self):
        return self.table.M_hat

    @property
    def criterion(self):
        return self.contrasts + self.table.pen


def select_from_gram(gram, config, kappa, factor=PENALTY_FACTOR):
    """Selection given precomputed moments (see :func:`select_dimension`)."""
    table = penalty_table(gram, config, kappa, factor=factor)
    M_hat = table.M_hat
    estimates = [threshold_estimate(gram, m) for m in range(1, M_hat + 1)]
    if M_hat == 1:
        contrasts = -table.pen.copy()
        m_hat = 1
    else:
        contrasts = contrast_values(estimates, table.pen, config)
        m_hat = smallest_argmin(contrasts + table.pen)
    return SelectionResult(table, contrasts, m_hat, estimates[m_hat - 1], estimates)


def select_dimension(sample, config, kappa=KAPPA_GAUSSIAN, factor=PENALTY_FACTOR):
    """Run the whole data-driven procedure on a sample.

    Parameters
    ----------
    sample : Sample
        Needs at least ``floor(n**0.25)`` regressor coefficients.
    config : WeightConfig
        Only the omega sequence is used by the procedure itself.
    kappa : float
        Penalty constant (96 under joint normality, 288 under moment
        conditions; much smaller values work better in practice).
    factor : float
        Multiplier in front of ``kappa`` in the estimated penalty.

    Returns
    -------
    SelectionResult
    """
    M_cap = max(quarter_root(sample.n), 1)
    gram = accumulate(sample, M_cap)
    return select_from_gram(gram, config, kappa, factor)
