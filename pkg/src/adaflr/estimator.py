"""Thresholded Galerkin projection estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from . import sequences as seq
from .gram import min_eigenvalue


@dataclass(frozen=True)
class GalerkinEstimate:
    """Estimate in dimension ``m``; all-zero exactly when ``thresholded``."""

    m: int
    coeffs: np.ndarray
    thresholded: bool
    lambda_min: float


def galerkin_solve(gram, m):
    """Solve ``[Gamma_hat]_m x = [g_hat]_m`` with the nested Cholesky factor.

    Raises
    ------
    SingularMatrixError
        If the leading block is singular.
    """
    L = gram.factor(m)
    return cho_solve((L, True), gram.g_hat[:m], check_finite=False)


def threshold_estimate(gram, m):
    """Galerkin solution if ``||[Gamma_hat]_m^{-1}||_s <= n``, the zero vector otherwise."""
    lam = min_eigenvalue(gram, m)
    if gram.is_nonsingular(m) and lam * gram.n >= 1.0:
        return GalerkinEstimate(m, galerkin_solve(gram, m), False, lam)
    return GalerkinEstimate(m, np.zeros(m), True, lam)


def omega_risk_sq(est, truth, config):
    """``||beta_hat - beta||_omega^2`` over the truth's truncation."""
    coeffs = est.coeffs if isinstance(est, GalerkinEstimate) else np.asarray(est, dtype=float)
    beta = truth.coeffs if hasattr(truth, "coeffs") else np.asarray(truth, dtype=float)
    J = max(beta.size, coeffs.size)
    diff = np.zeros(J)
    diff[: beta.size] = beta
    diff[: coeffs.size] -= coeffs
    omega = config if isinstance(config, np.ndarray) else seq.weights(config, "omega", J)
    return float(np.sum(omega[:J] * diff * diff))
