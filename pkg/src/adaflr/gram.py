"""Empirical second moments and the small dense SPD linear algebra on them.

All matrices here are at most a few dozen rows wide (the selection never
looks beyond ``floor(n**0.25)`` dimensions), so everything is dense: one
bordered Cholesky factor serves every leading principal submatrix, and
eigenvalues come from a cyclic Jacobi iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError, ConvergenceError, SingularMatrixError

PIVOT_RTOL = 1e-12
JACOBI_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 64


def jacobi_eigenvalues(A, rtol=JACOBI_RTOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm is at most
    ``rtol * ||A||_F``.

    Raises
    ------
    ConvergenceError
        If ``max_sweeps`` sweeps do not reach the tolerance.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError("jacobi_eigenvalues expects a square matrix")
    size = A.shape[0]
    if size == 0:
        return np.empty(0)
    A = 0.5 * (A + A.T)
    target = rtol * np.linalg.norm(A)
    upper = np.triu_indices(size, 1)
    for _ in range(max_sweeps):
        off = math.sqrt(2.0) * float(np.linalg.norm(A[upper]))
        if off <= target:
            return np.sort(np.diag(A).copy())
        for p in range(size - 1):
            for q in range(p + 1, size):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                colp = A[:, p].copy()
                colq = A[:, q]
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp = A[p, :].copy()
                rowq = A[q, :]
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                A[p, q] = A[q, p] = 0.0
    raise ConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps (size {size})")


def nested_cholesky(A, rtol=PIVOT_RTOL):
    """Bordered Cholesky factorization of every leading principal submatrix.

    Returns ``(L, rank)`` where ``L[:m, :m]`` is the Cholesky factor of
    ``A[:m, :m]`` for every ``m <= rank``. ``rank`` is the largest dimension
    whose pivots all exceed ``rtol`` times the largest diagonal entry of the
    leading block; the factor is not extended past the first failing pivot.
    """
    A = np.asarray(A, dtype=float)
    size = A.shape[0]
    L = np.zeros_like(A)
    for m in range(size):
        row = A[m, :m]
        if m:
            row = solve_triangular(L[:m, :m], row, lower=True, check_finite=False)
        pivot = A[m, m] - float(row @ row)
        scale = float(np.max(np.diag(A)[: m + 1]))
        if not pivot > rtol * scale:
            return L, m
        L[m, :m] = row
        L[m, m] = math.sqrt(pivot)
    return L, size


def _fsum_cols(P):
    return np.array([math.fsum(col) for col in P.T])


@dataclass(frozen=True, eq=False)
class NestedGram:
    """Empirical moments up to dimension ``M_cap`` with their nested factorization.

    Attributes
    ----------
    gamma_hat : ndarray, shape (M_cap, M_cap)
        ``n**-1 sum_i X_i X_i^T`` in basis coordinates.
    g_hat : ndarray, shape (M_cap,)
        ``n**-1 sum_i Y_i X_i``.
    sy2 : float
        ``n**-1 sum_i Y_i**2``.
    chol : ndarray
        Bordered Cholesky factor; valid on leading blocks up to ``rank``.
    rank : int
        Largest ``m`` for which the leading ``m x m`` block factorized.
    """

    n: int
    gamma_hat: np.ndarray
    g_hat: np.ndarray
    sy2: float
    chol: np.ndarray
    rank: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def M_cap(self):
        return self.gamma_hat.shape[0]

    @property
    def fail_pivot(self):
        """Index of the first failing pivot (1-based), or ``None``."""
        return None if self.rank == self.M_cap else self.rank + 1

    def is_nonsingular(self, m):
        return 1 <= m <= self.rank

    def _check_m(self, m):
        if not 1 <= m <= self.M_cap:
            raise ConfigError(f"dimension m={m} outside 1..{self.M_cap}")

    def factor(self, m):
        self._check_m(m)
        if m > self.rank:
            raise SingularMatrixError(m)
        return self.chol[:m, :m]

    def whitened_g(self, m):
        """``L_m^{-1} g_m``; its squared norm is the quadratic form in ``g``."""
        L = self.factor(m)
        return solve_triangular(L, self.g_hat[:m], lower=True, check_finite=False)


def gram_from_moments(gamma_hat, g_hat, sy2, n):
    """Build a :class:`NestedGram` from already computed moments."""
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    g_hat = np.asarray(g_hat, dtype=float)
    if gamma_hat.shape != (g_hat.size, g_hat.size):
        raise ConfigError("moment shapes disagree")
    L, rank = nested_cholesky(gamma_hat)
    return NestedGram(int(n), gamma_hat, g_hat, float(sy2), L, rank)


def accumulate(sample, M_cap):
    """Empirical moments of ``sample`` up to dimension ``M_cap``.

    Sums are exactly rounded (``math.fsum``), so the result does not depend
    on the order of the observations.
    """
    M_cap = int(M_cap)
    X = np.asarray(sample.X, dtype=float)
    Y = np.asarray(sample.Y, dtype=float)
    n = Y.size
    if M_cap < 1:
        raise ConfigError("M_cap must be >= 1")
    if X.shape[1] < M_cap:
        raise ConfigError(f"M_cap={M_cap} exceeds the {X.shape[1]} available coefficients")
    X = X[:, :M_cap]
    iu, ju = np.triu_indices(M_cap)
    prods = X[:, iu] * X[:, ju]
    upper = _fsum_cols(prods) / n
    G = np.zeros((M_cap, M_cap))
    G[iu, ju] = upper
    G[ju, iu] = upper
    g = _fsum_cols(X * Y[:, None]) / n
    sy2 = math.fsum(Y * Y) / n
    return gram_from_moments(G, g, sy2, n)


def _as_gram_parts(gram_or_matrix, m):
    """Leading matrix block and its factor, from a NestedGram or a plain matrix."""
    if isinstance(gram_or_matrix, NestedGram):
        gram_or_matrix._check_m(m)
        return gram_or_matrix.gamma_hat[:m, :m], (gram_or_matrix.factor(m) if gram_or_matrix.is_nonsingular(m) else None)
    K = np.asarray(gram_or_matrix, dtype=float)
    if not 1 <= m <= K.shape[0]:
        raise ConfigError(f"dimension m={m} outside 1..{K.shape[0]}")
    K = K[:m, :m]
    L, rank = nested_cholesky(K)
    return K, (L if rank == m else None)


def min_eigenvalue(gram, m):
    """Smallest eigenvalue of the leading ``m x m`` block (0 if numerically singular)."""
    key = ("min_eig", m)
    cache = gram._cache if isinstance(gram, NestedGram) else {}
    if key in cache:
        return cache[key]
    K, L = _as_gram_parts(gram, m)
    lam = float(jacobi_eigenvalues(K)[0])
    if L is None and lam <= JACOBI_RTOL * np.linalg.norm(K):
        lam = 0.0
    lam = max(lam, 0.0)
    cache[key] = lam
    return lam


def inv_spectral_norm(gram, m):
    """``||[K]_m^{-1}||_s``; ``inf`` when the block is singular."""
    if isinstance(gram, NestedGram) and not gram.is_nonsingular(m):
        return math.inf
    lam = min_eigenvalue(gram, m)
    return math.inf if lam == 0.0 else 1.0 / lam


def quad_form_g(gram, m):
    """``g_m^T [K]_m^{-1} g_m`` via one triangular solve.

    Raises
    ------
    SingularMatrixError
        If the leading ``m x m`` block is singular.
    """
    z = gram.whitened_g(m)
    return float(z @ z)


def weighted_inv_spectral_norm(gram_or_matrix, m, omega):
    """Largest eigenvalue of ``D^{1/2} [K]_m^{-1} D^{1/2}`` with ``D = diag(omega[:m])``.

    Parameters
    ----------
    gram_or_matrix : NestedGram or array_like
    m : int
    omega : array_like
        Weights; at least ``m`` entries.
    """
    omega = np.asarray(omega, dtype=float)[:m]
    if omega.size < m:
        raise ConfigError(f"need {m} weights, got {omega.size}")
    key = ("w_inv", omega.tobytes())
    if isinstance(gram_or_matrix, NestedGram) and key in gram_or_matrix._cache:
        return gram_or_matrix._cache[key]
    _, L = _as_gram_parts(gram_or_matrix, m)
    if L is None:
        raise SingularMatrixError(m)
    root = np.sqrt(omega)
    W = solve_triangular(L, np.diag(root), lower=True, check_finite=False)
    val = float(jacobi_eigenvalues(W.T @ W)[-1])
    if isinstance(gram_or_matrix, NestedGram):
        gram_or_matrix._cache[key] = val
    return val
