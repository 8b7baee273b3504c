"""Simulated and file-based samples for the functional linear model
``Y = <beta, X> + sigma * eps``.

Regressors are generated directly in basis coordinates: independent
coordinates ``sqrt(lambda_j) Z_j``, optionally mixed by a list of Givens
rotations so that the eigenbasis of the covariance differs from the basis
used for estimation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import sequences as seq
from .basis import Grid, project_values
from .errors import ClassMembershipError, ConfigError, IngestionError

LAWS = ("gaussian", "uniform", "laplace")
PROFILES = ("smooth_poly", "analytic", "custom")
DEFAULT_TRUNCATION = 128

# purpose codes for seed splitting
_REGRESSOR, _NOISE = 0, 1


@dataclass(frozen=True)
class SlopeSpec:
    coeffs: np.ndarray
    profile: str
    b_norm: float

    @property
    def J(self):
        return self.coeffs.size


@dataclass(frozen=True)
class CovSpec:
    """Covariance ``Q diag(eigenvalues) Q^T`` with ``Q`` a product of Givens rotations.

    ``rotations`` holds ``(i, k, theta)`` triples with 1-based indices; ``Q``
    is their product in list order. ``law`` is the distribution of the
    standardized coordinates ``Z``.
    """

    eigenvalues: np.ndarray
    rotations: tuple = ()
    law: str = "gaussian"

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.ndim != 1 or lam.size == 0 or np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ConfigError("eigenvalues must be a finite nonnegative 1-d sequence")
        object.__setattr__(self, "eigenvalues", lam)
        rots = tuple((int(i), int(k), float(th)) for i, k, th in self.rotations)
        for i, k, _ in rots:
            if not (1 <= i <= lam.size and 1 <= k <= lam.size and i != k):
                raise ConfigError(f"rotation indices ({i}, {k}) invalid for truncation {lam.size}")
        object.__setattr__(self, "rotations", rots)
        if self.law not in LAWS:
            raise ConfigError(f"unknown regressor law {self.law!r}; expected one of {LAWS}")

    @property
    def J(self):
        return self.eigenvalues.size

    @property
    def diagonal(self):
        return not self.rotations

    def rotate(self, V):
        """Apply ``Q`` to the rows of ``V`` (shape ``(..., J)``), in place."""
        for i, k, theta in reversed(self.rotations):
            c, s = math.cos(theta), math.sin(theta)
            vi = V[..., i - 1].copy()
            vk = V[..., k - 1]
            V[..., i - 1] = c * vi - s * vk
            V[..., k - 1] = s * vi + c * vk
        return V

    def matrix(self, m=None):
        """Leading ``m x m`` block of the covariance matrix."""
        m = self.J if m is None else m
        Q = self.rotate(np.eye(self.J).T.copy()).T
        G = (Q * self.eigenvalues) @ Q.T
        return G[:m, :m]

    def touched(self):
        return sorted({i for i, _, _ in self.rotations} | {k for _, k, _ in self.rotations})

    def d_factor(self, gamma):
        """Smallest ``d`` with ``d^-2 ||f||_{gamma^2} <= ||Gamma f|| ^2 <= d^2 ||f||_{gamma^2}``.

        Returned as ``(d_basis, d_operator)``: the first uses basis vectors
        only, the second the exact operator norms. Indices untouched by the
        rotations contribute the ratio ``lambda_j / gamma_j`` directly.
        """
        gamma = np.asarray(gamma, dtype=float)[: self.J]
        G = self.matrix()
        ratios = []
        for j in range(self.J):
            if gamma[j] > 0 and self.eigenvalues[j] > 0:
                r = np.linalg.norm(G[:, j]) / gamma[j]
                ratios.append(max(r, 1 / r))
        d_basis = max(ratios) if ratios else 1.0
        T = [t - 1 for t in self.touched()]
        untouched = [j for j in range(self.J) if j not in set(T) and gamma[j] > 0 and self.eigenvalues[j] > 0]
        d_op = max([max(self.eigenvalues[j] / gamma[j], gamma[j] / self.eigenvalues[j]) for j in untouched] or [1.0])
        if T:
            GT = G[np.ix_(T, T)]
            DT = np.diag(gamma[T])
            d_op = max(
                d_op,
                np.linalg.norm(GT @ np.linalg.inv(DT), 2),
                np.linalg.norm(DT @ np.linalg.inv(GT), 2),
            )
        return float(d_basis), float(d_op)


@dataclass(frozen=True)
class NoiseSpec:
    law: str = "gaussian"
    sigma: float = 1.0

    def __post_init__(self):
        if self.law not in LAWS:
            raise ConfigError(f"unknown noise law {self.law!r}; expected one of {LAWS}")
        if not self.sigma >= 0:
            raise ConfigError("sigma must be nonnegative")


@dataclass(frozen=True)
class Sample:
    Y: np.ndarray
    X: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or Y.ndim != 1 or X.shape[0] != Y.size:
            raise ConfigError("Sample needs Y of shape (n,) and X of shape (n, J)")
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
            raise ConfigError("Sample contains non-finite values")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)

    @property
    def n(self):
        return self.Y.size

    @property
    def J(self):
        return self.X.shape[1]


def _profile_logs(config, profile, jmax):
    j = np.arange(1, jmax + 1, dtype=float)
    if profile == "smooth_poly":
        # j^-1 b_j^-1/2, which is j^(-p-1) for polynomial b
        return -np.log(j) - 0.5 * seq.log_weights(config, "b", jmax)
    return -j


def make_slope(config, profile="smooth_poly", J=DEFAULT_TRUNCATION, coeffs=None, fill=0.9):
    """Slope coefficients inside the ellipsoid ``{||beta||_b^2 <= r}``.

    ``smooth_poly`` uses ``c * j**-1 * b_j**-1/2`` (``c * j**(-p-1)`` for the
    polynomial families) and ``analytic`` uses ``c * exp(-j)``; ``c`` is set
    so that ``||beta||_b^2 = fill * r``. ``custom`` validates ``coeffs``
    against the ellipsoid.

    Raises
    ------
    ClassMembershipError
        If custom coefficients leave the ellipsoid, or a profile has no
        finite b-norm under the family.
    ConfigError
        If the truncated tail would be visible (see below).

    Notes
    -----
    The neglected tail beyond ``J`` (evaluated to ``16 J``) must satisfy
    ``sum gamma_j beta_j^2 < 1e-6 * sum_{j<=J} gamma_j beta_j^2`` and
    ``sum omega_j beta_j^2 < 1e-8 * ||beta||_omega^2``.
    """
    if profile not in PROFILES:
        raise ConfigError(f"unknown slope profile {profile!r}; expected one of {PROFILES}")
    r = config.r
    if profile == "custom":
        if coeffs is None:
            raise ConfigError("custom profile needs coefficients")
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ConfigError("custom coefficients must be a finite 1-d sequence")
        J = max(int(J), c.size) if config.family.kind != "custom" else c.size
        full = np.zeros(J)
        full[: c.size] = c
        nz = np.nonzero(full)[0]
        lb = seq.log_weights(config, "b", J)
        if nz.size:
            bnorm = math.exp(logsumexp(lb[nz] + 2 * np.log(np.abs(full[nz]))))
        else:
            bnorm = 0.0
        if bnorm > r * (1 + 1e-12):
            raise ClassMembershipError(f"||beta||_b^2 = {bnorm:.6g} exceeds the radius r = {r}")
        return SlopeSpec(full, "custom", bnorm)

    J = int(J)
    if J < 8:
        raise ConfigError("slope truncation J must be >= 8")
    kind = config.family.kind
    jmax = J if kind == "custom" else 16 * J
    logs = _profile_logs(config, profile, jmax)
    lb = seq.log_weights(config, "b", jmax)
    log_bsum = logsumexp(lb[:J] + 2 * logs[:J])
    if log_bsum > 700:
        raise ClassMembershipError(f"{profile} profile has no usable finite b-norm under the {kind} family")
    log_c = 0.5 * (math.log(fill * r) - log_bsum)
    coeffs = np.exp(log_c + logs[:J])
    if kind != "custom":
        lg = seq.log_weights(config, "gamma", jmax)
        lo = seq.log_weights(config, "omega", jmax)
        head_var = logsumexp(lg[:J] + 2 * logs[:J])
        tail_var = logsumexp(lg[J:] + 2 * logs[J:])
        head_om = logsumexp(lo[:J] + 2 * logs[:J])
        tail_om = logsumexp(lo[J:] + 2 * logs[J:])
        if tail_var - head_var > math.log(1e-6) or tail_om - head_om > math.log(1e-8):
            raise ConfigError(f"truncation J={J} leaves a visible tail for the {profile} profile; increase J")
    return SlopeSpec(coeffs, profile, fill * r)


def make_cov(config, J=DEFAULT_TRUNCATION, rotations=(), law="gaussian"):
    """Covariance with eigenvalues ``gamma_1..gamma_J`` (underflow to 0 allowed)."""
    lg = seq.log_weights(config, "gamma", J)
    return CovSpec(np.exp(lg), tuple(rotations), law)


def default_truncation(n_max, config=None):
    """``max(4 * M_n^omega, 128)`` for the largest sample size of a study."""
    m = math.isqrt(math.isqrt(int(n_max)))
    return max(4 * m, DEFAULT_TRUNCATION)


def derive_seed(master, *key):
    """64-bit seed for the substream ``key`` of ``master``.

    Splitting goes through :class:`numpy.random.SeedSequence` with
    ``spawn_key=key``, so a substream depends only on ``(master, key)``
    and never on the order in which substreams are requested.
    """
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _standard(rng, law, shape):
    if law == "gaussian":
        return rng.standard_normal(shape)
    if law == "uniform":
        s3 = math.sqrt(3.0)
        return rng.uniform(-s3, s3, shape)
    return rng.laplace(0.0, 1.0 / math.sqrt(2.0), shape)


def draw_sample(slope, cov, noise, n, seed):
    """Draw ``n`` i.i.d. pairs; deterministic given ``seed``."""
    n = int(n)
    if n < 1:
        raise ConfigError("n must be >= 1")
    if slope.J != cov.J:
        raise ConfigError(f"slope truncation {slope.J} differs from covariance truncation {cov.J}")
    rng_x = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(_REGRESSOR,)))
    rng_e = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(_NOISE,)))
    X = _standard(rng_x, cov.law, (n, cov.J))
    X *= np.sqrt(cov.eigenvalues)
    cov.rotate(X)
    eps = _standard(rng_e, noise.law, n)
    Y = X @ slope.coeffs + noise.sigma * eps
    return Sample(Y, X, {"seed": int(seed)})


def _read_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc


def _floats(row, lineno, path):
    out = []
    for col, cell in enumerate(row, start=1):
        try:
            out.append(float(cell))
        except ValueError:
            raise IngestionError(f"{path}: non-numeric cell {cell!r} at line {lineno}, column {col}") from None
    return out


def load_sample(curves_path, responses_path, m_project, center_curves=False):
    """Read sampled curves and responses and project the curves.

    ``curves_path`` holds a header row of grid points then one curve per
    row; ``responses_path`` a single ``y`` column. Responses are centered.
    """
    rows = _read_csv(curves_path)
    if len(rows) < 2:
        raise IngestionError(f"{curves_path}: need a header row and at least one curve")
    header = [c.strip() for c in rows[0]]
    try:
        grid_pts = [float(h) for h in header]
    except ValueError:
        raise IngestionError(f"{curves_path}: header must list the grid points") from None
    try:
        grid = Grid.from_points(grid_pts)
    except ConfigError as exc:
        raise IngestionError(f"{curves_path}: {exc}") from exc
    curves = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        vals = _floats(row, lineno, curves_path)
        if len(vals) != grid.size:
            raise IngestionError(f"{curves_path}: line {lineno} has {len(vals)} values for {grid.size} grid points")
        curves.append(vals)

    resp = _read_csv(responses_path)
    if not resp or [c.strip().lower() for c in resp[0]] != ["y"]:
        raise IngestionError(f"{responses_path}: expected a single 'y' column header")
    ys = []
    for lineno, row in enumerate(resp[1:], start=2):
        if not row:
            continue
        if len(row) != 1:
            raise IngestionError(f"{responses_path}: line {lineno} must hold exactly one value")
        ys.extend(_floats(row, lineno, responses_path))
    if len(ys) != len(curves):
        raise IngestionError(f"row-count mismatch: {len(curves)} curves in {curves_path} vs {len(ys)} responses in {responses_path}")

    values = np.asarray(curves)
    X = project_values(values, grid, m_project)
    if center_curves:
        X = X - X.mean(axis=0)
    Y = np.asarray(ys)
    Y = Y - Y.mean()
    return Sample(Y, X, {"curves": str(curves_path), "responses": str(responses_path)})


def write_sample_csv(sample, curves_path, responses_path, grid_size=None):
    """Write a sample as sampled curves plus responses (inverse of :func:`load_sample`)."""
    from .basis import basis_matrix

    G = grid_size or 4 * sample.J
    grid = Grid.periodic(G)
    curves = sample.X @ basis_matrix(grid.points, sample.J).T
    with open(curves_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([repr(float(t)) for t in grid.points])
        for row in curves:
            w.writerow([repr(float(v)) for v in row])
    with open(responses_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["y"])
        for y in sample.Y:
            w.writerow([repr(float(y))])
