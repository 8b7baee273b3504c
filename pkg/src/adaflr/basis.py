"""Trigonometric orthonormal basis on [0, 1].

Indexing: ``psi_1 = 1``, ``psi_{2k} = sqrt(2) cos(2 pi k t)``,
``psi_{2k+1} = sqrt(2) sin(2 pi k t)``.

Curves are mapped to coefficients with a left-rectangle rule on a uniform
grid covering one full period, which reproduces the continuous inner
products exactly for trigonometric polynomials below the Nyquist frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ResolutionError

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Grid:
    points: np.ndarray
    uniform: bool

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ConfigError("a grid needs at least 2 points")
        if np.any(pts < 0) or np.any(pts > 1):
            raise ConfigError("grid points must lie in [0, 1]")
        steps = np.diff(pts)
        if np.any(steps <= 0):
            raise ConfigError("grid points must be strictly increasing")
        if self.uniform and np.ptp(steps) > 1e-12 * steps.mean():
            raise ConfigError("grid flagged uniform but spacing is not constant")
        object.__setattr__(self, "points", pts)

    @classmethod
    def periodic(cls, size):
        """``size`` points ``i/size``, ``i = 0..size-1``."""
        return cls(np.arange(size) / size, True)

    @classmethod
    def from_points(cls, points):
        pts = np.asarray(points, dtype=float)
        steps = np.diff(pts)
        uniform = steps.size > 0 and np.all(steps > 0) and np.ptp(steps) <= 1e-12 * steps.mean()
        return cls(pts, bool(uniform))

    @property
    def size(self):
        return self.points.size


@dataclass(frozen=True)
class Curve:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.points.shape:
            raise ConfigError(f"curve has {vals.size} values for {self.grid.size} grid points")
        object.__setattr__(self, "values", vals)


def basis_eval(j, t):
    """Evaluate ``psi_j`` at ``t`` (scalar or array) in [0, 1]."""
    j = int(j)
    if j < 1:
        raise ConfigError(f"basis index must be >= 1 (got {j})")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > 1):
        raise ConfigError("basis functions are defined on [0, 1]")
    if j == 1:
        out = np.ones_like(t_arr)
    elif j % 2 == 0:
        out = _SQRT2 * np.cos(2 * np.pi * (j // 2) * t_arr)
    else:
        out = _SQRT2 * np.sin(2 * np.pi * (j // 2) * t_arr)
    return float(out) if out.ndim == 0 else out


def basis_matrix(t, m):
    """``(len(t), m)`` matrix with columns ``psi_1(t), ..., psi_m(t)``."""
    t = np.asarray(t, dtype=float)
    out = np.empty((t.size, m))
    if m == 0:
        return out
    out[:, 0] = 1.0
    for j in range(2, m + 1):
        k = j // 2
        if j % 2 == 0:
            out[:, j - 1] = _SQRT2 * np.cos(2 * np.pi * k * t)
        else:
            out[:, j - 1] = _SQRT2 * np.sin(2 * np.pi * k * t)
    return out


def quadrature_nodes(grid):
    """Nodes and common weight of the left-rectangle rule over one period.

    Accepts a periodic grid (``t_i = t_0 + i/G``) or one that also carries
    the closing point ``t_0 + 1``, which is then dropped.
    """
    if not grid.uniform:
        raise ResolutionError("projection requires a uniform grid")
    pts = grid.points
    h = float(np.mean(np.diff(pts)))
    nodes = pts
    if abs((pts[-1] - pts[0]) - 1.0) <= 1e-9:
        nodes = pts[:-1]
    if abs(nodes.size * h - 1.0) > 1e-9:
        raise ResolutionError(
            f"uniform grid with spacing {h:.6g} and {nodes.size} nodes does not cover one period of [0, 1]"
        )
    return nodes, 1.0 / nodes.size


def projection_matrix(grid, m):
    """Matrix ``P`` with ``coeffs = values[:G'] @ P`` for curves on ``grid``."""
    nodes, h = quadrature_nodes(grid)
    if nodes.size < 4 * m:
        raise ResolutionError(f"grid of {nodes.size} nodes is too coarse for m={m} (need >= {4 * m})")
    return basis_matrix(nodes, m) * h


def project_curve(curve, m):
    """Coefficient vector ``([h]_1, ..., [h]_m)`` of a sampled curve."""
    m = int(m)
    if m < 1:
        raise ConfigError("projection dimension must be >= 1")
    P = projection_matrix(curve.grid, m)
    return curve.values[: P.shape[0]] @ P


def project_values(values, grid, m):
    """Project a stack of curves (rows of ``values``) sharing one grid."""
    P = projection_matrix(grid, int(m))
    values = np.asarray(values, dtype=float)
    return values[..., : P.shape[0]] @ P


def reconstruct(coeffs, grid):
    """Curve ``sum_j coeffs_j psi_j`` evaluated on ``grid``."""
    c = np.asarray(coeffs, dtype=float).ravel()
    if not np.all(np.isfinite(c)):
        raise ConfigError("coefficients must be finite")
    if c.size == 0:
        return Curve(grid, np.zeros(grid.size))
    return Curve(grid, basis_matrix(grid.points, c.size) @ c)
