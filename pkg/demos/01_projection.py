"""Project a sampled curve on the trigonometric basis and rebuild it."""

import numpy as np

from adaflr.basis import Grid, project_values, reconstruct

grid = Grid.periodic(256)
t = grid.points
curve = 1.0 + np.sin(2 * np.pi * t) - 0.5 * np.cos(4 * np.pi * t)

for m in (1, 3, 5, 9):
    coeffs = project_values(curve, grid, m)
    err = np.max(np.abs(reconstruct(coeffs, grid) - curve))
    print(f"m={m}: coefficients {np.round(coeffs, 4)}  max reconstruction error {err:.2e}")
