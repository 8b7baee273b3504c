"""Adaptive estimation of the slope in functional linear regression."""

from .adapt import KAPPA_GAUSSIAN, KAPPA_MOMENT, select_dimension
from .data_gen import NoiseSpec, draw_sample, load_sample, make_cov, make_slope
from .estimator import threshold_estimate
from .gram import accumulate
from .sequences import WeightConfig, custom, ep, pe, pp

__version__ = "0.1.0"

__all__ = [
    "KAPPA_GAUSSIAN",
    "KAPPA_MOMENT",
    "NoiseSpec",
    "WeightConfig",
    "accumulate",
    "custom",
    "draw_sample",
    "ep",
    "load_sample",
    "make_cov",
    "make_slope",
    "pe",
    "pp",
    "select_dimension",
    "threshold_estimate",
]
