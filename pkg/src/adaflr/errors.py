"""Exception types raised across the package."""

import numpy as np


class ConfigError(ValueError):
    """Invalid parameters or configuration values."""


class RangeError(OverflowError):
    """A weight value is not representable as a finite double."""


class ResolutionError(ValueError):
    """Sampling grid too coarse (or not uniform) for the requested projection."""


class ClassMembershipError(ValueError):
    """A slope or covariance violates its declared smoothness class."""


class SingularMatrixError(np.linalg.LinAlgError):
    """Leading principal submatrix is singular at the requested dimension."""

    def __init__(self, m, msg=None):
        self.m = m
        super().__init__(msg or f"matrix is singular at dimension m={m}")


class ConvergenceError(RuntimeError):
    """Jacobi sweeps did not reach the off-diagonal tolerance."""


class InconclusiveError(RuntimeError):
    """A brute-force scan hit its search boundary."""


class IngestionError(ValueError):
    """Input data files are malformed or inconsistent."""


class ParseError(ValueError):
    """Persisted table or JSON document could not be read back."""

    def __init__(self, msg, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(msg + where)
