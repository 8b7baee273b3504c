"""Weight sequences for the risk norm (omega), slope smoothness (b) and
eigenvalue decay (gamma).

Three closed-form families are supported, all with ``omega_j = j**(2s)``:

=====  ======================  ======================
kind   b_j                     gamma_j
=====  ======================  ======================
pp     j**(2p)                 j**(-2a)
ep     exp(j**(2p) - 1)        j**(-2a)
pe     j**(2p)                 exp(-j**(2a) + 1)
=====  ======================  ======================

plus ``custom`` finite tables. Every value is produced from its natural
logarithm so that exponential families can be compared and summed without
overflow; :func:`weights` converts to plain floats and raises
:class:`~adaflr.errors.RangeError` when a value is not representable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, RangeError

KINDS = ("pp", "ep", "pe", "custom")
WHICH = ("omega", "b", "gamma")

# log of the largest double; exp() beyond this overflows
_LOG_MAX = float(np.log(np.finfo(float).max))


@dataclass(frozen=True)
class WeightFamily:
    """One of the closed-form families, or finite custom tables.

    Parameters
    ----------
    kind : {"pp", "ep", "pe", "custom"}
    s : float
        Risk-norm exponent (``omega_j = j**(2s)``).
    p : float
        Smoothness exponent of the slope class.
    a : float
        Degree of ill-posedness.
    omega, b, gamma : tuple of float, optional
        Finite tables, required (and only used) for ``kind="custom"``.
    """

    kind: str
    s: float = 0.0
    p: float = 1.0
    a: float = 1.0
    omega: Optional[tuple] = None
    b: Optional[tuple] = None
    gamma: Optional[tuple] = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ConfigError(f"unknown weight family {self.kind!r}; expected one of {KINDS}")
        s, p, a = float(self.s), float(self.p), float(self.a)
        if kind == "pp" and not (p > 0 and a > 0.5 and p > s > -2 * a):
            raise ConfigError(f"pp family requires p > 0, a > 1/2, p > s > -2a (got s={s}, p={p}, a={a})")
        if kind == "ep" and not (p > 0 and a > 0.5 and s > -2 * a):
            raise ConfigError(f"ep family requires p > 0, a > 1/2, s > -2a (got s={s}, p={p}, a={a})")
        if kind == "pe" and not (p > 0 and a > 0 and p > s):
            raise ConfigError(f"pe family requires p > 0, a > 0, p > s (got s={s}, p={p}, a={a})")
        if kind == "custom":
            tables = {}
            for name in WHICH:
                tab = getattr(self, name)
                if tab is None:
                    raise ConfigError(f"custom family needs a {name!r} table")
                arr = np.asarray(tab, dtype=float)
                if arr.ndim != 1 or arr.size == 0:
                    raise ConfigError(f"custom {name!r} table must be a non-empty 1-d sequence")
                if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                    raise ConfigError(f"custom {name!r} table must be strictly positive and finite")
                tables[name] = tuple(float(v) for v in arr)
            for name, tab in tables.items():
                object.__setattr__(self, name, tab)

    @property
    def length(self):
        """Largest usable index (``None`` for closed-form families)."""
        if self.kind != "custom":
            return None
        return min(len(self.omega), len(self.b), len(self.gamma))


@dataclass(frozen=True)
class WeightConfig:
    """Weight family together with the class radius ``r`` and operator constant ``d``."""

    family: WeightFamily
    r: float = 1.0
    d: float = 1.0

    def __post_init__(self):
        if not self.r > 0:
            raise ConfigError(f"radius r must be positive (got {self.r})")
        if not self.d >= 1:
            raise ConfigError(f"operator constant d must be >= 1 (got {self.d})")

    @classmethod
    def from_dict(cls, cfg):
        """Build from the JSON fragment ``{"family": "pp", "s": .., "p": .., "a": .., "r": .., "d": ..}``."""
        cfg = dict(cfg)
        kind = cfg.pop("family", None)
        if kind is None:
            raise ConfigError("weight config needs a 'family' field")
        fam_keys = {k: cfg.pop(k) for k in ("s", "p", "a", "omega", "b", "gamma") if k in cfg}
        for k in ("omega", "b", "gamma"):
            if k in fam_keys:
                fam_keys[k] = tuple(fam_keys[k])
        r = float(cfg.pop("r", 1.0))
        d = float(cfg.pop("d", 1.0))
        if cfg:
            raise ConfigError(f"unknown weight config fields: {sorted(cfg)}")
        return cls(WeightFamily(kind, **fam_keys), r=r, d=d)

    def to_dict(self):
        fam = self.family
        out = {"family": fam.kind}
        if fam.kind == "custom":
            out.update(omega=list(fam.omega), b=list(fam.b), gamma=list(fam.gamma))
        else:
            out.update(s=fam.s, p=fam.p, a=fam.a)
        out.update(r=self.r, d=self.d)
        return out


def pp(s=0.0, p=2.0, a=1.0, r=1.0, d=1.0):
    return WeightConfig(WeightFamily("pp", s, p, a), r, d)


def ep(s=0.0, p=2.0, a=1.0, r=1.0, d=1.0):
    return WeightConfig(WeightFamily("ep", s, p, a), r, d)


def pe(s=0.0, p=2.0, a=1.0, r=1.0, d=1.0):
    return WeightConfig(WeightFamily("pe", s, p, a), r, d)


def custom(omega, b, gamma, r=1.0, d=1.0):
    return WeightConfig(WeightFamily("custom", omega=tuple(omega), b=tuple(b), gamma=tuple(gamma)), r, d)


def log_weights(config, which, m):
    """Natural logarithms of the first ``m`` weights of sequence ``which``."""
    if which not in WHICH:
        raise ConfigError(f"unknown sequence {which!r}; expected one of {WHICH}")
    fam = config.family
    m = int(m)
    if m < 0:
        raise ConfigError("sequence length must be nonnegative")
    if fam.kind == "custom":
        if m > fam.length:
            raise ConfigError(f"custom tables have length {fam.length}; requested {m} entries")
        return np.log(np.asarray(getattr(fam, which)[:m], dtype=float))
    j = np.arange(1, m + 1, dtype=float)
    logj = np.log(j)
    if which == "omega":
        return 2 * fam.s * logj
    if which == "b":
        if fam.kind == "ep":
            return j ** (2 * fam.p) - 1
        return 2 * fam.p * logj
    if fam.kind == "pe":
        return 1 - j ** (2 * fam.a)
    return -2 * fam.a * logj


def weights(config, which, m):
    """First ``m`` weights of sequence ``which`` as floats.

    Raises
    ------
    RangeError
        If any value overflows a double.
    """
    logw = log_weights(config, which, m)
    fam = config.family
    if fam.kind == "custom":
        return np.asarray(getattr(fam, which)[: int(m)], dtype=float)
    if logw.size and logw.max() > _LOG_MAX:
        j = int(np.argmax(logw > _LOG_MAX)) + 1
        raise RangeError(f"{which}_{j} = exp({logw[j - 1]:.6g}) is not representable as a double")
    exponent = _power_exponent(fam, which)
    if exponent is not None:
        return np.arange(1, int(m) + 1, dtype=float) ** exponent
    return np.exp(logw)


def _power_exponent(fam, which):
    """Exponent of a power-law sequence, ``None`` for the exponential ones."""
    if which == "omega":
        return 2 * fam.s
    if which == "b":
        return None if fam.kind == "ep" else 2 * fam.p
    return None if fam.kind == "pe" else -2 * fam.a


def weight_at(config, which, j):
    """Value of the ``j``-th (1-based) weight of sequence ``which``."""
    j = int(j)
    if j < 1:
        raise ConfigError(f"weight index must be >= 1 (got {j})")
    return float(weights(config, which, j)[-1])


def running_max(values):
    """``out[m-1] = max(values[:m])`` (the omega_(m) sequence when applied to omega)."""
    return np.maximum.accumulate(np.asarray(values, dtype=float))


def weighted_norm_sq(coeffs, config_or_weights, which="omega"):
    """``sum_j w_j * coeffs_j**2`` over the provided coefficients.

    ``config_or_weights`` is either a :class:`WeightConfig` (then ``which``
    selects the sequence) or an explicit array of weights.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        return 0.0
    if isinstance(config_or_weights, WeightConfig):
        if which not in ("omega", "b"):
            raise ConfigError("weighted_norm_sq supports the omega and b norms")
        w = weights(config_or_weights, which, c.size)
    else:
        w = np.asarray(config_or_weights, dtype=float)[: c.size]
    return float(np.sum(w * c * c))


@dataclass
class RegularityCheck:
    name: str
    passed: bool
    first_index: Optional[int] = None
    note: str = ""


@dataclass
class RegularityReport:
    """Outcome of :func:`check_regularity`; ``passed`` is the conjunction of all checks."""

    m_max: int
    checks: list = field(default_factory=list)
    limitation: str = (
        "only monotonicity on the finite prefix is checked; convergence to zero "
        "cannot be verified from finitely many terms"
    )

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _nonincreasing(logv, rel=1e-12):
    # compares logs so exponential families never overflow
    diff = np.diff(logv)
    slack = rel * np.maximum(1.0, np.abs(logv[1:]))
    bad = np.nonzero(diff > slack)[0]
    return (True, None) if bad.size == 0 else (False, int(bad[0]) + 2)


def check_regularity(config, m_max):
    """Check the minimal regularity conditions on the prefix ``1..m_max``.

    The checks are: first elements equal to one; ``1/b``, ``omega/b``,
    ``gamma`` and ``gamma**2/omega`` nonincreasing; summability of ``gamma``
    (decided from the family parameters, since a finite prefix cannot show it).
    Failing checks carry the first offending index.
    """
    m_max = int(m_max)
    if m_max < 2:
        raise ConfigError("check_regularity needs m_max >= 2")
    fam = config.family
    if fam.kind == "custom":
        m_max = min(m_max, fam.length)
    lo = log_weights(config, "omega", m_max)
    lb = log_weights(config, "b", m_max)
    lg = log_weights(config, "gamma", m_max)
    report = RegularityReport(m_max=m_max)

    firsts = [name for name, v in (("b", lb), ("omega", lo), ("gamma", lg)) if abs(v[0]) > 1e-12]
    if firsts:
        report.checks.append(RegularityCheck("first-element", False, 1, "not equal to 1: " + ", ".join(firsts)))
    else:
        report.checks.append(RegularityCheck("first-element", True))

    for name, logv in (
        ("b^-1 nonincreasing", -lb),
        ("omega b^-1 nonincreasing", lo - lb),
        ("gamma nonincreasing", lg),
        ("gamma^2 omega^-1 nonincreasing", 2 * lg - lo),
    ):
        ok, idx = _nonincreasing(logv)
        report.checks.append(RegularityCheck(name, ok, idx))

    if fam.kind in ("pp", "ep"):
        ok = fam.a > 0.5
        report.checks.append(RegularityCheck("gamma summable", ok, None if ok else 1, "polynomial decay needs a > 1/2"))
    elif fam.kind == "pe":
        report.checks.append(RegularityCheck("gamma summable", True, note="exponential decay"))
    else:
        report.checks.append(RegularityCheck("gamma summable", True, note="finite table; summability not decidable"))
    return report
