"""Monte Carlo studies of the data-driven estimator.

For every sample size ``n`` of a grid and every replication the harness
draws a sample, runs the data-driven selection, evaluates the estimator at
the oracle dimension ``m*_n`` and at every fixed dimension ``1..M_n^omega``,
and records event diagnostics against the population quantities.

Each replication draws from its own seed, derived from
``(master seed, n, replication)``, and aggregation runs over arrays
indexed by replication, so results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import sequences as seq
from . import theory
from .adapt import KAPPA_GAUSSIAN, PENALTY_FACTOR, penalty_values, quarter_root, select_from_gram
from .data_gen import NoiseSpec, default_truncation, derive_seed, draw_sample, make_cov, make_slope
from .errors import ConfigError, ParseError
from .estimator import omega_risk_sq, threshold_estimate
from .gram import accumulate

METHODS = ("adaptive", "oracle_mstar", "best_fixed_empirical")
RISK_COLUMNS = ("n", "method", "mean_risk", "stderr", "mean_mhat", "median_mhat", "threshold_fail_rate")
EVENT_COLUMNS = ("n", "freq_M_sandwich", "freq_pen_sandwich", "freq_threshold_fail")
PEN_SANDWICH = 72.0

# seed purposes
_STUDY, _CALIBRATION = 0, 1


@dataclass
class StudySpec:
    config: seq.WeightConfig
    n_grid: tuple
    replications: int = 200
    kappa: float = KAPPA_GAUSSIAN
    seed: int = 0
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec("gaussian", 0.5))
    slope_profile: str = "smooth_poly"
    slope_coeffs: tuple | None = None
    rotations: tuple = ()
    regressor_law: str = "gaussian"
    truncation: int | None = None
    penalty_factor: float = PENALTY_FACTOR
    out_dir: str | None = None

    def __post_init__(self):
        self.n_grid = tuple(int(n) for n in self.n_grid)
        if not self.n_grid:
            raise ConfigError("n_grid must not be empty")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be strictly increasing")
        if self.n_grid[0] < 1:
            raise ConfigError("sample sizes must be positive")
        if int(self.replications) < 2:
            raise ConfigError("a study needs at least 2 replications")
        self.replications = int(self.replications)
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if self.truncation is None:
            self.truncation = default_truncation(self.n_grid[-1])
        self.rotations = tuple(tuple(r) for r in self.rotations)

    def model(self):
        """``(slope, cov)`` specs implied by this study."""
        slope = make_slope(self.config, self.slope_profile, self.truncation, self.slope_coeffs)
        cov = make_cov(self.config, slope.J, self.rotations, self.regressor_law)
        return slope, cov

    def to_dict(self):
        return {
            "weights": self.config.to_dict(),
            "n_grid": list(self.n_grid),
            "replications": self.replications,
            "kappa": self.kappa,
            "seed": self.seed,
            "noise": {"law": self.noise.law, "sigma": self.noise.sigma},
            "slope": {"profile": self.slope_profile, "coeffs": None if self.slope_coeffs is None else list(self.slope_coeffs)},
            "cov": {"rotations": [list(r) for r in self.rotations], "law": self.regressor_law},
            "truncation": self.truncation,
            "penalty_factor": self.penalty_factor,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {"weights", "n_grid", "replications", "kappa", "seed", "noise", "slope", "cov",
                 "truncation", "penalty_factor", "out_dir"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown study fields: {sorted(extra)}")
        if "weights" not in d or "n_grid" not in d:
            raise ConfigError("study config needs 'weights' and 'n_grid'")
        noise = d.get("noise") or {}
        slope = d.get("slope") or {}
        cov = d.get("cov") or {}
        coeffs = slope.get("coeffs")
        return cls(
            config=seq.WeightConfig.from_dict(d["weights"]),
            n_grid=tuple(d["n_grid"]),
            replications=d.get("replications", 200),
            kappa=float(d.get("kappa", KAPPA_GAUSSIAN)),
            seed=int(d.get("seed", 0)),
            noise=NoiseSpec(noise.get("law", "gaussian"), float(noise.get("sigma", 0.5))),
            slope_profile=slope.get("profile", "smooth_poly"),
            slope_coeffs=None if coeffs is None else tuple(coeffs),
            rotations=tuple(tuple(r) for r in cov.get("rotations", ())),
            regressor_law=cov.get("law", "gaussian"),
            truncation=d.get("truncation"),
            penalty_factor=float(d.get("penalty_factor", PENALTY_FACTOR)),
            out_dir=d.get("out_dir"),
        )


@dataclass(frozen=True)
class RiskRow:
    n: int
    method: str
    mean_risk: float
    stderr: float
    mean_mhat: float
    median_mhat: float
    threshold_fail_rate: float


@dataclass
class RiskTable:
    rows: list

    def row(self, n, method):
        for r in self.rows:
            if r.n == n and r.method == method:
                return r
        raise KeyError((n, method))

    def series(self, method):
        rows = sorted((r for r in self.rows if r.method == method), key=lambda r: r.n)
        return np.array([r.n for r in rows]), np.array([r.mean_risk for r in rows])

    def __eq__(self, other):
        return isinstance(other, RiskTable) and self.rows == other.rows


@dataclass(frozen=True)
class EventRow:
    n: int
    freq_M_sandwich: float
    freq_pen_sandwich: float
    freq_threshold_fail: float


@dataclass
class EventDiagnostics:
    rows: list

    def row(self, n):
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)

    def __eq__(self, other):
        return isinstance(other, EventDiagnostics) and self.rows == other.rows


@dataclass
class _Context:
    """Per-``n`` quantities shared by all replications."""

    n: int
    M_cap: int
    M_omega: int
    m_star: int
    M_minus: int
    M_plus: int
    pen: np.ndarray


@dataclass
class StudyResult:
    spec: StudySpec
    risk: RiskTable
    events: EventDiagnostics
    fixed_risk: dict
    records: dict = field(repr=False, default_factory=dict)


def _context(spec, n, slope, cov):
    m_star, _ = theory.oracle_mstar(n, spec.config)
    dq = theory.diamond_quantities(n, spec.config)
    m_cap = min(max(quarter_root(n), m_star, 1), slope.J)
    pen, _, _ = theory.population_penalties(
        max(dq.M_plus, 1), slope, cov, spec.noise, spec.config, spec.kappa, n
    )
    return _Context(n, m_cap, dq.M_omega, m_star, dq.M_minus, dq.M_plus, pen)


def _replicate(spec, ctx, slope, cov, omega, rep, purpose=_STUDY):
    sample = draw_sample(slope, cov, spec.noise, ctx.n, derive_seed(spec.seed, purpose, ctx.n, rep))
    gram = accumulate(sample, ctx.M_cap)
    sel = select_from_gram(gram, spec.config, spec.kappa, spec.penalty_factor)

    fixed = [sel.estimates[m - 1] if m <= sel.M_hat else threshold_estimate(gram, m) for m in range(1, ctx.M_omega + 1)]
    fixed_risk = np.array([omega_risk_sq(e, slope, omega) for e in fixed])
    fixed_fail = np.array([e.thresholded for e in fixed])
    if ctx.m_star <= ctx.M_omega:
        oracle = fixed[ctx.m_star - 1]
    else:
        oracle = threshold_estimate(gram, ctx.m_star)

    M_ok = ctx.M_minus <= sel.M_hat <= ctx.M_plus
    k = ctx.M_plus
    if gram.rank >= k:
        _, _, _, _, pen_hat = penalty_values(gram, spec.config, spec.kappa, k, spec.penalty_factor)
        pen = ctx.pen[:k]
        pen_ok = bool(np.all(pen <= pen_hat) and np.all(pen_hat <= PEN_SANDWICH * pen))
    else:
        pen_ok = False
    return {
        "adaptive_risk": omega_risk_sq(sel.estimate, slope, omega),
        "m_hat": sel.m_hat,
        "M_hat": sel.M_hat,
        "adaptive_fail": sel.estimate.thresholded,
        "oracle_risk": omega_risk_sq(oracle, slope, omega),
        "oracle_fail": oracle.thresholded,
        "fixed_risk": fixed_risk,
        "fixed_fail": fixed_fail,
        "M_sandwich": M_ok,
        "pen_sandwich": pen_ok,
    }


def _map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _stderr(x):
    return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def run_study(spec, threads=1, write=True):
    """Run the study described by ``spec``.

    Returns a :class:`StudyResult`; when ``spec.out_dir`` is set and ``write``
    is true, also writes ``risk_table.csv``, ``events.csv``, ``study.json``
    and the risk-curve plot files there.
    """
    slope, cov = spec.model()
    omega = seq.weights(spec.config, "omega", slope.J)
    risk_rows, event_rows, fixed_by_n, records = [], [], {}, {}
    for n in spec.n_grid:
        ctx = _context(spec, n, slope, cov)
        recs = _map(lambda rep: _replicate(spec, ctx, slope, cov, omega, rep), range(spec.replications), threads)
        records[n] = recs
        R = spec.replications
        ad = np.array([r["adaptive_risk"] for r in recs])
        mh = np.array([r["m_hat"] for r in recs], dtype=float)
        ad_fail = np.array([r["adaptive_fail"] for r in recs], dtype=float)
        risk_rows.append(RiskRow(n, "adaptive", float(np.mean(ad)), _stderr(ad), float(np.mean(mh)),
                                 float(np.median(mh)), float(np.mean(ad_fail))))
        orc = np.array([r["oracle_risk"] for r in recs])
        orc_fail = np.array([r["oracle_fail"] for r in recs], dtype=float)
        risk_rows.append(RiskRow(n, "oracle_mstar", float(np.mean(orc)), _stderr(orc), float(ctx.m_star),
                                 float(ctx.m_star), float(np.mean(orc_fail))))
        fixed = np.vstack([r["fixed_risk"] for r in recs])
        fixed_fail = np.vstack([r["fixed_fail"] for r in recs]).astype(float)
        fixed_mean = fixed.mean(axis=0)
        best = int(np.argmin(fixed_mean))
        risk_rows.append(RiskRow(n, "best_fixed_empirical", float(fixed_mean[best]), _stderr(fixed[:, best]),
                                 float(best + 1), float(best + 1), float(np.mean(fixed_fail[:, best]))))
        fixed_by_n[n] = fixed_mean
        event_rows.append(EventRow(
            n,
            float(np.mean([r["M_sandwich"] for r in recs])),
            float(np.mean([r["pen_sandwich"] for r in recs])),
            float(np.mean(ad_fail)),
        ))
        assert len(recs) == R
    result = StudyResult(spec, RiskTable(risk_rows), EventDiagnostics(event_rows), fixed_by_n, records)
    if write and spec.out_dir:
        write_outputs(result, spec.out_dir)
    return result


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    stderr: float
    regressor: str


def fit_rate(table, method="adaptive", family=None):
    """Least-squares slope of log mean risk against log n (log log n for ``family="pe"``)."""
    ns, risk = table.series(method)
    if ns.size < 4:
        raise ConfigError("rate fit needs at least 4 grid points")
    if np.any(risk <= 0):
        raise ValueError("rate fit needs strictly positive risks")
    kind = family.family.kind if isinstance(family, seq.WeightConfig) else family
    x = np.log(ns.astype(float))
    regressor = "log n"
    if kind == "pe":
        x = np.log(x)
        regressor = "log log n"
    res = stats.linregress(x, np.log(risk))
    return RateFit(float(res.slope), float(res.intercept), float(res.stderr), regressor)


@dataclass(frozen=True)
class Calibration:
    kappa: float
    grid: tuple
    medians: tuple
    n: int
    replications: int


def calibrate_kappa(spec, kappa_grid, replications=50, n=None, threads=1):
    """Dimension-jump calibration of ``kappa`` over a decreasing grid.

    Scanning the grid downwards, returns the last value before the median
    selected dimension (over ``replications`` preliminary samples of size
    ``n``, default the largest of the study) first moves by more than one.
    Without such a jump this is the smallest grid value.
    """
    grid = tuple(float(k) for k in kappa_grid)
    if len(grid) < 3:
        raise ConfigError("kappa grid needs at least 3 values")
    if any(b >= a for a, b in zip(grid, grid[1:])) or grid[-1] <= 0:
        raise ConfigError("kappa grid must be positive and strictly decreasing")
    n = int(n or spec.n_grid[-1])
    slope, cov = spec.model()
    M_cap = min(max(quarter_root(n), 1), slope.J)

    def grams(rep):
        sample = draw_sample(slope, cov, spec.noise, n, derive_seed(spec.seed, _CALIBRATION, n, rep))
        return accumulate(sample, M_cap)

    gs = _map(grams, range(replications), threads)
    medians = []
    for kappa in grid:
        mh = [select_from_gram(g, spec.config, kappa, spec.penalty_factor).m_hat for g in gs]
        medians.append(float(np.median(mh)))
    return Calibration(dimension_jump(grid, medians), grid, tuple(medians), n, replications)


def dimension_jump(grid, medians):
    """Last grid value before the first step where the median moves by more than one.

    ``grid`` is decreasing and ``medians[i]`` belongs to ``grid[i]``. Returns
    the smallest value when no step jumps and the largest when the very
    first step does.
    """
    for i in range(len(grid) - 1):
        if abs(medians[i + 1] - medians[i]) > 1:
            return grid[i]
    return grid[-1]


# ---------------------------------------------------------------- persistence


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_rows(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in columns])


def _read_rows(path, columns, convert):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise ParseError(f"{path}: empty file", line=1)
    header = [h.strip() for h in lines[0]]
    for c in columns:
        if c not in header:
            raise ParseError(f"{path}: missing column {c!r}", line=1)
    idx = {c: header.index(c) for c in columns}
    out = []
    for lineno, row in enumerate(lines[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: expected {len(header)} fields, found {len(row)}", line=lineno)
        vals = {}
        for c in columns:
            cell = row[idx[c]]
            try:
                vals[c] = convert[c](cell)
            except ValueError:
                raise ParseError(f"{path}: bad value {cell!r} for {c!r}", line=lineno, column=idx[c] + 1) from None
        out.append(vals)
    return out


def write_risk_table(table, path):
    _write_rows(path, RISK_COLUMNS, table.rows)


def read_risk_table(path):
    conv = {c: float for c in RISK_COLUMNS}
    conv["n"] = int
    conv["method"] = _method
    return RiskTable([RiskRow(**v) for v in _read_rows(path, RISK_COLUMNS, conv)])


def _method(s):
    if s not in METHODS:
        raise ValueError(s)
    return s


def write_events(events, path):
    _write_rows(path, EVENT_COLUMNS, events.rows)


def read_events(path):
    conv = {c: float for c in EVENT_COLUMNS}
    conv["n"] = int
    return EventDiagnostics([EventRow(**v) for v in _read_rows(path, EVENT_COLUMNS, conv)])


def write_json(obj, path):
    data = obj.to_dict() if hasattr(obj, "to_dict") else obj
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno, column=exc.colno) from exc


def load_study_spec(path):
    return StudySpec.from_dict(read_json(path))


def load_theory_report(path):
    return theory.TheoryReport(**read_json(path))


def write_outputs(result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    write_risk_table(result.risk, os.path.join(out_dir, "risk_table.csv"))
    write_events(result.events, os.path.join(out_dir, "events.csv"))
    write_json(result.spec, os.path.join(out_dir, "study.json"))
    write_plot_data(result.risk, os.path.join(out_dir, "risk_curve.dat"))
    write_svg(result.risk, os.path.join(out_dir, "risk_curve.svg"))


def write_plot_data(table, path):
    """Gnuplot-ready columns: ``n log(n)`` then ``log(mean risk)`` per method."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# n log_n " + " ".join(f"log_risk_{m}" for m in METHODS) + "\n")
        ns = sorted({r.n for r in table.rows})
        for n in ns:
            vals = [math.log(table.row(n, m).mean_risk) if table.row(n, m).mean_risk > 0 else float("nan") for m in METHODS]
            fh.write(f"{n} {math.log(n)!r} " + " ".join(repr(v) for v in vals) + "\n")


def write_svg(table, path, width=480, height=320):
    """Plain SVG line chart of log mean risk against log n."""
    colors = {"adaptive": "#1f77b4", "oracle_mstar": "#d62728", "best_fixed_empirical": "#2ca02c"}
    series = {}
    for m in METHODS:
        ns, risk = table.series(m)
        keep = risk > 0
        series[m] = (np.log(ns[keep].astype(float)), np.log(risk[keep]))
    xs = np.concatenate([s[0] for s in series.values()])
    ys = np.concatenate([s[1] for s in series.values()])
    pad = 40
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" font-size="12">log n</text>',
        f'<text x="12" y="{height / 2:.0f}" font-size="12" transform="rotate(-90 12 {height / 2:.0f})" text-anchor="middle">log mean risk</text>',
    ]
    for i, (m, (x, y)) in enumerate(series.items()):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        parts.append(f'<polyline fill="none" stroke="{colors[m]}" stroke-width="2" points="{pts}"/>')
        parts.append(f'<text x="{width - pad - 150}" y="{pad + 14 * i}" font-size="11" fill="{colors[m]}">{m}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
