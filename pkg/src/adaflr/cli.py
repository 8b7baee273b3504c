"""Command-line entry point (``adaflr`` or ``python -m adaflr``).

Exit status is 0 on success, 2 for usage or configuration problems and 1
for failures while computing.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness, theory
from . import sequences as seq
from .adapt import KAPPA_GAUSSIAN, KAPPA_MOMENT, select_dimension, quarter_root
from .data_gen import NoiseSpec, default_truncation, draw_sample, load_sample, make_cov, make_slope, write_sample_csv
from .errors import ClassMembershipError, ConfigError, IngestionError, ParseError, ResolutionError

CALIBRATION_FILE = "calibration.json"
DEFAULT_KAPPA_GRID = tuple(96.0 * 2.0**-k for k in range(21))
_USAGE_ERRORS = (ConfigError, ParseError, IngestionError, ClassMembershipError, ResolutionError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def _weight_flags(p):
    g = p.add_argument_group("weight sequences")
    g.add_argument("--family", choices=("pp", "ep", "pe"))
    g.add_argument("--s", type=float)
    g.add_argument("--p", type=float)
    g.add_argument("--a", type=float)
    g.add_argument("--r", type=float)
    g.add_argument("--d", type=float)


def _common(p, seed=True):
    p.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    p.add_argument("--out-dir")
    if seed:
        p.add_argument("--seed", type=int)


def build_parser():
    parser = _Parser(prog="adaflr", description="Adaptive functional linear regression.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="simulate a dataset as sampled curves and responses")
    _weight_flags(p)
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--noise", choices=("gaussian", "uniform", "laplace"), default="gaussian")
    p.add_argument("--profile", choices=("smooth_poly", "analytic"), default="smooth_poly")

    p = sub.add_parser("fit", help="select the dimension and estimate the slope")
    _weight_flags(p)
    _common(p, seed=False)
    p.add_argument("--curves", required=True)
    p.add_argument("--responses", required=True)
    p.add_argument("--kappa", type=float)
    p.add_argument("--moment", action="store_true", help="use the moment-condition default kappa")

    for name, text in (("study", "run a Monte Carlo study"), ("calibrate", "calibrate kappa by dimension jump")):
        p = sub.add_parser(name, help=text)
        _weight_flags(p)
        _common(p)
        p.add_argument("--config")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--n", type=int, nargs="+", help="sample-size grid")
        p.add_argument("--replications", type=int)
        if name == "study":
            p.add_argument("--kappa", type=float)
        else:
            p.add_argument("--grid", type=float, nargs="+", help="decreasing kappa grid")

    p = sub.add_parser("rates", help="print the minimax rate exponent")
    _weight_flags(p)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("theory", help="print truth-aware quantities as JSON")
    _weight_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--json", action="store_true", help="accepted for symmetry; output is always JSON")
    return parser


def _weights_dict(args, base=None):
    d = dict(base or {})
    if args.family is not None:
        d["family"] = args.family
    for key in ("s", "p", "a", "r", "d"):
        v = getattr(args, key)
        if v is not None:
            d[key] = v
    if "family" not in d:
        raise ConfigError("no weight family given (use --family or a config file)")
    return d


def _config(args, base=None):
    return seq.WeightConfig.from_dict(_weights_dict(args, base))


def _emit(obj, as_json, text_lines):
    if as_json:
        sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write("\n".join(text_lines) + "\n")


def _notice(msg):
    sys.stderr.write(msg + "\n")


def _cmd_gen(args):
    config = _config(args)
    out = args.out_dir or "."
    os.makedirs(out, exist_ok=True)
    slope = make_slope(config, args.profile, default_truncation(args.n))
    cov = make_cov(config, slope.J)
    seed = 0 if args.seed is None else args.seed
    sample = draw_sample(slope, cov, NoiseSpec(args.noise, args.sigma), args.n, seed)
    curves, responses = os.path.join(out, "curves.csv"), os.path.join(out, "responses.csv")
    write_sample_csv(sample, curves, responses)
    _emit({"curves": curves, "responses": responses, "n": args.n, "seed": seed}, args.json,
          [f"wrote {curves}", f"wrote {responses}"])


def _default_kappa(args):
    if args.kappa is not None:
        return args.kappa, "flag"
    path = os.path.join(args.out_dir or ".", CALIBRATION_FILE)
    if os.path.exists(path):
        return float(harness.read_json(path)["kappa"]), path
    kappa = KAPPA_MOMENT if args.moment else KAPPA_GAUSSIAN
    _notice(f"notice: no {CALIBRATION_FILE} found, using the theoretical kappa={kappa:g} "
            "(usually far too conservative; run 'calibrate')")
    return kappa, "theoretical"


def _cmd_fit(args):
    config = _config(args)
    kappa, source = _default_kappa(args)
    # the projection width must be known before reading: floor(n^1/4), within the grid's resolution
    with open(args.curves, encoding="utf-8") as fh:
        n_grid = len(fh.readline().split(","))
    with open(args.responses, encoding="utf-8") as fh:
        n_rows = sum(1 for line in fh if line.strip()) - 1
    m_project = max(1, min(quarter_root(max(n_rows, 1)), n_grid // 4))
    sample = load_sample(args.curves, args.responses, m_project)
    sel = select_dimension(sample, config, kappa)
    rows = list(sel.table.rows())
    for row, psi in zip(rows, sel.contrasts):
        row["contrast"] = float(psi)
    coeffs = [float(c) for c in sel.estimate.coeffs]
    payload = {
        "n": sample.n,
        "m_hat": sel.m_hat,
        "M_hat": sel.M_hat,
        "kappa": kappa,
        "kappa_source": source,
        "thresholded": bool(sel.estimate.thresholded),
        "coefficients": coeffs,
        "penalty_table": rows,
    }
    lines = [
        f"n        {sample.n}",
        f"m_hat    {sel.m_hat}",
        f"M_hat    {sel.M_hat}",
        f"kappa    {kappa!r} ({source})",
        "coefficients " + " ".join(repr(c) for c in coeffs),
        "m Delta Lambda delta sigma2 pen contrast",
    ]
    for r in rows:
        lines.append(" ".join([str(r["m"])] + [repr(r[k]) for k in ("Delta", "Lambda", "delta", "sigma2", "pen", "contrast")]))
    _emit(payload, args.json, lines)


def _study_spec(args):
    base = {}
    if args.config:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        base = harness.read_json(args.config)
    if args.family is not None or any(getattr(args, k) is not None for k in "spard") or "weights" not in base:
        base["weights"] = _weights_dict(args, base.get("weights"))
    if args.n:
        base["n_grid"] = args.n
    if "n_grid" not in base:
        raise ConfigError("no sample-size grid given (use --n or 'n_grid' in the config)")
    if args.seed is not None:
        base["seed"] = args.seed
    if args.replications is not None:
        base["replications"] = args.replications
    if getattr(args, "kappa", None) is not None:
        base["kappa"] = args.kappa
    if args.out_dir is not None:
        base["out_dir"] = args.out_dir
    base.setdefault("out_dir", ".")
    return harness.StudySpec.from_dict(base)


def _cmd_study(args):
    spec = _study_spec(args)
    result = harness.run_study(spec, threads=args.threads)
    rows = [r.__dict__ for r in result.risk.rows]
    lines = ["n method mean_risk stderr mean_mhat median_mhat threshold_fail_rate"]
    lines += [" ".join(str(r[c]) for c in harness.RISK_COLUMNS) for r in rows]
    lines.append(f"outputs in {spec.out_dir}")
    _emit({"out_dir": spec.out_dir, "kappa": spec.kappa, "seed": spec.seed, "risk_table": rows}, args.json, lines)


def _cmd_calibrate(args):
    spec = _study_spec(args)
    grid = tuple(args.grid) if args.grid else DEFAULT_KAPPA_GRID
    reps = args.replications or 50
    cal = harness.calibrate_kappa(spec, grid, replications=reps, threads=args.threads)
    payload = {"kappa": cal.kappa, "grid": list(cal.grid), "median_mhat": list(cal.medians), "n": cal.n,
               "replications": cal.replications, "seed": spec.seed, "weights": spec.config.to_dict()}
    os.makedirs(spec.out_dir, exist_ok=True)
    path = os.path.join(spec.out_dir, CALIBRATION_FILE)
    harness.write_json(payload, path)
    lines = [f"kappa {cal.kappa!r}", "kappa median_mhat"]
    lines += [f"{k!r} {m!r}" for k, m in zip(cal.grid, cal.medians)]
    lines.append(f"wrote {path}")
    _emit(payload, args.json, lines)


def _cmd_rates(args):
    rate = theory.rate_exponent(_config(args))
    _emit({"exponent": rate.exponent, "kind": rate.kind, "text": str(rate)}, args.json, [str(rate)])


def _cmd_theory(args):
    if args.n < 1:
        raise ConfigError("--n must be positive")
    report = theory.theory_report(args.n, _config(args))
    _emit(report.to_dict(), True, [])


_COMMANDS = {
    "gen": _cmd_gen,
    "fit": _cmd_fit,
    "study": _cmd_study,
    "calibrate": _cmd_calibrate,
    "rates": _cmd_rates,
    "theory": _cmd_theory,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _COMMANDS[args.command](args)
    except _USAGE_ERRORS as exc:
        _notice(f"adaflr {args.command}: {exc}")
        return 2
    except FileNotFoundError as exc:
        _notice(f"adaflr {args.command}: file not found: {exc.filename}")
        return 2
    except Exception as exc:  # noqa: BLE001 - report any computational failure with context
        _notice(f"adaflr {args.command}: {type(exc).__name__}: {exc}")
        return 1
    return 0


run_cli = main
