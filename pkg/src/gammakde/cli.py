"""Command-line interface.

Subcommands::

    gammakde fit          --data FILE --out bandwidths.json
    gammakde eval-grid    --data FILE [--bandwidths bandwidths.json] --grid 0:100:100,0:6:100
    gammakde bench-ise    --scenario A --n 100 --methods standard,modified
    gammakde bench-loglik --data FILE --m 100 --methods standard,modified,combined

``--data old-faithful`` selects the bundled Old Faithful data (waiting,
duration). Every flag can also be set through an environment variable
``GAMMAKDE_<FLAG>`` (upper case, dashes as underscores, e.g.
``GAMMAKDE_ALPHA_EXP=0.8``); explicit flags win.

Exit codes: 0 success, 2 invalid input or usage, 3 numerical failure.
"""

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from importlib import resources

import numpy as np

from . import __version__
from .bandwidth import BoundaryPolicy, PriorConfig, bayes_adaptive_bandwidths
from .errors import DomainError, GammaKDEError, NumericError, SingularWeightError, UsageError
from .estimators import (UNIFORM, BandwidthSet, ParametricStart, as_sample,
                         density_on_grid, fit_parametric_start)
from .evaluation import IseReport, LoglikReport, holdout_loglik, replicate_ise
from .kernels import KernelSelector
from .scenarios import ScenarioSpec, builtin, default_combined_selector

__all__ = ["load_old_faithful", "main", "read_csv_sample"]

ENV_PREFIX = "GAMMAKDE_"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
BUNDLED = {"old-faithful": "old_faithful.csv"}


def read_csv_sample(path):
    """Read a headed numeric CSV into ``(columns, (n, d) array)``."""
    if path in BUNDLED:
        text = resources.files("gammakde").joinpath("data", BUNDLED[path]).read_text()
    else:
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise UsageError(f"{path} is empty")
    header, body = [c.strip() for c in rows[0]], rows[1:]
    if not body:
        raise UsageError(f"{path} has a header but no data rows")
    values = np.empty((len(body), len(header)))
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise UsageError(f"row {r + 1} has {len(row)} fields, header has {len(header)}")
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise UsageError(f"row {r + 1}, column {header[c]!r}: "
                                 f"not a number: {cell!r}") from None
    bad = np.argwhere(~(values >= 0))
    if bad.size:
        r, c = bad[0]
        raise DomainError(f"row {r + 1}, column {header[c]!r}: value {values[r, c]} "
                          "is outside [0, inf)")
    return header, values


def load_old_faithful():
    """The bundled Old Faithful sample, columns (waiting, duration)."""
    return read_csv_sample("old-faithful")[1]


def _write_atomic(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _floats(text, name):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None


def _ints(text, name):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated integers, got {text!r}") from None


def parse_grid(text, d):
    """``lo:hi:count`` per axis, comma separated, into a list of axes."""
    specs = [s for s in str(text).split(",") if s.strip()]
    if len(specs) != d:
        raise UsageError(f"--grid has {len(specs)} axes, data has {d}")
    axes = []
    for s in specs:
        parts = s.split(":")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except (ValueError, IndexError):
            raise UsageError(f"grid axis {s!r} is not lo:hi:count") from None
        if len(parts) != 3 or count < 1 or hi < lo or (count > 1 and hi == lo):
            raise UsageError(f"grid axis {s!r} is not lo:hi:count with lo <= hi, count >= 1")
        if lo < 0:
            raise DomainError(f"grid axis {s!r} leaves the support [0, inf)")
        axes.append(np.linspace(lo, hi, count))
    return axes


def _resolve_selector(text, d, scenario=None):
    key = str(text).strip().lower()
    if key == "standard":
        return KernelSelector.standard(d)
    if key == "modified":
        return KernelSelector.modified(d)
    if key == "combined":
        if scenario is not None:
            return KernelSelector.parse(scenario.combined_selector)
        return KernelSelector.parse(default_combined_selector(d))
    sel = KernelSelector.parse(text)
    if sel.d != d:
        raise UsageError(f"selector {text!r} has {sel.d} coordinates, data has {d}")
    return sel


def _prior(args, n, d):
    if args.alpha is not None:
        alpha, rule = float(args.alpha), "literal"
    else:
        alpha, rule = float(n) ** args.alpha_exp, f"n**{args.alpha_exp}"
    betas = _floats(args.beta, "beta")
    if len(betas) not in (1, d):
        raise UsageError(f"--beta needs 1 or {d} values")
    prior = PriorConfig(alpha, tuple(betas * d if len(betas) == 1 else betas))
    return prior, rule


def _policy(args):
    return BoundaryPolicy(args.epsilon, args.lam)


def _start(args, X):
    return fit_parametric_start(X, args.start)


def _meta(args, extra):
    doc = {"version": __version__, "seed": args.seed}
    doc.update(extra)
    doc["created"] = None if args.reproducible else time.strftime(
        "%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return doc


def cmd_fit(args):
    columns, X = read_csv_sample(args.data)
    X = as_sample(X)
    n, d = X.shape
    if n < 2:
        raise UsageError("bandwidth selection needs at least 2 rows")
    selector = _resolve_selector(args.selector or "modified", d)
    prior, rule = _prior(args, n, d)
    policy = _policy(args)
    start = _start(args, X)
    bw = bayes_adaptive_bandwidths(X, start, prior, policy, selector)
    doc = _meta(args, {
        "data": args.data, "columns": columns, "n": n, "d": d,
        "selector": str(selector), "alpha": prior.alpha, "alpha_rule": rule,
        "betas": list(prior.betas), "epsilon": policy.epsilon, "lambda": policy.lam,
        "start": start.to_dict(), "dropped_terms": bw.meta.get("dropped_terms", 0),
        "bandwidths": bw.values.tolist(),
    })
    _write_atomic(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def _load_bandwidths(path, n, d):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None
    H = np.asarray(doc.get("bandwidths"), dtype=float)
    if H.ndim != 2 or H.shape != (n, d):
        raise UsageError(f"bandwidth matrix in {path} is not {n} x {d}")
    return BandwidthSet.from_matrix(H), doc


def cmd_eval_grid(args):
    columns, X = read_csv_sample(args.data)
    X = as_sample(X)
    n, d = X.shape
    if args.grid is None:
        raise UsageError("--grid is required")
    axes = parse_grid(args.grid, d)
    policy = _policy(args)
    if args.bandwidths:
        bw, doc = _load_bandwidths(args.bandwidths, n, d)
        selector = _resolve_selector(args.selector or doc.get("selector", "modified"), d)
        start = ParametricStart(**doc["start"]) if "start" in doc else UNIFORM
        epsilon = doc.get("epsilon", policy.epsilon) if args.epsilon_flag is None else policy.epsilon
    else:
        if n < 2:
            raise UsageError("bandwidth selection needs at least 2 rows")
        selector = _resolve_selector(args.selector or "modified", d)
        prior, _ = _prior(args, n, d)
        start = _start(args, X)
        bw = bayes_adaptive_bandwidths(X, start, prior, policy, selector)
        epsilon = policy.epsilon
    boundary = None if args.boundary == "classic" else epsilon
    dens = density_on_grid(X, selector, bw, axes, start, boundary)
    mesh = np.meshgrid(*axes, indexing="ij")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(columns) + ["density"])
    flat = [m.ravel() for m in mesh] + [np.asarray(dens).ravel()]
    for row in zip(*flat):
        w.writerow([repr(float(v)) for v in row])
    _write_atomic(args.out, buf.getvalue())
    return EXIT_OK


def _scenario(args):
    if args.spec:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                return ScenarioSpec.from_json(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read {args.spec}: {exc.strerror}") from None
    if not args.scenario:
        raise UsageError("give --scenario NAME or --spec FILE")
    return builtin(args.scenario)


def _methods(text):
    return [m.strip() for m in str(text).split(",") if m.strip()]


def cmd_bench_ise(args):
    scenario = _scenario(args)
    ns = _ints(args.n, "n")
    methods = _methods(args.methods)
    policy = _policy(args)
    reports = []
    for n in ns:
        prior, _ = _prior(args, n, scenario.d)
        for method in methods:
            sel = _resolve_selector(method, scenario.d, scenario)
            reports.append(replicate_ise(scenario, n, sel, prior, policy,
                                         args.replications, args.seed,
                                         workers=args.workers))
    _write_atomic(args.out, IseReport.to_csv(reports))
    return EXIT_OK


def cmd_bench_loglik(args):
    columns, X = read_csv_sample(args.data)
    X = as_sample(X)
    n, d = X.shape
    policy = _policy(args)
    reports = []
    for m in _ints(args.m, "m"):
        if not 2 <= m < n:
            raise UsageError(f"--m {m} must satisfy 2 <= m < n = {n}")
        n_train = n - m if args.evaluate_on == "holdout" else m
        prior, _ = _prior(args, n_train, d)
        for method in _methods(args.methods):
            sel = _resolve_selector(method, d)
            start = None if args.start == "uniform" else args.start
            reports.append(holdout_loglik(X, m, sel, prior, policy, start,
                                          args.replications, args.seed, args.floor,
                                          args.evaluate_on, dataset=args.data,
                                          workers=args.workers))
    _write_atomic(args.out, LoglikReport.to_csv(reports))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _add_model_flags(p):
    p.add_argument("--selector", help="kernel per coordinate, e.g. 'SM', or "
                   "standard / modified / combined")
    p.add_argument("--alpha", type=float, help="prior shape (overrides --alpha-exp)")
    p.add_argument("--alpha-exp", type=float, default=0.4,
                   help="prior shape as n**p (default 0.4)")
    p.add_argument("--beta", default="1", help="prior scale(s), one or d comma-separated")
    p.add_argument("--epsilon", type=float, default=2e-8,
                   help="boundary threshold on observations (default 2e-8)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0,
                   help="boundary-term constant lambda (default 0)")
    p.add_argument("--start", default="uniform",
                   choices=["uniform", "exponential", "gamma"], help="parametric start")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output file ('-' for stdout)")
    p.add_argument("--reproducible", action="store_true",
                   help="omit timestamps from metadata")


def build_parser():
    parser = _Parser(prog="gammakde", description="Gamma kernel density estimation "
                     "with Bayesian adaptive bandwidths on [0, inf)^d.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="select adaptive bandwidths for a CSV sample")
    p.add_argument("--data", required=True, help="CSV with header, or 'old-faithful'")
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval-grid", help="evaluate the estimate on a tensor grid")
    p.add_argument("--data", required=True)
    p.add_argument("--bandwidths", help="JSON from 'fit'; selected afresh when omitted")
    p.add_argument("--grid", help="lo:hi:count per axis, comma separated")
    p.add_argument("--boundary", choices=["collapsed", "classic"], default="collapsed",
                   help="modified-kernel boundary region: [0, epsilon) or [0, 2h)")
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_eval_grid)

    p = sub.add_parser("bench-ise", help="ISE over replications for a scenario")
    p.add_argument("--scenario", help="builtin scenario A ... M")
    p.add_argument("--spec", help="JSON scenario file")
    p.add_argument("--n", default="100", help="sample sizes, comma separated")
    p.add_argument("--methods", default="standard,modified,combined")
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--workers", type=int, default=None)
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_bench_ise)

    p = sub.add_parser("bench-loglik", help="held-out log-likelihood over random splits")
    p.add_argument("--data", required=True)
    p.add_argument("--m", default="100", help="held-out sizes, comma separated")
    p.add_argument("--methods", default="standard,modified,combined")
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--evaluate-on", choices=["holdout", "remainder"], default="holdout")
    p.add_argument("--floor", type=float, default=-700.0)
    p.add_argument("--workers", type=int, default=None)
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_bench_loglik)
    return parser


def _apply_env(parser, environ):
    """Use ``GAMMAKDE_*`` variables as defaults for matching flags."""
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub_action.choices.values():
        for action in sp._actions:
            if not action.option_strings or action.dest == "help":
                continue
            flag = max(action.option_strings, key=len).lstrip("-")
            key = ENV_PREFIX + flag.upper().replace("-", "_")
            if key not in environ:
                continue
            raw = environ[key]
            if isinstance(action, argparse._StoreTrueAction):
                value = raw.strip().lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                try:
                    value = action.type(raw)
                except ValueError:
                    raise UsageError(f"{key}={raw!r} is not a valid value") from None
            else:
                value = raw
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"{key}={raw!r} is not one of {list(action.choices)}")
            action.default = value
            action.required = False


def main(argv=None, environ=None):
    environ = os.environ if environ is None else environ
    parser = build_parser()
    try:
        _apply_env(parser, environ)
        args = parser.parse_args(argv)
        args.epsilon_flag = _explicit(argv, "--epsilon")
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (NumericError, SingularWeightError) as exc:
        sys.stderr.write(f"gammakde: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except GammaKDEError as exc:
        sys.stderr.write(f"gammakde: error: {exc}\n")
        return EXIT_USAGE
    except ArithmeticError as exc:
        sys.stderr.write(f"gammakde: numerical failure: {exc}\n")
        return EXIT_NUMERIC


def _explicit(argv, flag):
    argv = sys.argv[1:] if argv is None else argv
    return True if any(a == flag or a.startswith(flag + "=") for a in argv) else None


if __name__ == "__main__":
    sys.exit(main())
