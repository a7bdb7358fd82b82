"""Command-line entry point.

Every subcommand accepts ``--config FILE`` holding a JSON object whose keys
are that subcommand's long options (dashes become underscores).  Explicit
flags override the file.  Output always starts with the fully resolved
configuration so a run can be repeated from its own output.

Exit codes: 0 success, 1 domain error or failed check, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from prophet_lab import bounds, checks, dist, frlp, lp, policy, sim, tune

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _c_values(text: str) -> list[float]:
    """``a:b:h`` (inclusive range) or a comma list."""
    text = str(text)
    if ":" in text:
        try:
            a, b, h = (float(v) for v in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"range must be start:stop:step, got {text!r}") from None
        if h <= 0 or b < a:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        count = int(round((b - a) / h)) + 1
        return [round(a + i * h, 10) for i in range(count)]
    return _floats(text)


def _build_parser() -> _Parser:
    p = _Parser(prog="prophet-lab", description="Prophet inequalities under a quantile oracle.")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: $PROPHET_LAB_THREADS or logical cores)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--out", help="write output here instead of stdout")
        return sp

    s = common(sub.add_parser("simulate", help="Monte Carlo evaluation of a policy"))
    s.add_argument("--policy", choices=["secretary", "single", "k_threshold", "observe_accept"],
                   default="single")
    s.add_argument("--c", type=_floats, default=[1.0], help="rate(s), comma separated for k_threshold")
    s.add_argument("--rho", type=_floats, default=None, help="phase fraction(s)")
    s.add_argument("--dist", default="uniform01",
                   help="built-in name, JSON literal, or @file.json")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--trials", type=int, default=10**6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--paired", action="store_true", help="estimate OPT from the same sequences")
    s.add_argument("--format", choices=["json", "csv"], default="json")

    f = sub.add_parser("frlp", help="build and solve a factor-revealing LP")
    fsub = f.add_subparsers(dest="family", parser_class=_Parser)
    ft = common(fsub.add_parser("two"))
    ft.add_argument("--c1", type=float, default=0.7067)
    ft.add_argument("--c2", type=float, default=1.8353)
    ft.add_argument("--rho", type=float, default=0.6204)
    ft.add_argument("--zeta-grid", type=int, default=200)
    ft.add_argument("--dump", action="store_true", help="include the LP listing")
    fk = common(fsub.add_parser("k"))
    fk.add_argument("--c", type=_floats, default=[0.7204, 1.7551, 3.2857])
    fk.add_argument("--rho", type=_floats, default=[0.71, 0.195, 0.095])
    fk.add_argument("--zeta-grid", type=int, default=200)
    fk.add_argument("--dump", action="store_true")
    fo = common(fsub.add_parser("oa"))
    fo.add_argument("--c", type=float, default=0.72941)
    fo.add_argument("--rho", type=float, default=0.64863)
    fo.add_argument("--k", type=int, default=100)
    fo.add_argument("--beta-ratio", type=float, default=1.03)
    fo.add_argument("--zeta-grid", type=int, default=3)
    fo.add_argument("--dump", action="store_true")

    b = sub.add_parser("bounds", help="grid-maximize an upper-bound surface")
    bsub = b.add_subparsers(dest="family", parser_class=_Parser)
    for name in ("two", "oa"):
        bp = common(bsub.add_parser(name))
        bp.add_argument("--res", type=int, default=200)
        bp.add_argument("--rounds", type=int, default=3)
        bp.add_argument("--grid-csv", help="write the coarse grid values to this CSV")
        if name == "two":
            bp.add_argument("--c-grid", type=int, default=bounds.C_GRID)

    t = common(sub.add_parser("tune", help="coordinate search on LP parameters"))
    t.add_argument("--kind", choices=list(tune.KINDS), default="two")
    t.add_argument("--k", type=int, default=2, help="number of thresholds for --kind k")
    t.add_argument("--seed-params", default=None, help="JSON object with starting parameters")
    t.add_argument("--step", type=float, default=0.1)
    t.add_argument("--halvings", type=int, default=8)

    w = common(sub.add_parser("sweep", help="best rho per rate for observe-and-accept"))
    w.add_argument("--c-values", type=_c_values, default=_c_values("0.1:3.0:0.1"))
    w.add_argument("--k", type=int, default=100)
    w.add_argument("--beta-ratio", type=float, default=1.03)
    w.add_argument("--rho-grid", type=int, default=101)
    w.add_argument("--zeta-grid", type=int, default=3)

    c = sub.add_parser("check", help="run an acceptance suite")
    c.add_argument("suite", choices=sorted(checks.SUITES))
    c.add_argument("--out", help="write the report here instead of stdout")
    c.add_argument("--only", type=_ints, default=None,
                   help="comma-separated criterion numbers to run from the suite")
    return p


# ---------------------------------------------------------------------- config

def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return data


def _subparser(parser: _Parser, argv: list[str]) -> _Parser:
    """The innermost parser that handles ``argv``."""
    actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    for token in argv:
        if actions and token in actions[0].choices:
            return _subparser(actions[0].choices[token], argv[argv.index(token) + 1:])
    return parser


def _apply_config(parser: _Parser, argv: list[str], args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    data = _load_config(args.config)
    target = _subparser(parser, argv)
    known = {a.dest: a for a in target._actions if a.dest not in ("help", "config")}
    unknown = sorted(set(k.replace("-", "_") for k in data) - set(known))
    if unknown:
        raise UsageError(f"{args.config}: unknown keys {unknown}; allowed {sorted(known)}")
    defaults = {}
    for key, value in data.items():
        action = known[key.replace("-", "_")]
        if action.type is not None and isinstance(value, str):
            value = action.type(value)
        elif action.type in (_floats, _c_values) and isinstance(value, (int, float)):
            value = [float(value)]
        defaults[action.dest] = value
    target.set_defaults(**defaults)
    return parser.parse_args(argv)


def _resolved(args: argparse.Namespace) -> dict:
    out = {k: v for k, v in vars(args).items() if k not in ("config", "out")}
    return json.loads(json.dumps(out, default=str))


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        return args.threads
    env = os.environ.get("PROPHET_LAB_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"PROPHET_LAB_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise UsageError("PROPHET_LAB_THREADS must be at least 1")
        return value
    return os.cpu_count() or 1


def _dist_arg(text: str, n: int) -> dist.Distribution:
    if text.startswith("@"):
        obj = _load_config(text[1:])
    elif text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--dist:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
    else:
        obj = text
    return dist.from_json(obj, n=n)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


# --------------------------------------------------------------------- commands

def _policy(args) -> policy.PolicySpec:
    if args.policy == "secretary":
        return policy.SecretaryZeroQuery()
    if args.policy == "single":
        return policy.SingleThreshold(args.c[0])
    if args.policy == "k_threshold":
        if args.rho is None:
            raise UsageError("k_threshold needs --rho")
        return policy.KThreshold(tuple(args.c), tuple(args.rho))
    if args.rho is None:
        raise UsageError("observe_accept needs --rho")
    return policy.ObserveAndAccept(args.c[0], args.rho[0])


def cmd_simulate(args) -> tuple[str, int]:
    spec = _policy(args)
    d = _dist_arg(args.dist, args.n)
    run = sim.estimate_ratio_to_empirical_max if args.paired else sim.estimate
    report = run(spec, d, n=args.n, trials=args.trials, seed=args.seed, threads=_threads(args))
    config = _resolved(args)
    if args.format == "csv":
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(sim.RunReport.CSV_FIELDS)
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v)
                         for v in report.csv_row()])
        return buf.getvalue(), EXIT_OK
    return _json({"config": config, "report": report.to_json()}), EXIT_OK


def _lp_params(args):
    if args.family == "two":
        return frlp.TwoThresholdLpParams(args.c1, args.c2, args.rho, args.zeta_grid)
    if args.family == "k":
        return frlp.KThresholdLpParams(tuple(args.c), tuple(args.rho), args.zeta_grid)
    return frlp.ObserveAcceptLpParams(args.c, args.rho, args.k, args.beta_ratio, args.zeta_grid)


def cmd_frlp(args) -> tuple[str, int]:
    if args.family is None:
        raise UsageError("frlp needs one of: two, k, oa")
    model, sol = frlp.solve_params(_lp_params(args))
    out = {"config": _resolved(args), "solution": sol.as_dict(model.names),
           "certified": lp.dual_certificate(model, sol)}
    if args.dump:
        out["lp"] = model.dump()
    return _json(out), EXIT_OK


def cmd_bounds(args) -> tuple[str, int]:
    if args.family is None:
        raise UsageError("bounds needs one of: two, oa")
    surface = (bounds.two_threshold_surface(c_grid=args.c_grid) if args.family == "two"
               else bounds.observe_accept_surface())
    result = bounds.grid_maximize(surface, args.res, args.rounds)
    if args.grid_csv:
        axes = [bounds.interior_axis(lo, hi, args.res) for lo, hi in surface.box]
        values = surface.evaluate_grid(axes)
        mesh = np.meshgrid(*axes, indexing="ij")
        with open(args.grid_csv, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(list(surface.names) + ["value"])
            for idx in np.ndindex(values.shape):
                if np.isfinite(values[idx]):
                    writer.writerow([repr(float(m[idx])) for m in mesh] + [repr(float(values[idx]))])
    return _json({"config": _resolved(args), "result": result.to_json()}), EXIT_OK


def cmd_tune(args) -> tuple[str, int]:
    seed = None
    if args.seed_params:
        try:
            raw = json.loads(args.seed_params)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--seed-params:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
        cls = {"two": frlp.TwoThresholdLpParams, "k": frlp.KThresholdLpParams,
               "oa": frlp.ObserveAcceptLpParams}[args.kind]
        try:
            seed = cls(**raw)
        except TypeError as exc:
            raise UsageError(f"--seed-params: {exc}") from None
    result = tune.optimize_params(args.kind, seed, k=args.k, step=args.step, halvings=args.halvings)
    return _json({"config": _resolved(args), "result": result.to_json()}), EXIT_OK


def cmd_sweep(args) -> tuple[str, int]:
    if any(c <= 0 for c in args.c_values):
        raise dist.DomainError("all rates must be positive")
    rows = tune.sweep_c(args.c_values, args.k, args.beta_ratio, args.rho_grid, args.zeta_grid,
                        threads=_threads(args))
    header = "# config: " + json.dumps(_resolved(args), sort_keys=True) + "\n"
    return header + tune.rows_to_csv(rows), EXIT_OK


def cmd_check(args) -> tuple[str, int]:
    selected = checks.SUITES[args.suite]
    if args.only:
        unknown = sorted(set(args.only) - set(selected))
        if unknown:
            raise UsageError(f"criteria {unknown} are not in suite {args.suite} {selected}")
        selected = tuple(i for i in selected if i in args.only)
    threads = _threads(args)
    lines = ["# config: " + json.dumps(_resolved(args), sort_keys=True), f"# suite: {args.suite}"]
    failed = 0
    for i in selected:
        fn = checks.CHECKS[i]
        result = fn(threads=threads) if i in checks.THREADED else fn()
        lines.append(result.line())
        print(f"{fn.__name__}: {result.seconds:.2f} s", file=sys.stderr)
        failed += not result.passed
    lines.append(f"# {len(selected) - failed} passed, {failed} failed")
    return "\n".join(lines) + "\n", EXIT_DOMAIN if failed else EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "frlp": cmd_frlp, "bounds": cmd_bounds,
            "tune": cmd_tune, "sweep": cmd_sweep, "check": cmd_check}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        if not argv:
            raise UsageError(parser.format_usage().strip())
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        args = _apply_config(parser, argv, args)
        text, code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except argparse.ArgumentTypeError as exc:
        print(f"prophet-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except dist.DomainError as exc:
        print(f"prophet-lab: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
