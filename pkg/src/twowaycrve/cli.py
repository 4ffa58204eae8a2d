"""
Command-line interface: ``twowaycrve fit|diagnose|simulate|placebo``.

Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
errors raised while loading data or estimating.
"""

import argparse
import sys

from .errors import ConfigError, TwoWayError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class StageError(Exception):
    def __init__(self, stage, exc):
        self.stage = stage
        self.exc = exc
        super().__init__(f"{stage} failed: {type(exc).__name__}: {exc}")


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (TwoWayError, OSError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise StageError(name, exc) from exc


def _add_data_args(p):
    p.add_argument("data", help="CSV file with a header row")
    p.add_argument("varlist", nargs="*",
                   help="regressand, regressor of interest, then controls")
    p.add_argument("--y", help="regressand (overrides varlist)")
    p.add_argument("--x", help="regressor of interest (overrides varlist)")
    p.add_argument("--controls", nargs="*", default=None, help="further regressors")
    p.add_argument("--cluster", nargs="+", required=True, metavar="VAR",
                   help="exactly two clustering variables")
    p.add_argument("--fevar", nargs="*", default=[], metavar="VAR",
                   help="categorical variables expanded into fixed effects")
    p.add_argument("--sample", help='row filter such as "age>=25 & age<=35"')
    p.add_argument("--no-intercept", action="store_true",
                   help="do not add a constant when there are no fixed effects")


def _add_output_args(p):
    p.add_argument("--format", choices=("text", "csv", "jsonl"), default="text",
                   help="format of the dump written to --output (text goes to stdout)")
    p.add_argument("--output", help="write a machine-readable dump here")


def _level(value):
    v = float(value)
    if 1.0 < v < 100.0:
        v /= 100.0
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("level must lie in (0, 1) or (1, 100)")
    return v


def build_parser():
    p = _Parser(prog="twowaycrve", description="Two-way cluster-robust inference.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    f = sub.add_parser("fit", help="estimate and report all sixteen tests")
    _add_data_args(f)
    f.add_argument("--level", type=_level, default=0.95, help="confidence level")
    f.add_argument("--no-diag", action="store_true", help="skip the diagnostics panel")
    _add_output_args(f)

    d = sub.add_parser("diagnose", help="cluster diagnostics for the regressor of interest")
    _add_data_args(d)

    s = sub.add_parser("simulate", help="run a Monte Carlo sweep from a YAML config")
    s.add_argument("config", help="YAML file with base/sweep/estimators keys")
    s.add_argument("--output", help="CSV output path (default: stdout)")
    s.add_argument("--threads", type=int, default=1, help="worker processes")
    s.add_argument("--reps", type=int, help="override the replication count")

    pl = sub.add_parser("placebo", help="placebo-regression rejection frequencies")
    _add_data_args(pl)
    pl.add_argument("--generator", help="YAML file with kind/pi/scale/loading")
    pl.add_argument("--kind", choices=("iid", "step"), help="placebo generator")
    pl.add_argument("--time", help="time column (needed by the step generator)")
    pl.add_argument("--unit", help="unit column (default: second cluster variable)")
    pl.add_argument("--reps", type=int, default=1000, help="number of placebo draws")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--alpha", type=float, default=0.05, help="test size")
    pl.add_argument("--threads", type=int, default=1, help="accepted for symmetry; unused")
    _add_output_args(pl)
    return p


def _variables(args):
    vl = list(args.varlist)
    y = args.y or (vl[0] if vl else None)
    rest = vl[1:] if not args.y else vl
    x = args.x or (rest[0] if rest else None)
    controls = args.controls if args.controls is not None else (rest[1:] if not args.x else rest)
    if y is None or x is None:
        raise UsageError("need a regressand and a regressor of interest")
    if len(args.cluster) != 2:
        raise UsageError(f"--cluster needs exactly two variables, got {len(args.cluster)}")
    return y, [x, *controls]


def _load(args):
    from .dataset import load_csv

    y, xs = _variables(args)
    intercept = False if args.no_intercept else None
    return _stage("load", load_csv, args.data, y, xs, args.cluster[0], args.cluster[1],
                  fe_cols=args.fevar, sample=args.sample, intercept=intercept)


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def cmd_fit(args, out):
    from .report import build_report, dump_csv, dump_jsonl, format_report

    ds = _load(args)
    rep = _stage("estimation", build_report, ds, args.level, diagnostics=not args.no_diag)
    out.write(format_report(rep))
    if args.output:
        dump = {"text": format_report, "csv": lambda r: dump_csv(r.rows),
                "jsonl": lambda r: dump_jsonl(r.rows)}[args.format](rep)
        _write(args.output, dump)
    return rep


def cmd_diagnose(args, out):
    from .crve import menu_for_dataset
    from .diagnostics import diag_panel
    from .report import format_diag

    ds = _load(args)
    menu = _stage("estimation", menu_for_dataset, ds, with_hc=False)
    panel = _stage("diagnostics", diag_panel, menu.fit, jackknife=menu.jackknife)
    out.write(format_diag(panel) + "\n")
    return panel


def cmd_simulate(args, out):
    from .simlab.sweep import load_config, run_sweep, stderr_progress, with_reps, write_csv

    grid, tags = load_config(args.config)
    if args.reps is not None:
        if args.reps < 1:
            raise UsageError("--reps must be at least 1")
        grid = with_reps(grid, args.reps)
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    results = _stage("simulation", run_sweep, grid, args.threads, tags, stderr_progress)
    if args.output:
        with open(args.output, "w") as fh:
            write_csv(results, fh, tags)
    else:
        write_csv(results, out, tags)
    return results


def _placebo_spec(args):
    from .simlab.placebo import PlaceboSpec

    d = {}
    if args.generator:
        import yaml

        with open(args.generator) as fh:
            d = yaml.safe_load(fh) or {}
        if not isinstance(d, dict):
            raise ConfigError("<generator>", "top level must be a mapping")
    if args.kind:
        d["kind"] = args.kind
    return PlaceboSpec.from_dict(d)


def format_placebo(res, spec, alpha):
    lines = [f"Placebo rejection frequencies ({spec.kind} generator, {res.reps} draws,"
             f" size {alpha:g})",
             f"{'s.e.':>9} | {'reject':>8} {'undefined':>10}",
             "-" * 10 + "+" + "-" * 20]
    for tag, v in res.rejection.items():
        lines.append(f"{tag:>9} | {v:8.4f} "
                     f"{res.undefined[tag]:10.4f}")
    lines.append("-" * 31)
    fails = ", ".join(f"{k}: {v}" for k, v in sorted(res.failures.items())) or "none"
    lines.append(f"failed draws: {fails}")
    return "\n".join(lines) + "\n"


def cmd_placebo(args, out):
    from .dataset import load_columns
    from .simlab.placebo import placebo_run

    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    spec = _placebo_spec(args)
    ds = _load(args)
    unit_col = args.unit or args.cluster[1]
    cols = [unit_col] + ([args.time] if args.time else [])
    if spec.kind == "step" and not args.time:
        raise UsageError("the step generator needs --time")
    extra = _stage("load", load_columns, args.data, cols, args.sample)
    res = _stage("placebo", placebo_run, ds, spec, args.reps, args.seed,
                 units=extra[unit_col], times=extra.get(args.time), level=args.alpha)
    text = format_placebo(res, spec, args.alpha)
    out.write(text)
    if args.output:
        if args.format == "text":
            _write(args.output, text)
        else:
            import csv
            import io
            import json

            if args.format == "jsonl":
                dump = "".join(json.dumps({"tag": t, "rejection": res.rejection[t],
                                           "undefined": res.undefined[t], "reps": res.reps})
                               + "\n" for t in res.rejection)
            else:
                buf = io.StringIO()
                w = csv.writer(buf, lineterminator="\n")
                w.writerow(("tag", "rejection", "undefined", "reps"))
                for t in res.rejection:
                    w.writerow((t, repr(res.rejection[t]), repr(res.undefined[t]), res.reps))
                dump = buf.getvalue()
            _write(args.output, dump)
    return res


COMMANDS = {"fit": cmd_fit, "diagnose": cmd_diagnose, "simulate": cmd_simulate,
            "placebo": cmd_placebo}


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except ConfigError as exc:
        err.write(f"config error: {exc}\n")
        return EXIT_USAGE
    except StageError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_RUNTIME
    except (TwoWayError, OSError) as exc:
        err.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME
    return EXIT_OK


def main_exit():  # console-script entry point
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_exit()
