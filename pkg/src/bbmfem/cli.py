"""Command-line front end.

Subcommands run one study each, write CSV tables, plot scripts and a
``run.json`` manifest to ``--out``, and print a short summary. Exit codes:
0 success, 1 usage or configuration error, 2 numerical failure (or a
failed gate in ``check``).
"""
from __future__ import annotations

import argparse
import math
import re
import sys
import time
from pathlib import Path

from . import experiments as ex
from .errors import NumericalFailure
from .linalg import FactorizationError
from .mesh import ConfigurationError

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# -- value parsers ---------------------------------------------------------------------------


def parse_speed(text: str) -> float:
    """``1.6``, ``sqrt1.6`` or ``sqrt(1.6)``."""
    t = text.strip().lower()
    m = re.fullmatch(r"sqrt\(?([0-9.eE+-]+)\)?", t)
    try:
        value = math.sqrt(float(m.group(1))) if m else float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid speed {text!r}")
    return value


def parse_speeds(text: str):
    return [parse_speed(s) for s in text.split(",") if s.strip()]


def parse_floats(text: str):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {text!r}")


def parse_domain(text: str):
    parts = text.split(":")
    try:
        a, b = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"domain must look like a:b, got {text!r}")
    if not b > a:
        raise argparse.ArgumentTypeError(f"empty domain {text!r}")
    return a, b


def parse_dt(text: str):
    """``0.1`` (absolute) or ``ratio:X`` (``dt = X * dx``); returns ``(kind, value)``."""
    t = text.strip()
    try:
        if t.startswith("ratio:"):
            return "ratio", float(t[len("ratio:"):])
        return "value", float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid dt {text!r}")


def resolve_dt(dt_spec, dx: float) -> float:
    kind, value = dt_spec
    dt = value * dx if kind == "ratio" else value
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    return dt


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"invalid boolean {text!r}")


def read_config_file(path) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}")
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"{path}:{n}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


# -- parser ----------------------------------------------------------------------------------


def _common(p, out_default):
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--out", default=out_default, help="output directory")


def _run_opts(p, *, r=1, dx="0.1", dt="ratio:1", T="100", domain="-20:20", relax=True):
    p.add_argument("--r", type=int, choices=[1, 2, 3, 4], default=r, help="element degree")
    p.add_argument("--dx", type=float, default=float(dx))
    p.add_argument("--dt", type=parse_dt, default=parse_dt(dt), help="value or ratio:X (dt = X dx)")
    p.add_argument("--T", type=float, default=float(T), help="final time")
    p.add_argument("--domain", type=parse_domain, default=parse_domain(domain), help="a:b")
    p.add_argument("--stride", type=int, default=1, help="record invariants every N steps")
    if relax:
        p.add_argument("--no-relax", action="store_true", help="plain RK4 (no energy relaxation)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bbmfem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("converge", help="manufactured-solution convergence study on [0, 1]")
    _common(p, "results/converge")
    p.add_argument("--bc", choices=["periodic", "reflective"], default="reflective")
    p.add_argument("--scheme", choices=["conservative", "standard"], default="conservative")
    p.add_argument("--r", type=int, choices=[1, 2, 3, 4], default=1)
    p.add_argument("--dx", type=parse_floats, default=[0.1, 0.05, 0.02, 0.01, 0.005],
                   help="comma-separated list of mesh widths")
    p.add_argument("--dt", type=parse_dt, default=parse_dt("ratio:0.1"))
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--reference", choices=["interpolant", "exact"], default="interpolant",
                   help="compare against the degree-r interpolant or the exact field")
    p.add_argument("--jobs", type=int, default=1, help="refinements run in parallel")

    p = sub.add_parser("solitary", help="propagate one solitary wave")
    _common(p, "results/solitary")
    _run_opts(p)
    p.add_argument("--cs", type=parse_speed, default=ex.SQRT_1_6)
    p.add_argument("--bc", choices=["periodic", "reflective"], default="periodic")
    p.add_argument("--scheme", choices=["conservative", "standard"], default="conservative")
    p.add_argument("--x0", type=float, default=None, help="initial crest (default: domain centre)")
    p.add_argument("--transfer", choices=["project", "interpolate"], default="project")
    p.add_argument("--seed-wave", help="wave file to start from instead of solving for one")
    p.add_argument("--no-track", action="store_true", help="skip amplitude/phase/shape errors")

    p = sub.add_parser("collide", help="overtaking collision of two solitary waves (periodic)")
    _common(p, "results/collide")
    _run_opts(p, T="600", domain="-50:150", relax=False)
    p.add_argument("--cs", type=parse_speeds, default=[1.6, 1.2], help="two speeds, e.g. 1.6,1.2")
    p.add_argument("--centers", type=parse_floats, default=[-25.0, 0.0])
    p.add_argument("--snapshots", type=parse_floats, default=[0.0, 140.01, 240.01, 465.02])
    p.add_argument("--transfer", choices=["project", "interpolate"], default="project")

    p = sub.add_parser("reflect", help="solitary wave reflected by a wall")
    _common(p, "results/reflect")
    _run_opts(p, T="50", domain="-40:40", relax=False)
    p.add_argument("--cs", type=parse_speed, default=1.6)
    p.add_argument("--center", type=float, default=0.0)
    p.add_argument("--snapshots", type=parse_floats, default=[0.0, 15.0, 25.0, 35.0, 50.0])
    p.add_argument("--transfer", choices=["project", "interpolate"], default="project")

    p = sub.add_parser("petviashvili", help="generate a solitary wave")
    _common(p, "results/petviashvili")
    p.add_argument("--cs", type=parse_speed, default=1.6)
    p.add_argument("--domain", type=parse_domain, default=parse_domain("-40:40"))
    p.add_argument("--r", type=int, choices=[1, 2, 3, 4], default=3)
    p.add_argument("--dx", type=float, default=0.1)
    p.add_argument("--bc", choices=["periodic", "reflective"], default="periodic")
    p.add_argument("--center", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=200)

    p = sub.add_parser("check", help="run the acceptance suite or validate output CSVs")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("--criteria", type=lambda s: [int(v) for v in s.split(",")], default=None,
                   help="comma-separated criterion numbers (default: all)")
    p.add_argument("--read", help="validate every CSV in this directory instead")
    return parser


def _join_negative_values(argv):
    """Turn ``--domain -40:40`` into ``--domain=-40:40`` so values may start with '-'."""
    out = []
    for tok in argv:
        if out and re.match(r"^-\d", tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def parse_args(argv):
    parser = build_parser()
    argv = _join_negative_values(list(argv))
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        config = read_config_file(args.config)
        sub = _subparser(parser, args.command)
        known = {a.dest for a in sub._actions}
        unknown = set(config) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for action in sub._actions:
            if action.dest in config and isinstance(action, argparse._StoreTrueAction):
                config[action.dest] = _bool(config[action.dest])
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


# -- commands --------------------------------------------------------------------------------


def _gate(label, ok):
    return f"  [{'PASS' if ok else 'FAIL'}] {label}"


def _config_of(args):
    skip = {"command", "config", "out"}
    cfg = {"command": args.command}
    for k, v in vars(args).items():
        if k in skip:
            continue
        cfg[k] = list(v) if isinstance(v, tuple) else v
    return cfg


def cmd_converge(args, io):
    report = ex.run_convergence_study(args.bc, args.scheme, args.r, args.dx,
                                      dt_ratio=_ratio(args.dt, args.dx), T=args.T,
                                      reference=args.reference, jobs=args.jobs)
    files = io.write_outputs(report, args.out, _config_of(args))
    print(f"convergence: bc={args.bc} scheme={args.scheme} r={args.r}")
    for row, rate in zip(report.rows, [None] + report.rates("E0_H")):
        rate_s = "" if rate is None else f"  R0[H]={rate:.3f}"
        print(f"  dx={row.dx:<8g} E0[H]={row.E0_H:.4e} E0[U]={row.E0_U:.4e}{rate_s}")
    return files


def _ratio(dt_spec, dxs):
    kind, value = dt_spec
    if kind == "ratio":
        return value
    if len(dxs) != 1:
        raise ConfigurationError("an absolute --dt needs a single --dx; use ratio:X for a study")
    return value / dxs[0]


def _print_drift(result, bound):
    d = result.drift
    for name, value in d.as_dict().items():
        tag = " (conserved)" if name in d.expected else ""
        print(f"  E_{name:<9}= {value:.4e}{tag}")
    if bound is not None and d.expected:
        print(_gate(f"conserved drifts <= {bound:g}", d.max_expected() <= bound))
    g = result.series.gamma_stats()
    print(f"  gamma-1 in [{g['min_gamma_minus_1']:.4e}, {g['max_gamma_minus_1']:.4e}]")


def cmd_solitary(args, io):
    seed = io.read_wave(args.seed_wave) if args.seed_wave else None
    a, b = args.domain
    x0 = args.x0 if args.x0 is not None else (seed.center if seed else 0.5 * (a + b))
    relax = not args.no_relax and args.scheme == "conservative"
    result = ex.run_solitary_propagation(
        c_s=args.cs, domain=args.domain, r=args.r, dx=args.dx, dt=resolve_dt(args.dt, args.dx),
        T=args.T, scheme=args.scheme, bc=args.bc, x0=x0, relax=relax, transfer=args.transfer,
        stride=args.stride, track=not args.no_track, seed_wave=seed)
    files = io.write_outputs(result, args.out, _config_of(args))
    print(f"solitary: c_s={args.cs:.6g} r={args.r} scheme={args.scheme} steps={len(result.series.times) - 1}")
    _print_drift(result, 1e-13 if relax else None)
    if result.tracks and result.tracks[-1].t > 0:
        last = result.tracks[-1]
        print(f"  final E_amp={last.E_amp:.4e} E_phase={last.E_phase:.4e} E_shape={last.E_shape:.4e}")
    return files


def cmd_collide(args, io):
    if len(args.cs) != 2:
        raise ConfigurationError("--cs needs two comma-separated speeds")
    result = ex.run_collision(speeds=tuple(args.cs), domain=args.domain, r=args.r, dx=args.dx,
                              dt=resolve_dt(args.dt, args.dx), T=args.T,
                              centers=tuple(args.centers), snapshot_times=args.snapshots,
                              transfer=args.transfer, stride=args.stride)
    files = io.write_outputs(result, args.out, _config_of(args))
    print(f"collision: speeds={args.cs} r={args.r} steps={len(result.series.times) - 1}")
    _print_drift(result, 1e-12)
    return files


def cmd_reflect(args, io):
    result = ex.run_reflection(c_s=args.cs, domain=args.domain, r=args.r, dx=args.dx,
                               dt=resolve_dt(args.dt, args.dx), T=args.T, center=args.center,
                               snapshot_times=args.snapshots, transfer=args.transfer,
                               stride=args.stride)
    files = io.write_outputs(result, args.out, _config_of(args))
    print(f"reflection: c_s={args.cs:.6g} r={args.r} steps={len(result.series.times) - 1}")
    _print_drift(result, 1e-12)
    return files


def cmd_petviashvili(args, io):
    from .waves import petviashvili_solve

    a, b = args.domain
    started = time.perf_counter()
    wave = petviashvili_solve(a, b, ex.cells_for(a, b, args.dx), args.r, args.cs, bc=args.bc,
                              center=args.center, tol=args.tol, max_iter=args.max_iter)
    files = io.write_outputs(wave, args.out, _config_of(args), time.perf_counter() - started)
    print(f"petviashvili: c_s={args.cs:.6g} iterations={wave.iterations} "
          f"R={wave.residual_history[-1]:.3e} amplitude={wave.amplitude:.6f}")
    print(_gate(f"residual < {args.tol:g}", wave.residual_history[-1] < args.tol))
    return files


def cmd_check(args, io):
    if args.read:
        paths = sorted(Path(args.read).glob("*.csv"))
        if not paths:
            raise ConfigurationError(f"no CSV files in {args.read}")
        ok = True
        for path in paths:
            try:
                n = io.validate_csv(path)
                print(f"  [PASS] {path.name}: {n} rows")
            except ValueError as exc:
                ok = False
                print(f"  [FAIL] {path.name}: {exc}")
        return ok
    from .acceptance import CRITERIA, run_all

    unknown = sorted(set(args.criteria or ()) - set(CRITERIA))
    if unknown:
        raise ConfigurationError(f"unknown criteria: {unknown}")
    results = run_all(args.criteria)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return passed == len(results)


COMMANDS = {
    "converge": cmd_converge, "solitary": cmd_solitary, "collide": cmd_collide,
    "reflect": cmd_reflect, "petviashvili": cmd_petviashvili, "check": cmd_check,
}


def main(argv=None) -> int:
    from . import io

    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigurationError as exc:
        print(f"bbmfem: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        outcome = COMMANDS[args.command](args, io)
    except ConfigurationError as exc:
        print(f"bbmfem: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, FactorizationError) as exc:
        print(f"bbmfem: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"bbmfem: I/O error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.command == "check":
        return EXIT_OK if outcome else EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
