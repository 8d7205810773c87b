"""Command-line front end: ``qpwgf solve|sweep|field|diagnose``.

Every subcommand takes a built-in scenario (``--scenario``), an optional
scenario file (``--config``) and ``--set key=value`` overrides, applied in that
order, and writes a CSV bundle plus ``schema.txt`` and the resolved
``config.txt`` into ``--out``.

Exit codes: 0 success, 2 invalid configuration, 3 geometry error, 4 solver
failure, 5 a sweep point failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import scenario as scn
from .assembly import CORRECTED, NAIVE
from .geometry import GeometryError
from .solver import SolverError

EXIT_CONFIG = 2
EXIT_GEOMETRY = 3
EXIT_SOLVER = 4
EXIT_SWEEP = 5


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", choices=sorted(scn.BUILTIN), default="kite",
                        help="built-in base scenario (default: kite)")
    parser.add_argument("--config", type=Path, help="scenario file of key = value lines")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter; may be repeated")
    parser.add_argument("--formulation", choices=(NAIVE, CORRECTED),
                        help="override the scenario formulation")
    parser.add_argument("--out", type=Path, default=Path("qpwgf-out"), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpwgf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("solve", help="solve one scenario and write report and spectrum"))
    sweep = sub.add_parser("sweep", help="sweep k1, frequency or A")
    _common(sweep)
    sweep.add_argument("--axis", choices=scn.SWEEP_AXES, required=True)
    group = sweep.add_mutually_exclusive_group(required=True)
    group.add_argument("--values", help="comma-separated values")
    group.add_argument("--range", dest="value_range", metavar="START:STOP:COUNT",
                       help="COUNT equispaced values, endpoints included")
    sweep.add_argument("--both", action="store_true", help="run naive and corrected at every point")
    field = sub.add_parser("field", help="sample the total field on the unit cell")
    _common(field)
    field.add_argument("--nx", type=int, default=64)
    field.add_argument("--ny", type=int, default=128)
    _common(sub.add_parser("diagnose", help="quasi-periodicity and radiation diagnostics"))
    sub.add_parser("show", help="print a resolved scenario").add_argument(
        "--scenario", choices=sorted(scn.BUILTIN), default="kite")
    return parser


def load_scenario(args) -> scn.Scenario:
    base = scn.BUILTIN[args.scenario]
    if getattr(args, "config", None) is not None:
        base = scn.parse_text(args.config.read_text(), base)
    sc = scn.apply_overrides(base, getattr(args, "overrides", []))
    if getattr(args, "formulation", None):
        sc = sc.replace(formulation=args.formulation)
    return sc


def _values(args) -> list[float]:
    if args.values is not None:
        try:
            return [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise scn.ConfigError("values", f"cannot parse {args.values!r}") from None
    try:
        start, stop, count = args.value_range.split(":")
        return list(np.linspace(float(start), float(stop), int(count)))
    except ValueError:
        raise scn.ConfigError("range", f"expected START:STOP:COUNT, got {args.value_range!r}") from None


def _solve(args, out: Path) -> int:
    sc = load_scenario(args)
    result = scn.run(sc)
    extra = {}
    files = ["report.csv", "spectrum.csv"]
    if args.command == "diagnose":
        summary, rows = scn.diagnostics(result)
        extra.update(summary)
    scn.write_run(out, sc, result, extra)
    if args.command == "diagnose":
        scn.write_csv(out / "radiation.csv", list(scn.SCHEMA["radiation.csv"]), rows)
        files.append("radiation.csv")
    if args.command == "field":
        scn.write_csv(out / "field.csv", list(scn.SCHEMA["field.csv"]),
                      scn.field_rows(result, args.nx, args.ny))
        files.append("field.csv")
    scn.write_schema(out, files)
    rep = result.report()
    print(f"{sc.name} {rep['formulation']}: error_eb={rep['error_eb']:.3e} R={rep['R']:.6f} "
          f"T={rep['T']:.6f} unknowns={rep['unknowns']} iterations={rep['iterations']} "
          f"({result.seconds:.1f} s)")
    return 0


def _sweep(args, out: Path) -> int:
    sc = load_scenario(args)
    forms = (NAIVE, CORRECTED) if args.both else (sc.formulation,)
    rows = scn.sweep(sc, args.axis, _values(args), forms)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(scn.serialize(sc))
    scn.write_csv(out / "sweep.csv", list(scn.SCHEMA["sweep.csv"]), rows)
    scn.write_schema(out, ["sweep.csv"])
    for row in rows:
        if row["status"] == "ok":
            print(f"{row['axis']}={row['value']:.10g} {row['formulation']}: "
                  f"error_eb={row['error_eb']:.3e} R={row['R']:.6f} T={row['T']:.6f}")
        else:
            print(f"{row['axis']}={row['value']:.10g} {row['formulation']}: FAILED {row['message']}")
    return EXIT_SWEEP if any(r["status"] != "ok" for r in rows) else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "show":
            sys.stdout.write(scn.serialize(scn.BUILTIN[args.scenario]))
            return 0
        if args.command == "sweep":
            return _sweep(args, args.out)
        return _solve(args, args.out)
    except scn.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except SolverError as exc:
        print(f"solver failure: {exc} (residual={exc.residual}, "
              f"condition={exc.condition_estimate}, iterations={exc.iterations})", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
