"""Batch CLI: `report-plots plot --spec FILE` or `report-plots plot CSV --kind K`.

Exit status mirrors the simulation CLI: 0 on success, 1 on a rendering
failure, 2 on spec/schema errors; errors go to stderr as JSON
{code, message, location}.
"""

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import PlotError, SchemaError, SpecError
from .render import KINDS, PlotSpec, render


def load_spec_file(path):
    """Parse a TOML spec file with one or more [[plot]] tables."""
    try:
        data = tomllib.loads(Path(path).read_text())
    except FileNotFoundError:
        raise SpecError(f"spec file {path} does not exist", str(path)) from None
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"spec file is not valid TOML: {exc}", str(path)) from None
    tables = data.get("plot")
    if not tables:
        raise SpecError("spec file must contain at least one [[plot]] table", str(path))
    base = Path(path).parent
    specs = []
    for i, table in enumerate(tables):
        unknown = set(table) - {"input", "kind", "output", "title", "xlabel", "ylabel"}
        if unknown:
            raise SpecError(f"unknown key {sorted(unknown)[0]!r} in [[plot]] #{i + 1}",
                            str(path))
        for key in ("input", "kind"):
            if key not in table:
                raise SpecError(f"[[plot]] #{i + 1} is missing {key!r}", str(path))
        out = table.get("output")
        specs.append(PlotSpec(
            input=base / table["input"],
            kind=table["kind"],
            output=base / out if out else None,
            title=table.get("title", ""),
            xlabel=table.get("xlabel", ""),
            ylabel=table.get("ylabel", ""),
        ))
    return specs


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="report-plots", description="Render figures from simulation CSV artifacts"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    plot = sub.add_parser("plot", help="render one spec file or one CSV")
    plot.add_argument("csv", nargs="?", type=Path, help="input CSV (positional form)")
    plot.add_argument("--spec", type=Path, help="TOML spec file with [[plot]] tables")
    plot.add_argument("--kind", choices=KINDS, help="plot kind for the positional form")
    plot.add_argument("--out", type=Path, help="output image path (positional form)")
    plot.add_argument("--title", default="")
    return parser


def _fail(code, exc):
    json.dump({"code": code, "message": str(exc), "location": exc.location}, sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.spec is not None:
            if args.csv is not None:
                raise SpecError("give either --spec or a positional CSV, not both")
            specs = load_spec_file(args.spec)
        else:
            if args.csv is None or args.kind is None:
                raise SpecError("positional form needs a CSV path and --kind")
            specs = [PlotSpec(input=args.csv, kind=args.kind, output=args.out,
                              title=args.title)]
        for spec in specs:
            result = render(spec)
            print(f"{spec.input.name} -> {result.output.name} "
                  f"({result.n_points} points, {result.n_curves} overlay curves)")
    except (SpecError, SchemaError) as exc:
        return _fail(2, exc)
    except PlotError as exc:
        return _fail(1, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
