"""Rendering: one CSV table in, one deterministic figure file out.

Figures are a pure function of the CSV contents and the PlotSpec: fixed
fonts, sizes and markers, and no embedded timestamps, so re-rendering the
same inputs yields a byte-identical file.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .errors import SchemaError, SpecError

KINDS = ("rate-loglog", "backward-decay", "homogenize-gap")

_IMAGE_SUFFIXES = (".png", ".pdf", ".svg")

# the documented headers of the emitting subcommands
_SWEEP_COLUMNS = ("epsilon", "error", "ci_low", "ci_high")
_HOMOGENIZE_COLUMNS = ("t", "x", "epsilon", "u_eps", "se_eps", "u_bar", "se_bar", "gap")

_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "lines.markersize": 5.0,
    "svg.hashsalt": "report-plots",
}


@dataclass(frozen=True)
class PlotSpec:
    input: Path
    kind: str
    output: Path = None
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown plot kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "input", Path(self.input))
        if not self.input.is_file():
            raise SpecError(f"input file {self.input} does not exist")
        out = Path(self.output) if self.output else self.input.with_suffix(".png")
        if out.suffix not in _IMAGE_SUFFIXES:
            raise SpecError(
                f"output {out} must end in one of {_IMAGE_SUFFIXES}"
            )
        object.__setattr__(self, "output", out)


@dataclass(frozen=True)
class RenderResult:
    """What was drawn, for callers that want to verify without image parsing."""

    output: Path
    n_points: int
    n_ci_bars: int
    n_curves: int
    labels: tuple = field(default=())


def _read_table(path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"input {path} is missing column {col!r}", str(path))
        rows = list(reader)
    if not rows:
        raise SchemaError(f"input {path} has zero data rows", str(path))
    return rows


def _sweep_series(rows):
    eps = [float(r["epsilon"]) for r in rows]
    err = [float(r["error"]) for r in rows]
    lo = [float(r["ci_low"]) for r in rows]
    hi = [float(r["ci_high"]) for r in rows]
    predicted = None
    if all(r.get("predicted") not in (None, "") for r in rows):
        predicted = [float(r["predicted"]) for r in rows]
    return eps, err, lo, hi, predicted


def _draw_sweep(ax, spec, rows, loglog):
    eps, err, lo, hi, predicted = _sweep_series(rows)
    # asymmetric CI bars, clipped at zero so log axes stay valid
    yerr = [[max(e - l, 0.0) for e, l in zip(err, lo)],
            [max(h - e, 0.0) for e, h in zip(err, hi)]]
    ax.errorbar(eps, err, yerr=yerr, fmt="o", color="#1f5fa8", capsize=3,
                label="measured")
    n_curves = 0
    if loglog and predicted is not None:
        ax.plot(eps, predicted, "--", color="#c44e52", label="fitted rate shape")
        n_curves = 1
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(spec.xlabel or "epsilon")
    ax.set_ylabel(spec.ylabel or "error")
    ax.legend(loc="best")
    return RenderResult(spec.output, len(eps), len(eps), n_curves, ("measured",))


def _draw_homogenize(ax, spec, rows):
    groups = {}
    for r in rows:
        groups.setdefault((r["t"], r["x"]), []).append(r)
    labels = []
    n_points = 0
    for (t, x), grp in sorted(groups.items()):
        eps = [float(r["epsilon"]) for r in grp]
        gap = [float(r["gap"]) for r in grp]
        label = f"(t={t}, x={x})"
        ax.plot(eps, gap, "o-", label=label)
        labels.append(label)
        n_points += len(eps)
    ax.set_xlabel(spec.xlabel or "epsilon")
    ax.set_ylabel(spec.ylabel or "|u_eps - u_bar|")
    ax.legend(loc="best")
    return RenderResult(spec.output, n_points, 0, len(groups), tuple(labels))


def render(spec):
    """Render one figure; returns a RenderResult describing what was drawn."""
    if spec.kind in ("rate-loglog", "backward-decay"):
        rows = _read_table(spec.input, _SWEEP_COLUMNS)
    else:
        rows = _read_table(spec.input, _HOMOGENIZE_COLUMNS)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            if spec.kind == "rate-loglog":
                result = _draw_sweep(ax, spec, rows, loglog=True)
            elif spec.kind == "backward-decay":
                result = _draw_sweep(ax, spec, rows, loglog=False)
            else:
                result = _draw_homogenize(ax, spec, rows)
            ax.set_title(spec.title or spec.input.stem)
            ax.grid(True, which="both", alpha=0.3)
            fig.tight_layout()
            metadata = _stable_metadata(spec.output.suffix)
            fig.savefig(spec.output, metadata=metadata)
        finally:
            plt.close(fig)
    return result


def _stable_metadata(suffix):
    # suppress every timestamp-bearing field the backends would embed
    if suffix == ".png":
        return {"Software": "report-plots"}
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".pdf":
        return {"CreationDate": None, "Producer": "report-plots", "Creator": "report-plots"}
    return None
