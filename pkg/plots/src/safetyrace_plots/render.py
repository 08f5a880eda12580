"""Render line figures from safetyrace experiment CSVs.

A FigureSpec names the input CSV, the x / y / series columns, axis options
and the output image.  Rendering draws one curve per distinct series
value, labels axes by column name, and writes a single PNG; the plotted
arrays are returned so callers (and tests) can assert on exactly what was
drawn.  Styling is pinned by the shipped style sheet so identical inputs
produce identical image bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib.resources import files as package_files
from pathlib import Path
from typing import Mapping, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_STYLE = str(package_files("safetyrace_plots") / "safetyrace.mplstyle")


class RenderError(Exception):
    """Input CSV unusable: missing file, missing column, or no data rows."""


@dataclass(frozen=True)
class FigureSpec:
    """What to plot: columns, scales, reference lines and the output path."""

    input_csv: Path
    x: str
    y: str
    out: Path
    series: Optional[str] = None
    logx: bool = False
    ref_lines: tuple[float, ...] = ()
    where: Mapping[str, str] = field(default_factory=dict)
    title: str = ""


# Column mapping for each shipped data layout: figures 1-2 are per-player
# sweep rows (sigma repeated per point, so plot player 1 only), figure 3
# compares subsidy schemes, figures 4-7 are delta tables.
FIGURE_PRESETS: dict[int, dict] = {
    1: dict(x="axis", y="sigma", series="series", logx=True, where={"player": "1"}),
    2: dict(x="axis", y="sigma", series="series", logx=True, where={"player": "1"},
            ref_lines=(1.0,)),
    3: dict(x="axis", y="sigma", series="scheme", logx=False, where={"player": "1"}),
    4: dict(x="axis", y="delta_sigma", series="series", logx=True),
    5: dict(x="axis", y="delta_sigma", series="series", logx=False),
    6: dict(x="axis", y="delta_sigma", series="series", logx=False),
    7: dict(x="axis", y="delta_sigma", series="series", logx=False),
}


@dataclass
class RenderResult:
    """The written image plus the exact arrays drawn, keyed by series label."""

    out: Path
    series: dict[str, tuple[list[float], list[float]]]


def preset_spec(figure: int, csv_path: Path, out: Optional[Path] = None) -> FigureSpec:
    if figure not in FIGURE_PRESETS:
        raise RenderError(f"no preset for figure {figure}; known: {sorted(FIGURE_PRESETS)}")
    preset = FIGURE_PRESETS[figure]
    out_path = Path(out) if out else Path(csv_path).with_suffix(".png")
    return FigureSpec(
        input_csv=Path(csv_path),
        out=out_path,
        title=f"figure {figure}",
        **preset,
    )


def load_table(path: Path) -> tuple[list[str], list[dict]]:
    path = Path(path)
    if not path.exists():
        raise RenderError(f"input CSV not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration:
            raise RenderError(f"{path}: empty file, no header") from None
        rows = [dict(zip(columns, line)) for line in reader]
    return columns, rows


def _series_sort_key(label: str):
    try:
        return (0, float(label), "")
    except ValueError:
        return (1, 0.0, label)


def extract_series(spec: FigureSpec) -> dict[str, tuple[list[float], list[float]]]:
    """Group the CSV into per-series (x, y) arrays, honoring the row filter."""
    columns, rows = load_table(spec.input_csv)
    needed = [spec.x, spec.y, *([spec.series] if spec.series else []), *spec.where]
    for name in needed:
        if name not in columns:
            raise RenderError(f"{spec.input_csv}: column {name!r} not in header {columns}")
    kept = [
        row for row in rows if all(row[col] == val for col, val in spec.where.items())
    ]
    if not kept:
        raise RenderError(f"{spec.input_csv}: no data rows to plot")
    grouped: dict[str, tuple[list[float], list[float]]] = {}
    for row in kept:
        label = row[spec.series] if spec.series else spec.y
        xs, ys = grouped.setdefault(label, ([], []))
        xs.append(float(row[spec.x]))
        ys.append(float(row[spec.y]))
    return dict(sorted(grouped.items(), key=lambda kv: _series_sort_key(kv[0])))


def build_figure(spec: FigureSpec):
    """Build the matplotlib figure; returns (figure, RenderResult)."""
    grouped = extract_series(spec)
    plt.style.use(_STYLE)
    fig, ax = plt.subplots()
    for label, (xs, ys) in grouped.items():
        ax.plot(xs, ys, label=label)
    if spec.logx:
        ax.set_xscale("log")
    for ref in spec.ref_lines:
        ax.axvline(ref, linestyle="--", linewidth=1.0, color="0.4")
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y)
    if spec.title:
        ax.set_title(spec.title)
    if spec.series:
        ax.legend(title=spec.series)
    return fig, RenderResult(out=Path(spec.out), series=grouped)


def render(spec: FigureSpec) -> RenderResult:
    """Render the figure to spec.out; the input CSV is never touched.

    Raises RenderError (leaving no output file) when the CSV is missing,
    lacks a referenced column, or has no data rows after filtering.
    """
    fig, result = build_figure(spec)
    try:
        out = Path(spec.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out)
    finally:
        plt.close(fig)
    return result
