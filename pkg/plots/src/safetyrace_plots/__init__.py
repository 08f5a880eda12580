"""Figure rendering for safetyrace experiment CSVs."""

from .render import (
    FIGURE_PRESETS,
    FigureSpec,
    RenderError,
    RenderResult,
    build_figure,
    extract_series,
    load_table,
    preset_spec,
    render,
)

__version__ = "0.1.0"

__all__ = [
    "FIGURE_PRESETS",
    "FigureSpec",
    "RenderError",
    "RenderResult",
    "build_figure",
    "extract_series",
    "load_table",
    "preset_spec",
    "render",
    "__version__",
]
