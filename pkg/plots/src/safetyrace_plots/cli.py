"""Command-line renderer: `safetyrace-plots render`.

Either point it at a JSON figure spec::

    safetyrace-plots render --spec myfigure.json

with fields {input_csv, x, y, out, series?, logx?, ref_lines?, where?},
or use a shipped preset for the numbered experiment figures::

    safetyrace-plots render --figure 2 --csv figure2.csv [--out figure2.png]

Presets expect the CSV schemas emitted by the safetyrace `figure` command;
the default output path is the CSV path with a .png suffix.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .render import FigureSpec, RenderError, preset_spec, render


def spec_from_file(path: Path) -> FigureSpec:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise RenderError(f"spec file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise RenderError(f"{path}: invalid JSON: {exc.msg}") from exc
    for required in ("input_csv", "x", "y", "out"):
        if required not in raw:
            raise RenderError(f"{path}: missing field {required!r}")
    return FigureSpec(
        input_csv=Path(raw["input_csv"]),
        x=str(raw["x"]),
        y=str(raw["y"]),
        out=Path(raw["out"]),
        series=raw.get("series"),
        logx=bool(raw.get("logx", False)),
        ref_lines=tuple(float(v) for v in raw.get("ref_lines", [])),
        where={str(k): str(v) for k, v in (raw.get("where") or {}).items()},
        title=str(raw.get("title", "")),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="safetyrace-plots", description="render safetyrace experiment CSVs to images"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render one figure")
    p_render.add_argument("--spec", help="JSON figure spec")
    p_render.add_argument("--figure", type=int, help="shipped preset number (1-7)")
    p_render.add_argument("--csv", help="input CSV (with --figure)")
    p_render.add_argument("--out", help="output image path")
    args = parser.parse_args(argv)

    try:
        if args.spec:
            spec = spec_from_file(Path(args.spec))
        elif args.figure is not None:
            if not args.csv:
                print("--figure requires --csv", file=sys.stderr)
                return 2
            spec = preset_spec(args.figure, Path(args.csv), Path(args.out) if args.out else None)
        else:
            print("need either --spec or --figure/--csv", file=sys.stderr)
            return 2
        result = render(spec)
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {result.out} ({len(result.series)} series)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
