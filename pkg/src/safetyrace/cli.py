"""Command-line front end: solve, sweep, claim and figure-data commands.

Configs are JSON documents with explicit per-player parameter blocks::

    {
      "players": [{"A": 10, "alpha": 0.5, "B": 1, "beta": 0.5,
                   "theta": 1.5, "d": 1, "r": 1}, ...],
      "beliefs": {"2": {"A": 100.0}},          # optional, 1-based player keys
      "risk_mode": "multiplicative",            # or "winner"
      "solver": {"tol": 1e-8, "x_min": 1e-6},  # optional SolverConfig fields
      "sweep": {"axis": "players[*].r", "values": [...],
                "schemes": [{"kind": "none"}]},
      "claim": {"options": {...}, "grid": {"vary": {...}}},
      "figure": {...}
    }

CSV schemas (all numbers serialized with 17 significant digits):

* sweep:   axis,scheme,player,sigma,s,p,q,xs,xp,payoff,converged
           (one row per player per point; sigma repeated within a point)
* figures 1-2: the sweep schema with a leading `series` column
* figures 4-7 (delta): series,axis,sigma_subsidize_1,sigma_subsidize_2,
           delta_sigma,converged

Every CSV gets a sibling `<stem>.manifest.json` whose `deterministic`
section (config digest, seed, solver echo, row counts) is byte-stable
across reruns; wall-clock timestamps live in the separate `timing`
section.  Shipped configs are resolved from SAFETYRACE_CONFIG_DIR, else
from the packaged `safetyrace.configs` data.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import importlib.resources
import itertools
import json
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

from . import __version__
from .model import BeliefProfile, PlayerParams, ProblemSpec, RiskMode
from .scenarios import (
    CLAIM_REGISTRY,
    ClaimSpec,
    SubsidyScheme,
    SweepSpec,
    appendix_c_experiments,
    beliefs_sweep,
    parse_axis,
    run_sweep,
    scale_players,
    set_axis,
    verify_claim,
)
from .solver import SolverConfig, solve

_PARAM_FIELDS = ("A", "alpha", "B", "beta", "theta", "d", "r")
_SOLVER_FIELDS = (
    "tol",
    "max_iters",
    "inner_tol",
    "x_min",
    "x_max",
    "n_starts",
    "seed",
    "update",
    "warm_starts",
    "damping",
)

SWEEP_COLUMNS = ("axis", "scheme", "player", "sigma", "s", "p", "q", "xs", "xp", "payoff", "converged")
SERIES_SWEEP_COLUMNS = ("series",) + SWEEP_COLUMNS
DELTA_COLUMNS = ("series", "axis", "sigma_subsidize_1", "sigma_subsidize_2", "delta_sigma", "converged")
_FLOAT_COLUMNS = {
    "axis",
    "sigma",
    "s",
    "p",
    "q",
    "xs",
    "xp",
    "payoff",
    "sigma_subsidize_1",
    "sigma_subsidize_2",
    "delta_sigma",
    "theta",
}


class ConfigError(Exception):
    """A config file is missing, malformed, or fails field validation."""


# ---------------------------------------------------------------------------
# CSV and manifest plumbing


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Sequence[Mapping]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row[c]) for c in columns])


def parse_cell(column: str, text: str):
    if column == "player":
        return int(text)
    if column == "converged":
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r} in column {column}")
        return text == "true"
    if column in _FLOAT_COLUMNS:
        return float(text)
    return text


def read_csv(path: Path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [
            {c: parse_cell(c, cell) for c, cell in zip(columns, line)} for line in reader
        ]
    return columns, rows


def config_digest(resolved: Mapping) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class RunManifest:
    """Reproducibility sidecar for one emitted CSV."""

    deterministic: dict
    timing: dict

    def write(self, csv_path: Path) -> Path:
        path = csv_path.with_suffix("").with_suffix(".manifest.json")
        with open(path, "w") as fh:
            json.dump(
                {"deterministic": self.deterministic, "timing": self.timing},
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
        return path


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _emit(
    out_path: Path,
    columns: Sequence[str],
    rows: Sequence[Mapping],
    command: str,
    resolved_config: Mapping,
    cfg: SolverConfig,
    started: str,
) -> int:
    write_csv(out_path, columns, rows)
    nonconverged = sum(1 for r in rows if not r.get("converged", True))
    RunManifest(
        deterministic={
            "command": command,
            "config_digest": config_digest(resolved_config),
            "nonconverged_rows": nonconverged,
            "rows": len(rows),
            "seed": cfg.seed,
            "solver": asdict(cfg),
            "version": __version__,
        },
        timing={"started_utc": started, "finished_utc": _utcnow()},
    ).write(out_path)
    return nonconverged


# ---------------------------------------------------------------------------
# Config loading


def config_dir() -> Path:
    env = os.environ.get("SAFETYRACE_CONFIG_DIR")
    if env:
        return Path(env)
    return Path(str(importlib.resources.files("safetyrace") / "configs"))


def load_config(path_or_name: str) -> dict:
    path = Path(path_or_name)
    if not path.exists():
        candidate = config_dir() / path_or_name
        if candidate.exists():
            path = candidate
        else:
            raise ConfigError(f"config file not found: {path_or_name}")
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return raw


def _build_player(block: Mapping, where: str) -> PlayerParams:
    if not isinstance(block, Mapping):
        raise ConfigError(f"{where}: expected an object with fields {_PARAM_FIELDS}")
    unknown = set(block) - set(_PARAM_FIELDS)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = set(_PARAM_FIELDS) - set(block)
    if missing:
        raise ConfigError(f"{where}: missing field(s) {sorted(missing)}")
    try:
        return PlayerParams(**{k: float(block[k]) for k in _PARAM_FIELDS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def build_spec(raw: Mapping, risk_override: Optional[str] = None) -> ProblemSpec:
    if "players" not in raw or not isinstance(raw["players"], list):
        raise ConfigError("config needs a 'players' list")
    players = tuple(
        _build_player(block, f"players[{k + 1}]") for k, block in enumerate(raw["players"])
    )
    if len(players) < 2:
        raise ConfigError("players: need at least 2 players")
    believed = list(players)
    for key, overrides in (raw.get("beliefs") or {}).items():
        try:
            idx = int(key) - 1
        except ValueError:
            raise ConfigError(f"beliefs: player key {key!r} is not an integer")
        if not (0 <= idx < len(players)):
            raise ConfigError(f"beliefs[{key}]: player index out of range")
        if not isinstance(overrides, Mapping):
            raise ConfigError(f"beliefs[{key}]: expected an object of field overrides")
        unknown = set(overrides) - set(_PARAM_FIELDS)
        if unknown:
            raise ConfigError(f"beliefs[{key}]: unknown field(s) {sorted(unknown)}")
        try:
            believed[idx] = replace(believed[idx], **{k: float(v) for k, v in overrides.items()})
        except ValueError as exc:
            raise ConfigError(f"beliefs[{key}]: {exc}") from exc
    mode_text = risk_override or raw.get("risk_mode", "multiplicative")
    try:
        mode = RiskMode.parse(mode_text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    scope = raw.get("belief_scope", "common")
    try:
        return ProblemSpec(
            players=players,
            beliefs=BeliefProfile(believed=tuple(believed)),
            risk_mode=mode,
            belief_scope=scope,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_solver(raw: Mapping, args: argparse.Namespace) -> SolverConfig:
    section = dict(raw.get("solver") or {})
    unknown = set(section) - set(_SOLVER_FIELDS)
    if unknown:
        raise ConfigError(f"solver: unknown field(s) {sorted(unknown)}")
    if args.seed is not None:
        section["seed"] = args.seed
    if args.tol is not None:
        section["tol"] = args.tol
    if args.max_iters is not None:
        section["max_iters"] = args.max_iters
    try:
        return SolverConfig(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from exc


def _build_scheme(block: Mapping, where: str) -> SubsidyScheme:
    if not isinstance(block, Mapping):
        raise ConfigError(f"{where}: expected an object like {{'kind': 'none'}}")
    kind = block.get("kind")
    kwargs = {}
    if "discount" in block:
        kwargs["discount"] = float(block["discount"])
    try:
        if kind == "player":
            return SubsidyScheme(kind="player", player=int(block["player"]) - 1, **kwargs)
        return SubsidyScheme(kind=kind, **kwargs)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def build_sweep(raw: Mapping, base: ProblemSpec) -> SweepSpec:
    section = raw.get("sweep")
    if not isinstance(section, Mapping):
        raise ConfigError("config needs a 'sweep' section")
    if "axis" not in section or "values" not in section:
        raise ConfigError("sweep: needs 'axis' and 'values'")
    schemes = tuple(
        _build_scheme(b, f"sweep.schemes[{k + 1}]") for k, b in enumerate(section.get("schemes") or [])
    ) or (SubsidyScheme.nobody(),)
    try:
        return SweepSpec(
            base=base,
            axis=str(section["axis"]),
            values=tuple(float(v) for v in section["values"]),
            schemes=schemes,
        )
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"sweep: {exc}") from exc


def expand_claim_grid(raw_claim: Mapping, base: ProblemSpec) -> tuple[ProblemSpec, ...]:
    """Cartesian-expand the 'vary' mapping over the base spec.

    Keys are axis paths (see parse_axis) or the literal 'risk_mode'; the
    grid is produced row-major in key order.
    """
    vary = raw_claim.get("vary") or {}
    if not vary:
        return (base,)
    keys = list(vary)
    for key in keys:
        if key != "risk_mode":
            try:
                parse_axis(key)
            except ValueError as exc:
                raise ConfigError(f"claim.vary: {exc}") from exc
    grid = []
    for combo in itertools.product(*(vary[k] for k in keys)):
        point = base
        for key, value in zip(keys, combo):
            if key == "risk_mode":
                point = replace(point, risk_mode=RiskMode.parse(str(value)))
            else:
                point = set_axis(point, key, float(value))
        grid.append(point)
    return tuple(grid)


# ---------------------------------------------------------------------------
# Commands


def _resolved(raw: Mapping, args: argparse.Namespace, cfg: SolverConfig) -> dict:
    resolved = json.loads(json.dumps(raw))
    resolved["solver"] = asdict(cfg)
    if args.risk:
        resolved["risk_mode"] = RiskMode.parse(args.risk).value
    return resolved


def cmd_solve(args: argparse.Namespace) -> int:
    raw = load_config(args.config)
    cfg = build_solver(raw, args)
    spec = build_spec(raw, risk_override=args.risk)
    result = solve(spec, cfg)
    o = result.outcome
    report = {
        "clamped": result.clamped,
        "config_digest": config_digest(_resolved(raw, args, cfg)),
        "converged": result.converged,
        "iterations": result.iterations,
        "outcome": {
            "p": list(o.p),
            "payoffs": list(o.payoffs),
            "q": list(o.q),
            "s": list(o.s),
            "sigma": o.sigma,
            "sigma_i": list(o.sigma_i),
        },
        "residual": result.residual,
        "seed": cfg.seed,
        "version": __version__,
        "xp": list(result.profile.xp),
        "xs": list(result.profile.xs),
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if result.converged else 2


def cmd_sweep(args: argparse.Namespace) -> int:
    raw = load_config(args.config)
    cfg = build_solver(raw, args)
    base = build_spec(raw, risk_override=args.risk)
    sweep = build_sweep(raw, base)
    started = _utcnow()
    rows = run_sweep(sweep, cfg, jobs=args.jobs)
    out = Path(args.out) if args.out else Path(Path(args.config).stem + ".csv")
    nonconverged = _emit(out, SWEEP_COLUMNS, rows, "sweep", _resolved(raw, args, cfg), cfg, started)
    print(f"wrote {out} ({len(rows)} rows, {nonconverged} non-converged)")
    return 0 if nonconverged == 0 else 2


def cmd_claim(args: argparse.Namespace) -> int:
    if args.name not in CLAIM_REGISTRY:
        print(f"unknown claim {args.name!r}; known: {', '.join(sorted(CLAIM_REGISTRY))}", file=sys.stderr)
        return 1
    config_name = args.config or f"claim_{args.name}.json"
    raw = load_config(config_name)
    cfg = build_solver(raw, args)
    base = build_spec(raw, risk_override=args.risk)
    section = raw.get("claim") or {}
    proposition = section.get("proposition", args.name)
    if proposition != args.name:
        raise ConfigError(
            f"config proposition {proposition!r} does not match requested claim {args.name!r}"
        )
    claim = ClaimSpec(
        grid=expand_claim_grid(section, base),
        proposition=args.name,
        options=section.get("options") or {},
    )
    report = verify_claim(claim, cfg, jobs=args.jobs)
    print(f"claim {args.name}: {report.summary()}")
    failure_rows = [
        {
            "point": k + 1,
            "risk_mode": spec.risk_mode.value,
            "theta": spec.players[0].theta,
            "diagnostic": diag,
        }
        for k, (spec, diag) in enumerate(report.failures)
    ]
    columns = ("point", "risk_mode", "theta", "diagnostic")
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(columns)
    for row in failure_rows:
        writer.writerow([format_cell(row[c]) for c in columns])
    if args.out:
        write_csv(Path(args.out), columns, failure_rows)
    if not report.passed:
        return 3
    if len(claim.grid) and report.skipped_nonconverged > 0.10 * len(claim.grid):
        return 2
    return 0


def _figure_outputs(raw: Mapping, args: argparse.Namespace, cfg: SolverConfig) -> list[tuple[str, tuple, list]]:
    """Run the figure recipe; returns [(suffix, columns, rows)] per output CSV."""
    section = raw.get("figure")
    if not isinstance(section, Mapping):
        raise ConfigError("config needs a 'figure' section")
    number = int(section.get("number", 0))
    base = build_spec(raw, risk_override=args.risk)
    jobs = args.jobs

    if number in (1, 2):
        schemes = tuple(
            _build_scheme(b, "figure.schemes") for b in section.get("schemes") or [{"kind": "none"}]
        )
        rows = []
        for value in section["series_values"]:
            spec_s = set_axis(base, section["series_axis"], float(value))
            sweep = SweepSpec(
                base=spec_s,
                axis=section["sweep_axis"],
                values=tuple(float(v) for v in section["sweep_values"]),
                schemes=schemes,
            )
            for row in run_sweep(sweep, cfg, jobs=jobs):
                rows.append({"series": float(value), **row})
        return [("", SERIES_SWEEP_COLUMNS, rows)]

    if number == 3:
        schemes = tuple(_build_scheme(b, "figure.schemes") for b in section["schemes"])
        outputs = []
        for mode_text in section["risk_modes"]:
            mode = RiskMode.parse(mode_text)
            sweep = SweepSpec(
                base=replace(base, risk_mode=mode),
                axis=section["sweep_axis"],
                values=tuple(float(v) for v in section["sweep_values"]),
                schemes=schemes,
            )
            rows = run_sweep(sweep, cfg, jobs=jobs)
            outputs.append((f"_{mode.value}", SWEEP_COLUMNS, rows))
        return outputs

    if number == 4:
        discount = float(section.get("discount", 0.5))
        rows = []
        for theta in section["series_values"]:
            spec_s = set_axis(base, section["series_axis"], float(theta))
            for row in beliefs_sweep(
                spec_s, [float(v) for v in section["beliefs_values"]], discount, cfg, jobs=jobs
            ):
                rows.append({"series": float(theta), **row})
        return [("", DELTA_COLUMNS, rows)]

    if number in (5, 6, 7):
        discount = float(section.get("discount", 0.5))
        scale = {k: float(v) for k, v in (section.get("scale") or {}).items()}
        spec_s = scale_players(base, scale) if scale else base
        modes = [RiskMode.parse(m) for m in section["risk_modes"]]
        rows = appendix_c_experiments(
            spec_s,
            [float(v) for v in section["theta_values"]],
            variants=[],
            cfg=cfg,
            discount=discount,
            modes=modes,
            jobs=jobs,
        )
        out_rows = [
            {
                "series": row["risk_mode"],
                "axis": row["theta"],
                "sigma_subsidize_1": row["sigma_subsidize_1"],
                "sigma_subsidize_2": row["sigma_subsidize_2"],
                "delta_sigma": row["delta_sigma"],
                "converged": row["converged"],
            }
            for row in rows
        ]
        return [("", DELTA_COLUMNS, out_rows)]

    raise ConfigError(f"figure.number must be 1..7, got {number}")


def cmd_figure(args: argparse.Namespace) -> int:
    if not (1 <= args.number <= 7):
        print(f"figure number must be 1..7, got {args.number}", file=sys.stderr)
        return 1
    config_name = args.config or f"figure{args.number}.json"
    raw = load_config(config_name)
    cfg = build_solver(raw, args)
    started = _utcnow()
    outputs = _figure_outputs(raw, args, cfg)
    base_out = Path(args.out) if args.out else Path(f"figure{args.number}.csv")
    total_nonconverged = 0
    for suffix, columns, rows in outputs:
        out = base_out if not suffix else base_out.with_name(base_out.stem + suffix + base_out.suffix)
        total_nonconverged += _emit(
            out, columns, rows, f"figure {args.number}", _resolved(raw, args, cfg), cfg, started
        )
        print(f"wrote {out} ({len(rows)} rows)")
    return 0 if total_nonconverged == 0 else 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="output path (CSV or JSON report)")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="concurrent grid points (output is order-independent)")
    parser.add_argument("--seed", type=int, default=None, help="override solver seed")
    parser.add_argument("--tol", type=float, default=None, help="override solver tolerance")
    parser.add_argument("--max-iters", type=int, default=None, help="override iteration cap")
    parser.add_argument("--risk", choices=["multiplicative", "winner"], default=None,
                        help="override the config's risk aggregation mode")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="safetyrace",
        description="Nash solver and experiment harness for the compute-race safety game",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one game instance, print a JSON report")
    p_solve.add_argument("config")
    _add_common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep, write CSV + manifest")
    p_sweep.add_argument("config")
    _add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_claim = sub.add_parser("claim", help="verify a registered claim over its grid")
    p_claim.add_argument("name")
    p_claim.add_argument("config", nargs="?", default=None)
    _add_common(p_claim)
    p_claim.set_defaults(func=cmd_claim)

    p_fig = sub.add_parser("figure", help="generate the data CSV for one shipped figure")
    p_fig.add_argument("number", type=int)
    p_fig.add_argument("config", nargs="?", default=None)
    _add_common(p_fig)
    p_fig.set_defaults(func=cmd_figure)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
