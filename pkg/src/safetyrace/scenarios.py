"""Parameter sweeps, subsidy comparisons and claim verification.

Experiments wrap the solver: a sweep walks one parameter axis (optionally
under subsidy schemes) and records the solved outcome per point; claim
verification evaluates a named predicate over a grid of game instances
and reports failures with diagnostics, skipping and counting points where
the solver did not converge.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .model import BeliefProfile, PlayerParams, ProblemSpec, RiskMode
from .solver import EquilibriumResult, SolverConfig, solve

_PARAM_FIELDS = ("A", "alpha", "B", "beta", "theta", "d", "r")

# Sigma differences below this floor are ties, excluded from sign claims.
TIE_FLOOR = 1e-7


@dataclass(frozen=True)
class SubsidyScheme:
    """Price discount for nobody, one player, or everybody.

    player is a 0-based index; labels are 1-based to match the reports.
    """

    kind: str = "none"
    player: Optional[int] = None
    discount: float = 0.5

    def __post_init__(self):
        if self.kind not in ("none", "player", "both"):
            raise ValueError(f"scheme kind must be none|player|both, got {self.kind!r}")
        if (self.kind == "player") != (self.player is not None):
            raise ValueError("player index is required exactly when kind == 'player'")
        if not (0.0 < self.discount <= 1.0):
            raise ValueError(f"discount must be in (0, 1], got {self.discount}")

    @classmethod
    def nobody(cls) -> "SubsidyScheme":
        return cls(kind="none")

    @classmethod
    def for_player(cls, player: int, discount: float = 0.5) -> "SubsidyScheme":
        return cls(kind="player", player=player, discount=discount)

    @classmethod
    def everybody(cls, discount: float = 0.5) -> "SubsidyScheme":
        return cls(kind="both", discount=discount)

    @property
    def label(self) -> str:
        if self.kind == "player":
            return f"player{self.player + 1}"
        return self.kind


def apply_scheme(spec: ProblemSpec, scheme: SubsidyScheme) -> ProblemSpec:
    """Multiply the targeted players' factor price by the discount.

    Believed prices move identically: prices are observable.
    """
    if scheme.kind == "none":
        return spec
    if scheme.kind == "player":
        if not (0 <= scheme.player < spec.n):
            raise IndexError(f"scheme player {scheme.player} out of range for n={spec.n}")
        targets = {scheme.player}
    else:
        targets = set(range(spec.n))
    players = tuple(
        replace(p, r=p.r * scheme.discount) if j in targets else p
        for j, p in enumerate(spec.players)
    )
    believed = tuple(
        replace(b, r=b.r * scheme.discount) if j in targets else b
        for j, b in enumerate(spec.beliefs.believed)
    )
    return replace(spec, players=players, beliefs=BeliefProfile(believed=believed))


_AXIS_RE = re.compile(r"^(players|beliefs)\[(\d+|\*)\]\.([A-Za-z_]+)$")


def parse_axis(axis: str) -> tuple[str, Optional[int], str]:
    """Parse 'players[2].r' style paths; indices are 1-based, '*' = all."""
    m = _AXIS_RE.match(axis.strip())
    if not m:
        raise ValueError(f"cannot parse axis {axis!r}; expected players[K].field or beliefs[K].field")
    section, idx, fieldname = m.groups()
    if fieldname not in _PARAM_FIELDS:
        raise ValueError(f"unknown parameter field {fieldname!r} in axis {axis!r}")
    index = None if idx == "*" else int(idx) - 1
    if index is not None and index < 0:
        raise ValueError(f"player index in axis {axis!r} must be >= 1")
    return section, index, fieldname


def set_axis(spec: ProblemSpec, axis: str, value: float) -> ProblemSpec:
    """Return a copy of spec with the axis parameter set to value.

    Setting a true parameter also updates the matching believed field when
    belief and truth currently agree, so truthful beliefs track the sweep
    while deliberate overrides stay in place.  Belief paths touch only the
    believed parameters.
    """
    section, index, name = parse_axis(axis)
    targets = range(spec.n) if index is None else [index]
    for k in targets:
        if not (0 <= k < spec.n):
            raise IndexError(f"axis {axis!r}: player {k + 1} out of range for n={spec.n}")
    players = list(spec.players)
    believed = list(spec.beliefs.believed)
    for k in targets:
        if section == "players":
            old = getattr(players[k], name)
            players[k] = replace(players[k], **{name: value})
            if getattr(believed[k], name) == old:
                believed[k] = replace(believed[k], **{name: value})
        else:
            believed[k] = replace(believed[k], **{name: value})
    return replace(spec, players=tuple(players), beliefs=BeliefProfile(believed=tuple(believed)))


@dataclass(frozen=True)
class SweepSpec:
    """One axis, its values, and the subsidy schemes to cross with it."""

    base: ProblemSpec
    axis: str
    values: tuple[float, ...]
    schemes: tuple[SubsidyScheme, ...] = (SubsidyScheme.nobody(),)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if not self.values:
            raise ValueError("sweep values must be nonempty")
        diffs = np.diff(self.values)
        if len(diffs) and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("sweep values must be strictly monotone")
        parse_axis(self.axis)
        set_axis(self.base, self.axis, self.values[0])


def _solve_task(args: tuple[ProblemSpec, SolverConfig]) -> EquilibriumResult:
    spec, cfg = args
    return solve(spec, cfg)


def _run_tasks(
    tasks: Sequence[tuple[ProblemSpec, SolverConfig]], jobs: int = 1
) -> list[EquilibriumResult]:
    """Solve independent instances, reducing in input order regardless of jobs."""
    if jobs <= 1 or len(tasks) <= 1:
        return [_solve_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_solve_task, tasks))


def run_sweep(sweep: SweepSpec, cfg: SolverConfig, jobs: int = 1) -> list[dict]:
    """Solve every (value, scheme) point and emit one row per player.

    Sigma and all reported quantities come from true parameters.  Points
    that fail to converge are flagged, never dropped or fabricated.
    """
    points = [
        (value, scheme, apply_scheme(set_axis(sweep.base, sweep.axis, value), scheme))
        for value in sweep.values
        for scheme in sweep.schemes
    ]
    results = _run_tasks([(spec, cfg) for _, _, spec in points], jobs=jobs)
    rows = []
    for (value, scheme, _), res in zip(points, results):
        o = res.outcome
        for j in range(len(o.s)):
            rows.append(
                {
                    "axis": value,
                    "scheme": scheme.label,
                    "player": j + 1,
                    "sigma": o.sigma,
                    "s": o.s[j],
                    "p": o.p[j],
                    "q": o.q[j],
                    "xs": res.profile.xs[j],
                    "xp": res.profile.xp[j],
                    "payoff": o.payoffs[j],
                    "converged": res.converged,
                }
            )
    return rows


@dataclass(frozen=True)
class SubsidyComparison:
    """Aggregate safety under each subsidy scheme, plus the player-1-minus-2 gap."""

    sigma: Mapping[str, Optional[float]]
    delta: Optional[float]
    diagnostics: tuple[str, ...]

    @property
    def converged(self) -> bool:
        return all(v is not None for v in self.sigma.values())


def compare_subsidies(
    spec: ProblemSpec, discount: float, cfg: SolverConfig, jobs: int = 1
) -> SubsidyComparison:
    """Sigma under schemes {none, player1, player2, both} for a 2-player game.

    delta is sigma[player1] - sigma[player2]: positive means subsidizing
    player 1 (the designated/more productive player by convention) is
    better for aggregate safety.
    """
    if spec.n != 2:
        raise ValueError("compare_subsidies expects a 2-player spec")
    schemes = [
        SubsidyScheme.nobody(),
        SubsidyScheme.for_player(0, discount),
        SubsidyScheme.for_player(1, discount),
        SubsidyScheme.everybody(discount),
    ]
    results = _run_tasks([(apply_scheme(spec, s), cfg) for s in schemes], jobs=jobs)
    sigma: dict[str, Optional[float]] = {}
    notes = []
    for scheme, res in zip(schemes, results):
        if res.converged:
            sigma[scheme.label] = res.outcome.sigma
        else:
            sigma[scheme.label] = None
            notes.append(f"scheme {scheme.label}: no convergence (residual {res.residual:.3g})")
    if sigma["player1"] is None or sigma["player2"] is None:
        delta = None
    else:
        delta = sigma["player1"] - sigma["player2"]
    return SubsidyComparison(sigma=sigma, delta=delta, diagnostics=tuple(notes))


def beliefs_sweep(
    spec: ProblemSpec,
    axis_Aprime: Sequence[float],
    discount: float,
    cfg: SolverConfig,
    jobs: int = 1,
) -> list[dict]:
    """Sweep player 2's believed safety productivity A'.

    For each A', reports sigma (under true parameters) when subsidizing
    player 1 versus player 2, and their difference.  Player 1's beliefs
    are left as configured (truthful in the shipped experiments).
    """
    if spec.n != 2:
        raise ValueError("beliefs_sweep expects a 2-player spec")
    points = []
    for ap in axis_Aprime:
        base = set_axis(spec, "beliefs[2].A", float(ap))
        points.append((ap, apply_scheme(base, SubsidyScheme.for_player(0, discount))))
        points.append((ap, apply_scheme(base, SubsidyScheme.for_player(1, discount))))
    results = _run_tasks([(s, cfg) for _, s in points], jobs=jobs)
    rows = []
    for k in range(0, len(points), 2):
        ap = points[k][0]
        res1, res2 = results[k], results[k + 1]
        ok = res1.converged and res2.converged
        rows.append(
            {
                "axis": float(ap),
                "sigma_subsidize_1": res1.outcome.sigma,
                "sigma_subsidize_2": res2.outcome.sigma,
                "delta_sigma": res1.outcome.sigma - res2.outcome.sigma if ok else math.nan,
                "converged": ok,
            }
        )
    return rows


def scale_players(spec: ProblemSpec, scale: Mapping[str, float]) -> ProblemSpec:
    """Multiply the named parameter fields of every player (and belief)."""
    for name in scale:
        if name not in _PARAM_FIELDS:
            raise ValueError(f"unknown parameter field {name!r} in scaling")

    def scaled(p: PlayerParams) -> PlayerParams:
        return replace(p, **{k: getattr(p, k) * v for k, v in scale.items()})

    return replace(
        spec,
        players=tuple(scaled(p) for p in spec.players),
        beliefs=BeliefProfile(believed=tuple(scaled(b) for b in spec.beliefs.believed)),
    )


def appendix_c_experiments(
    base: ProblemSpec,
    theta_axis: Sequence[float],
    variants: Sequence[tuple[str, Mapping[str, float]]],
    cfg: SolverConfig,
    discount: float = 0.5,
    modes: Sequence[RiskMode] = (RiskMode.MULTIPLICATIVE, RiskMode.WINNER_ONLY),
    jobs: int = 1,
) -> list[dict]:
    """Differing-d subsidy comparison across theta, variants and risk modes.

    The base spec should list the high-d player first; delta_sigma is then
    sigma(subsidize high-d) - sigma(subsidize low-d).  Each variant is a
    (name, field-scaling) pair applied on top of the base (the base itself
    is always included as variant 'base').
    """
    all_variants = [("base", {})] + list(variants)
    rows = []
    for vname, scale in all_variants:
        scaled_base = scale_players(base, scale) if scale else base
        for mode in modes:
            spec_m = replace(scaled_base, risk_mode=mode)
            for th in theta_axis:
                point = set_axis(spec_m, "players[*].theta", float(th))
                res1 = solve(apply_scheme(point, SubsidyScheme.for_player(0, discount)), cfg)
                res2 = solve(apply_scheme(point, SubsidyScheme.for_player(1, discount)), cfg)
                ok = res1.converged and res2.converged
                rows.append(
                    {
                        "variant": vname,
                        "risk_mode": mode.value,
                        "theta": float(th),
                        "sigma_subsidize_1": res1.outcome.sigma,
                        "sigma_subsidize_2": res2.outcome.sigma,
                        "delta_sigma": res1.outcome.sigma - res2.outcome.sigma if ok else math.nan,
                        "converged": ok,
                    }
                )
    return rows


@dataclass(frozen=True)
class ClaimSpec:
    """A finite grid of game instances and the predicate they must satisfy."""

    grid: tuple[ProblemSpec, ...]
    proposition: str
    options: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        if self.proposition not in CLAIM_REGISTRY:
            raise KeyError(
                f"unknown claim {self.proposition!r}; known: {sorted(CLAIM_REGISTRY)}"
            )


@dataclass(frozen=True)
class ClaimReport:
    """Outcome of grid verification: failures listed, non-convergence counted."""

    passed: bool
    checked: int
    failures: tuple[tuple[ProblemSpec, str], ...]
    skipped_nonconverged: int
    vacuous: bool = False

    def summary(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        extra = " (vacuous)" if self.vacuous else ""
        return (
            f"{state}{extra}: checked={self.checked} failures={len(self.failures)} "
            f"skipped_nonconverged={self.skipped_nonconverged}"
        )


def verify_claim(claim: ClaimSpec, cfg: SolverConfig, jobs: int = 1) -> ClaimReport:
    """Evaluate the claim's predicate at every grid point.

    Points where the needed solves do not converge are skipped and
    counted, never treated as evidence either way.
    """
    predicate = CLAIM_REGISTRY[claim.proposition]
    failures = []
    skipped = 0
    for spec in claim.grid:
        status, diagnostic = predicate(spec, cfg, dict(claim.options))
        if status == "skip":
            skipped += 1
        elif status == "fail":
            failures.append((spec, diagnostic))
    return ClaimReport(
        passed=not failures,
        checked=len(claim.grid) - skipped,
        failures=tuple(failures),
        skipped_nonconverged=skipped,
        vacuous=not claim.grid,
    )


# ---------------------------------------------------------------------------
# Claim predicate registry.  Each predicate maps (spec, cfg, options) to
# ("pass" | "fail" | "skip", diagnostic) and is a pure function of solved
# results for the given instance.


def _common_theta(spec: ProblemSpec) -> float:
    thetas = {p.theta for p in spec.players}
    if len(thetas) != 1:
        raise ValueError("predicate expects a common theta across players")
    return thetas.pop()


def _pred_sigma_monotone_in_r(spec, cfg, options):
    r_values = [float(v) for v in options["r_values"]]
    tie = float(options.get("tie_floor", TIE_FLOOR))
    p0 = spec.players[0]
    theta = _common_theta(spec)
    crit = p0.alpha / p0.beta
    if theta == crit:
        return "skip", f"theta == alpha/beta == {crit}; direction undefined"
    expected = 1.0 if theta > crit else -1.0
    sigmas = []
    for r in r_values:
        res = solve(set_axis(spec, "players[*].r", r), cfg)
        if not res.converged:
            return "skip", f"no convergence at r={r:g}"
        sigmas.append(res.outcome.sigma)
    for k, diff in enumerate(np.diff(sigmas)):
        if abs(diff) <= tie:
            return "fail", (
                f"sigma tie ({diff:+.3g}) between r={r_values[k]:g} and r={r_values[k+1]:g}"
            )
        if diff * expected < 0:
            return "fail", (
                f"sigma moves {diff:+.3g} against expected sign {expected:+g} "
                f"between r={r_values[k]:g} and r={r_values[k+1]:g} (theta={theta:g})"
            )
    return "pass", ""


def _pred_sigma_to_one_as_r2_to_zero(spec, cfg, options):
    r2_values = [float(v) for v in options["r2_values"]]
    floor = float(options.get("sigma_floor", 0.99))
    r2_min = min(r2_values)
    res = solve(set_axis(spec, "players[2].r", r2_min), cfg)
    if not res.converged:
        return "skip", f"no convergence at r2={r2_min:g}"
    if res.outcome.sigma < floor:
        return "fail", f"sigma={res.outcome.sigma:.6f} < {floor} at r2={r2_min:g}"
    return "pass", ""


def _delta_for(spec, cfg, discount, i_first):
    """sigma(subsidize i_first) - sigma(subsidize the other player), or None."""
    other = 1 - i_first
    res_a = solve(apply_scheme(spec, SubsidyScheme.for_player(i_first, discount)), cfg)
    res_b = solve(apply_scheme(spec, SubsidyScheme.for_player(other, discount)), cfg)
    if not (res_a.converged and res_b.converged):
        return None
    return res_a.outcome.sigma - res_b.outcome.sigma


def _pred_subsidy_productive_better(spec, cfg, options):
    discount = float(options.get("discount", 0.5))
    tie = float(options.get("tie_floor", TIE_FLOOR))
    bs = [p.B for p in spec.players]
    if bs[0] == bs[1]:
        return "skip", "players equally productive; no designated player"
    productive = int(np.argmax(bs))
    delta = _delta_for(spec, cfg, discount, productive)
    if delta is None:
        return "skip", "no convergence under a subsidy scheme"
    if delta > tie:
        return "pass", ""
    return "fail", f"delta_sigma={delta:+.3g} does not favor the productive player"


def _pred_subsidy_productive_better_iff_theta_gt_neg1(spec, cfg, options):
    discount = float(options.get("discount", 0.5))
    tie = float(options.get("tie_floor", TIE_FLOOR))
    theta = _common_theta(spec)
    if theta == -1.0:
        return "skip", "theta at the -1 threshold; direction undefined"
    bs = [p.B for p in spec.players]
    if bs[0] == bs[1]:
        return "skip", "players equally productive; no designated player"
    productive = int(np.argmax(bs))
    delta = _delta_for(spec, cfg, discount, productive)
    if delta is None:
        return "skip", "no convergence under a subsidy scheme"
    expected = 1.0 if theta > -1.0 else -1.0
    if abs(delta) <= tie:
        return "fail", f"delta_sigma={delta:+.3g} is a tie at theta={theta:g}"
    if delta * expected < 0:
        return "fail", (
            f"delta_sigma={delta:+.3g} has wrong sign at theta={theta:g} "
            f"(expected {'positive' if expected > 0 else 'negative'})"
        )
    return "pass", ""


def _pred_subsidize_low_A_believer_better(spec, cfg, options):
    discount = float(options.get("discount", 0.5))
    tie = float(options.get("tie_floor", TIE_FLOOR))
    believed_A = [b.A for b in spec.beliefs.believed]
    if believed_A[0] == believed_A[1]:
        return "skip", "players agree on A; no safety-conscious player"
    conscious = int(np.argmin(believed_A))
    delta = _delta_for(spec, cfg, discount, conscious)
    if delta is None:
        return "skip", "no convergence under a subsidy scheme"
    if delta > tie:
        return "pass", ""
    return "fail", (
        f"delta_sigma={delta:+.3g} does not favor the low-A believer "
        f"(believed A: {believed_A})"
    )


def _pred_appendixC_low_theta_multiplicative(spec, cfg, options):
    discount = float(options.get("discount", 0.5))
    tie = float(options.get("tie_floor", TIE_FLOOR))
    if spec.risk_mode is not RiskMode.MULTIPLICATIVE:
        return "skip", "predicate is about multiplicative risk"
    ds = [p.d for p in spec.players]
    if ds[0] == ds[1]:
        return "skip", "players share d; no high-d player"
    high_d = int(np.argmax(ds))
    delta = _delta_for(spec, cfg, discount, high_d)
    if delta is None:
        return "skip", "no convergence under a subsidy scheme"
    if delta < -tie:
        return "pass", ""
    return "fail", (
        f"delta_sigma={delta:+.3g}: subsidizing the low-d player should win at low theta"
    )


CLAIM_REGISTRY: dict[str, Callable] = {
    "sigma_monotone_in_r": _pred_sigma_monotone_in_r,
    "sigma_to_one_as_r2_to_zero": _pred_sigma_to_one_as_r2_to_zero,
    "subsidy_productive_better": _pred_subsidy_productive_better,
    "subsidy_productive_better_iff_theta_gt_neg1": _pred_subsidy_productive_better_iff_theta_gt_neg1,
    "subsidize_low_A_believer_better": _pred_subsidize_low_A_believer_better,
    "appendixC_low_theta_multiplicative": _pred_appendixC_low_theta_multiplicative,
}
