"""Pure-strategy Nash solver: inner best responses plus fixed-point iteration.

The inner problem (one player's optimal split between safety and
performance compute, opponents fixed) is solved with multi-start
Nelder-Mead in log-coordinates, where the power-law payoff is well
scaled.  The outer loop iterates best responses, simultaneously (Jacobi,
default) or sequentially (Gauss-Seidel), until the profile stops moving.
A log-spaced exhaustive grid solver doubles as an independent oracle for
two-player instances.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .model import (
    Outcome,
    ProblemSpec,
    RiskMode,
    StrategyProfile,
    believed_params,
    evaluate,
    performance,
    safety,
)

_LOG_CAP = 690.0  # exp(690) ~ 1e299; exponents past this are clamped


class NonFinitePayoffError(RuntimeError):
    """The best-response objective was non-finite at every tested start."""


def _player_stream(seed: int, params) -> np.random.Generator:
    """Multi-start sample stream seeded by the player's parameter block.

    Keying on parameters rather than the player index makes solver
    trajectories invariant to relabeling the players, while staying
    bit-deterministic across runs.
    """
    blob = struct.pack(
        "<7d", params.A, params.alpha, params.B, params.beta, params.theta, params.d, params.r
    )
    words = np.frombuffer(hashlib.sha256(blob).digest()[:16], dtype=np.uint64)
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, int(words[0]), int(words[1])])


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the best-response iteration.

    tol is the convergence threshold on the max relative strategy change
    per round; x_min/x_max bound both allocations (the strictly positive
    floor keeps safety finite when theta > 0).  update selects Jacobi
    (simultaneous) or Gauss-Seidel (sequential) rounds; damping blends
    log-strategies toward the previous round once oscillation is detected.
    n_starts seeds the first round's inner searches; warm_starts later
    rounds (the incumbent point always remains a start).
    """

    tol: float = 1e-8
    max_iters: int = 500
    inner_tol: float = 1e-10
    x_min: float = 1e-10
    x_max: float = 1e10
    n_starts: int = 8
    seed: int = 0
    update: str = "jacobi"
    warm_starts: int = 2
    damping: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.x_min < self.x_max):
            raise ValueError("need 0 < x_min < x_max")
        if self.tol <= 0.0 or self.inner_tol <= 0.0:
            raise ValueError("tol and inner_tol must be positive")
        if self.max_iters < 1 or self.n_starts < 1 or self.warm_starts < 1:
            raise ValueError("max_iters, n_starts and warm_starts must be >= 1")
        if self.update not in ("jacobi", "seidel"):
            raise ValueError(f"update must be 'jacobi' or 'seidel', got {self.update!r}")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must be in (0, 1]")


@dataclass(frozen=True)
class EquilibriumResult:
    """A candidate equilibrium with convergence diagnostics.

    residual is the final max relative strategy change; clamped marks
    profiles sitting on the strategy box boundary.
    """

    profile: StrategyProfile
    outcome: Outcome
    converged: bool
    iterations: int
    residual: float
    clamped: bool


def _objective(
    i: int, spec: ProblemSpec, profile: StrategyProfile, use_beliefs: bool = True
) -> tuple[Callable[[float, float], float], Callable[[np.ndarray, np.ndarray], np.ndarray]]:
    """Player i's payoff as a function of own log-allocations.

    Opponents are frozen at `profile` and their production is precomputed
    under the parameters player i acts on.  Returns a scalar flavor (for
    the simplex search) and a vectorized flavor (for grids).
    """
    params = believed_params(spec, i) if use_beliefs else spec.players
    own = params[i]
    la, lb = math.log(own.A), math.log(own.B)
    alpha, beta, theta = own.alpha, own.beta, own.theta
    d, r = own.d, own.r

    opp_p = []
    opp_s = []
    for j, pj in enumerate(params):
        if j == i:
            continue
        p_j = performance(pj, profile.xp[j])
        opp_p.append(p_j)
        opp_s.append(safety(pj, profile.xs[j], p_j))
    sum_p_opp = float(sum(opp_p))
    exp = math.exp
    cap = _LOG_CAP

    if spec.risk_mode is RiskMode.MULTIPLICATIVE:
        prod_opp = 1.0
        for s_j in opp_s:
            prod_opp *= s_j / (1.0 + s_j)

        def scalar(lxs: float, lxp: float) -> float:
            lp = lb + beta * lxp
            ls = la + alpha * lxs - theta * lp
            p = exp(lp if -cap < lp < cap else (cap if lp > 0 else -cap))
            s = exp(ls if -cap < ls < cap else (cap if ls > 0 else -cap))
            sigma = prod_opp * s / (1.0 + s)
            q = p / (p + sum_p_opp)
            return sigma * q - (1.0 - sigma) * d - r * (exp(lxs) + exp(lxp))

        def vector(lxs: np.ndarray, lxp: np.ndarray) -> np.ndarray:
            lp = lb + beta * lxp
            ls = la + alpha * lxs - theta * lp
            p = np.exp(np.clip(lp, -cap, cap))
            s = np.exp(np.clip(ls, -cap, cap))
            sigma = prod_opp * s / (1.0 + s)
            q = p / (p + sum_p_opp)
            return sigma * q - (1.0 - sigma) * d - r * (np.exp(lxs) + np.exp(lxp))

    else:
        sig_p_opp = float(sum((s_j / (1.0 + s_j)) * p_j for s_j, p_j in zip(opp_s, opp_p)))

        def scalar(lxs: float, lxp: float) -> float:
            lp = lb + beta * lxp
            ls = la + alpha * lxs - theta * lp
            p = exp(lp if -cap < lp < cap else (cap if lp > 0 else -cap))
            s = exp(ls if -cap < ls < cap else (cap if ls > 0 else -cap))
            sig_own = s / (1.0 + s)
            tot = p + sum_p_opp
            q = p / tot
            sigma = (sig_own * p + sig_p_opp) / tot
            return sig_own * q - (1.0 - sigma) * d - r * (exp(lxs) + exp(lxp))

        def vector(lxs: np.ndarray, lxp: np.ndarray) -> np.ndarray:
            lp = lb + beta * lxp
            ls = la + alpha * lxs - theta * lp
            p = np.exp(np.clip(lp, -cap, cap))
            s = np.exp(np.clip(ls, -cap, cap))
            sig_own = s / (1.0 + s)
            tot = p + sum_p_opp
            q = p / tot
            sigma = (sig_own * p + sig_p_opp) / tot
            return sig_own * q - (1.0 - sigma) * d - r * (np.exp(lxs) + np.exp(lxp))

    return scalar, vector


def _simplex_max(
    f: Callable[[float, float], float],
    x0: np.ndarray,
    lo: float,
    hi: float,
    xatol: float,
    step: float,
) -> tuple[np.ndarray, float]:
    """One bounded Nelder-Mead run in log-coordinates; returns (point, value)."""

    def neg(x: np.ndarray) -> float:
        return -f(float(x[0]), float(x[1]))

    sim = np.empty((3, 2))
    sim[0] = x0
    for k in range(2):
        vertex = x0.copy()
        vertex[k] = vertex[k] + step if vertex[k] + step <= hi else vertex[k] - step
        sim[k + 1] = vertex
    res = minimize(
        neg,
        x0,
        method="Nelder-Mead",
        bounds=[(lo, hi), (lo, hi)],
        options={
            "xatol": xatol,
            "fatol": 1e30,
            "maxfev": 800,
            "initial_simplex": sim,
        },
    )
    point = np.clip(res.x, lo, hi)
    return point, float(-res.fun)


def _pick_candidate(
    candidates: list[tuple[float, float, float]]
) -> tuple[float, float, float]:
    """Deterministic argmax with ties broken by total spend, then xp."""
    best = max(v for v, _, _ in candidates)
    tol = 1e-12 * (1.0 + abs(best))
    tied = [(xs + xp, xp, v, xs) for v, xs, xp in candidates if best - v <= tol]
    tied.sort()
    total, xp, value, xs = tied[0]
    return value, xs, xp


def best_response(
    i: int,
    profile: StrategyProfile,
    spec: ProblemSpec,
    cfg: SolverConfig,
    *,
    n_starts: Optional[int] = None,
    xatol: Optional[float] = None,
    step: float = 1.0,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, float]:
    """Maximize player i's believed payoff over the strategy box.

    Opponents' allocations are taken from `profile`.  Runs a simplex
    search from each of n_starts deterministic seeded starts (the
    player's current point, the unit point, then log-uniform samples) and
    returns the best point found, never worse than any tested start.
    """
    if n_starts is None:
        n_starts = cfg.n_starts
    if xatol is None:
        xatol = cfg.inner_tol
    if rng is None:
        rng = _player_stream(cfg.seed, spec.beliefs.believed[i])
    scalar, _ = _objective(i, spec, profile, use_beliefs=True)
    lo, hi = math.log(cfg.x_min), math.log(cfg.x_max)

    own = np.clip(
        [math.log(max(profile.xs[i], cfg.x_min)), math.log(max(profile.xp[i], cfg.x_min))],
        lo,
        hi,
    )
    starts = [own]
    if n_starts >= 2:
        starts.append(np.clip(np.zeros(2), lo, hi))
    while len(starts) < n_starts:
        starts.append(rng.uniform(lo, hi, size=2))

    # Cheap probes guard the quasi-exit optimum (xp at the floor) that a
    # local search from an interior start can miss.
    probes = [
        np.array([lo, lo]),
        np.array([own[0], lo]),
        np.array([hi * 0.5, lo]),
    ]

    candidates: list[tuple[float, float, float]] = []
    for pt in starts + probes:
        v = scalar(float(pt[0]), float(pt[1]))
        if math.isfinite(v):
            candidates.append((v, math.exp(pt[0]), math.exp(pt[1])))
    if not candidates:
        raise NonFinitePayoffError(f"payoff of player {i} non-finite at every start")

    best_local = -math.inf
    for pt in starts:
        point, value = _simplex_max(scalar, np.asarray(pt, dtype=float), lo, hi, xatol, step)
        if math.isfinite(value):
            candidates.append((value, math.exp(point[0]), math.exp(point[1])))
            best_local = max(best_local, value)

    # A probe beating every local search marks a second mode: search there too.
    for pt in probes:
        v = scalar(float(pt[0]), float(pt[1]))
        if math.isfinite(v) and v > best_local:
            point, value = _simplex_max(scalar, pt, lo, hi, xatol, step)
            if math.isfinite(value):
                candidates.append((value, math.exp(point[0]), math.exp(point[1])))

    _, xs, xp = _pick_candidate(candidates)
    return float(np.clip(xs, cfg.x_min, cfg.x_max)), float(np.clip(xp, cfg.x_min, cfg.x_max))


def _residual(new: np.ndarray, old: np.ndarray, x_min: float) -> float:
    return float(np.max(np.abs(new - old) / np.maximum(np.abs(new), x_min)))


def solve(
    spec: ProblemSpec, cfg: SolverConfig = SolverConfig(), init: Optional[StrategyProfile] = None
) -> EquilibriumResult:
    """Iterate best responses to a pure-strategy Nash equilibrium.

    Rounds update every player against the previous round's profile
    (Jacobi) or the partially updated one (Gauss-Seidel); iteration stops
    once the max relative strategy change falls below cfg.tol.  Hitting
    max_iters reports converged=False rather than raising.  The outcome
    is always evaluated under true parameters.
    """
    n = spec.n
    if init is None:
        init = StrategyProfile.constant(n, 1.0)
    for v in init.xs + init.xp:
        if not (cfg.x_min <= v <= cfg.x_max):
            raise ValueError(f"init allocation {v} outside [{cfg.x_min}, {cfg.x_max}]")

    xs = np.asarray(init.xs, dtype=float)
    xp = np.asarray(init.xp, dtype=float)
    rngs = [_player_stream(cfg.seed, spec.beliefs.believed[i]) for i in range(n)]
    last_move = np.full(n, 1.0)
    residual = math.inf
    residuals: list[float] = []
    damp_on = False
    iterations = 0

    # convergence only counts when the round ran at full inner resolution,
    # otherwise the profile is frozen at whatever the tolerance ladder had
    xatol_floor = max(cfg.inner_tol, cfg.tol * 1e-2)

    for t in range(1, cfg.max_iters + 1):
        iterations = t
        starts = cfg.n_starts if t == 1 else cfg.warm_starts
        xatol = max(cfg.inner_tol, min(1e-5, residual * 5e-3)) if residuals else 1e-6
        prev_xs, prev_xp = xs.copy(), xp.copy()
        work = StrategyProfile(xs=tuple(xs), xp=tuple(xp))
        new_xs, new_xp = xs.copy(), xp.copy()
        for i in range(n):
            step = min(2.0, max(20.0 * xatol, 2.0 * last_move[i]))
            against = (
                StrategyProfile(xs=tuple(new_xs), xp=tuple(new_xp))
                if cfg.update == "seidel"
                else work
            )
            bx, bp = best_response(
                i, against, spec, cfg, n_starts=starts, xatol=xatol, step=step, rng=rngs[i]
            )
            new_xs[i], new_xp[i] = bx, bp
        if damp_on:
            w = cfg.damping
            new_xs = np.exp(w * np.log(new_xs) + (1.0 - w) * np.log(prev_xs))
            new_xp = np.exp(w * np.log(new_xp) + (1.0 - w) * np.log(prev_xp))
        xs, xp = new_xs, new_xp
        moves = np.maximum(
            np.abs(np.log(xs) - np.log(prev_xs)), np.abs(np.log(xp) - np.log(prev_xp))
        )
        last_move = np.maximum(moves, 10.0 * cfg.inner_tol)
        residual = max(_residual(xs, prev_xs, cfg.x_min), _residual(xp, prev_xp, cfg.x_min))
        residuals.append(residual)
        if residual <= cfg.tol and xatol <= xatol_floor * 1.01:
            break
        if len(residuals) >= 3 and residuals[-1] >= residuals[-2] >= residuals[-3]:
            damp_on = True

    profile = StrategyProfile(xs=tuple(xs), xp=tuple(xp))
    lo_edge = np.concatenate([xs, xp]) <= cfg.x_min * (1.0 + 1e-12)
    hi_edge = np.concatenate([xs, xp]) >= cfg.x_max * (1.0 - 1e-12)
    converged = residual <= cfg.tol and xatol <= xatol_floor * 1.01
    return EquilibriumResult(
        profile=profile,
        outcome=evaluate(profile, spec),
        converged=converged,
        iterations=iterations,
        residual=float(residual),
        clamped=bool(np.any(lo_edge) or np.any(hi_edge)),
    )


# Multiplicative log-offsets probed around the equilibrium point, on top of
# the coarse grid, when checking for profitable deviations.
_STENCIL_OFFSETS = (-math.log(2.0), -0.1, -1e-3, 0.0, 1e-3, 0.1, math.log(2.0))


def verify_equilibrium(
    result: EquilibriumResult,
    spec: ProblemSpec,
    cfg: SolverConfig,
    grid_n: int,
    tol_dev: float = 1e-6,
) -> bool:
    """No-profitable-deviation check against a log grid plus a local stencil.

    Returns True iff no tested unilateral deviation improves any player's
    believed payoff by more than tol_dev.  grid_n < 2 degenerates to the
    stencil-only check.
    """
    lo, hi = math.log(cfg.x_min), math.log(cfg.x_max)
    profile = result.profile
    for i in range(spec.n):
        scalar, vector = _objective(i, spec, profile, use_beliefs=True)
        own = (
            math.log(max(profile.xs[i], cfg.x_min)),
            math.log(max(profile.xp[i], cfg.x_min)),
        )
        u_eq = scalar(own[0], own[1])
        points_s = []
        points_p = []
        if grid_n >= 2:
            axis = np.linspace(lo, hi, grid_n)
            mesh_s, mesh_p = np.meshgrid(axis, axis, indexing="ij")
            points_s.append(mesh_s.ravel())
            points_p.append(mesh_p.ravel())
        offs = np.array(_STENCIL_OFFSETS)
        st_s, st_p = np.meshgrid(own[0] + offs, own[1] + offs, indexing="ij")
        points_s.append(np.clip(st_s.ravel(), lo, hi))
        points_p.append(np.clip(st_p.ravel(), lo, hi))
        values = vector(np.concatenate(points_s), np.concatenate(points_p))
        if float(np.nanmax(values)) - u_eq > tol_dev:
            return False
    return True


def oracle_solve(
    spec: ProblemSpec,
    grid_n: int,
    x_min: float = 1e-10,
    x_max: float = 1e10,
    max_rounds: int = 500,
) -> EquilibriumResult:
    """Exhaustive-grid best-response iteration for two-player validation.

    Each round replaces every player's allocation with the exact argmax of
    their believed payoff over a grid_n x grid_n log-spaced grid (ties
    broken toward the lower flat index, xs-major).  Exponential in the
    player count, so restricted to n = 2.
    """
    if spec.n != 2:
        raise ValueError("oracle_solve supports exactly 2 players")
    lo, hi = math.log(x_min), math.log(x_max)
    axis = np.linspace(lo, hi, grid_n)
    mesh_s, mesh_p = np.meshgrid(axis, axis, indexing="ij")
    flat_s, flat_p = mesh_s.ravel(), mesh_p.ravel()
    start_idx = int(np.argmin(np.abs(axis - 0.0)))
    idx = [(start_idx, start_idx) for _ in range(spec.n)]

    def profile_from(indices: list[tuple[int, int]]) -> StrategyProfile:
        return StrategyProfile(
            xs=tuple(math.exp(axis[a]) for a, _ in indices),
            xp=tuple(math.exp(axis[b]) for _, b in indices),
        )

    seen = {tuple(idx)}
    converged = False
    iterations = 0
    prev = profile_from(idx)
    for t in range(1, max_rounds + 1):
        iterations = t
        prev = profile_from(idx)
        new_idx = []
        for i in range(spec.n):
            _, vector = _objective(i, spec, prev, use_beliefs=True)
            k = int(np.argmax(vector(flat_s, flat_p)))
            new_idx.append(divmod(k, grid_n))
        if new_idx == idx:
            converged = True
            break
        idx = new_idx
        state = tuple(idx)
        if state in seen:
            break
        seen.add(state)

    profile = profile_from(idx)
    xs = np.asarray(profile.xs)
    xp = np.asarray(profile.xp)
    pxs = np.asarray(prev.xs)
    pxp = np.asarray(prev.xp)
    residual = max(_residual(xs, pxs, x_min), _residual(xp, pxp, x_min))
    edge = any(a in (0, grid_n - 1) or b in (0, grid_n - 1) for a, b in idx)
    return EquilibriumResult(
        profile=profile,
        outcome=evaluate(profile, spec),
        converged=converged,
        iterations=iterations,
        residual=0.0 if converged else float(residual),
        clamped=edge,
    )
