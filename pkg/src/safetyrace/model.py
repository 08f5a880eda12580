"""Core types and closed-form quantities of the compute-race safety game.

Each player buys compute at a per-unit price r and splits it between a
safety input xs and a performance input xp.  Performance follows a power
law p = B * xp**beta; safety odds follow s = A * xs**alpha * p**(-theta),
so theta > 0 makes safety more expensive as performance grows.  Win
probabilities are proportional shares of performance, and the safety odds
aggregate into the probability sigma that nobody causes a disaster, either
multiplicatively over all players or over the contest winner only.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

# Intermediate production values are kept inside [CLAMP_LO, CLAMP_HI];
# values escaping that range are clamped and reported via ClampWarning.
CLAMP_LO = 1e-300
CLAMP_HI = 1e300
_LOG_LO = math.log(CLAMP_LO)
_LOG_HI = math.log(CLAMP_HI)

_PARAM_FIELDS = ("A", "alpha", "B", "beta", "theta", "d", "r")


class ClampWarning(RuntimeWarning):
    """An intermediate value left [CLAMP_LO, CLAMP_HI] and was clamped."""


class ModelDomainError(ValueError):
    """Inputs outside the model's domain (e.g. p = 0 with theta > 0)."""


def _clamped_exp(log_value: float) -> float:
    if log_value > _LOG_HI:
        warnings.warn("intermediate value clamped to 1e300", ClampWarning, stacklevel=3)
        return CLAMP_HI
    if log_value < _LOG_LO:
        warnings.warn("intermediate value clamped to 1e-300", ClampWarning, stacklevel=3)
        return CLAMP_LO
    return math.exp(log_value)


def _clamp_positive(value: float) -> float:
    """Clamp a mathematically positive intermediate into the working range."""
    if value < CLAMP_LO:
        warnings.warn("intermediate value clamped to 1e-300", ClampWarning, stacklevel=3)
        return CLAMP_LO
    if value > CLAMP_HI:
        warnings.warn("intermediate value clamped to 1e300", ClampWarning, stacklevel=3)
        return CLAMP_HI
    return value


@dataclass(frozen=True)
class PlayerParams:
    """One player's true technology and preference parameters.

    A: safety productivity, alpha: compute elasticity of safety,
    B: performance productivity, beta: compute elasticity of performance,
    theta: safety-performance tradeoff exponent (-theta is the
    performance-elasticity of safety), d: disaster cost, r: factor price.
    """

    A: float
    alpha: float
    B: float
    beta: float
    theta: float
    d: float
    r: float

    def __post_init__(self):
        for name in _PARAM_FIELDS:
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("A", "alpha", "B", "beta", "r"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not (self.d >= 0.0 and math.isfinite(self.d)):
            raise ValueError(f"d must be nonnegative and finite, got {self.d}")
        if not math.isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta}")


class RiskMode(enum.Enum):
    """How players' safety odds aggregate into the no-disaster probability."""

    MULTIPLICATIVE = "multiplicative"
    WINNER_ONLY = "winner"

    @classmethod
    def parse(cls, text: str) -> "RiskMode":
        key = str(text).strip().lower()
        for mode in cls:
            if key == mode.value:
                return mode
        if key in ("winner_only", "winner-only", "winneronly"):
            return cls.WINNER_ONLY
        raise ValueError(f"unknown risk mode {text!r}; use 'multiplicative' or 'winner'")


@dataclass(frozen=True)
class BeliefProfile:
    """Per-player believed parameters; believed[i] is what player i acts on."""

    believed: tuple[PlayerParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "believed", tuple(self.believed))

    @classmethod
    def truthful(cls, players: Sequence[PlayerParams]) -> "BeliefProfile":
        return cls(believed=tuple(players))

    def with_override(self, i: int, **fields: float) -> "BeliefProfile":
        """Replace fields of player i's believed parameters."""
        believed = list(self.believed)
        believed[i] = replace(believed[i], **fields)
        return BeliefProfile(believed=tuple(believed))


@dataclass(frozen=True)
class ProblemSpec:
    """A full game instance: true parameters, beliefs and risk aggregation.

    belief_scope controls how believed[i] enters player i's payoff:
    "common" substitutes the fields where believed[i] differs from
    players[i] into every player's parameters (beliefs are about common
    parameter values), "self" replaces only player i's own parameters.
    """

    players: tuple[PlayerParams, ...]
    beliefs: Optional[BeliefProfile] = None
    risk_mode: RiskMode = RiskMode.MULTIPLICATIVE
    belief_scope: str = "common"

    def __post_init__(self):
        object.__setattr__(self, "players", tuple(self.players))
        if self.beliefs is None:
            object.__setattr__(self, "beliefs", BeliefProfile.truthful(self.players))
        if len(self.players) < 2:
            raise ValueError(f"need at least 2 players, got {len(self.players)}")
        if len(self.beliefs.believed) != len(self.players):
            raise ValueError(
                f"beliefs length {len(self.beliefs.believed)} != players length {len(self.players)}"
            )
        if self.belief_scope not in ("common", "self"):
            raise ValueError(f"belief_scope must be 'common' or 'self', got {self.belief_scope!r}")

    @property
    def n(self) -> int:
        return len(self.players)

    def with_belief(self, i: int, **fields: float) -> "ProblemSpec":
        return replace(self, beliefs=self.beliefs.with_override(i, **fields))


@dataclass(frozen=True)
class StrategyProfile:
    """Per-player compute allocations: xs to safety, xp to performance."""

    xs: tuple[float, ...]
    xp: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "xs", tuple(float(v) for v in self.xs))
        object.__setattr__(self, "xp", tuple(float(v) for v in self.xp))
        if len(self.xs) != len(self.xp):
            raise ValueError("xs and xp must have equal length")
        for v in self.xs + self.xp:
            if not (v >= 0.0 and math.isfinite(v)):
                raise ValueError(f"allocations must be nonnegative and finite, got {v}")

    @classmethod
    def constant(cls, n: int, value: float = 1.0) -> "StrategyProfile":
        return cls(xs=(value,) * n, xp=(value,) * n)

    @property
    def n(self) -> int:
        return len(self.xs)

    def total(self, i: int) -> float:
        return self.xs[i] + self.xp[i]

    def replace_player(self, i: int, xs: float, xp: float) -> "StrategyProfile":
        new_xs = list(self.xs)
        new_xp = list(self.xp)
        new_xs[i], new_xp[i] = xs, xp
        return StrategyProfile(xs=tuple(new_xs), xp=tuple(new_xp))


@dataclass(frozen=True)
class Outcome:
    """Evaluated quantities of a strategy profile under true parameters."""

    s: tuple[float, ...]
    p: tuple[float, ...]
    q: tuple[float, ...]
    sigma_i: tuple[float, ...]
    sigma: float
    payoffs: tuple[float, ...]


def performance(params: PlayerParams, xp: float) -> float:
    """Performance level B * xp**beta; 0 at xp = 0."""
    if xp == 0.0:
        return 0.0
    try:
        value = params.B * xp ** params.beta
    except OverflowError:
        return _clamped_exp(math.log(params.B) + params.beta * math.log(xp))
    return _clamp_positive(value)


def safety(params: PlayerParams, xs: float, p: float) -> float:
    """Safety odds A * xs**alpha * p**(-theta).

    Diverges as p -> 0 when theta > 0; that case raises ModelDomainError.
    """
    if p == 0.0:
        if params.theta > 0.0:
            raise ModelDomainError("safety diverges at p = 0 with theta > 0")
        if params.theta < 0.0:
            return 0.0
        p_factor_log = 0.0
    else:
        p_factor_log = -params.theta * math.log(p)
    if xs == 0.0:
        return 0.0
    try:
        value = params.A * xs ** params.alpha * math.exp(p_factor_log)
    except OverflowError:
        value = None
    if value is None or not math.isfinite(value):
        return _clamped_exp(math.log(params.A) + params.alpha * math.log(xs) + p_factor_log)
    return _clamp_positive(value)


def contest_probs(p: Sequence[float]) -> np.ndarray:
    """Proportional win shares q_i = p_i / sum(p); uniform if all p are 0."""
    arr = np.asarray(p, dtype=float)
    total = arr.sum()
    if total <= 0.0:
        return np.full(arr.shape, 1.0 / arr.size)
    return arr / total


def aggregate_safety(
    s: Sequence[float], q: Sequence[float], mode: RiskMode
) -> tuple[np.ndarray, float]:
    """Conditional safe probabilities sigma_i and aggregate safety sigma.

    Multiplicative risk: sigma = prod_j s_j/(1+s_j), identical for every
    conditioning winner.  Winner-only risk: sigma_i = s_i/(1+s_i) and
    sigma = sum_i sigma_i q_i.
    """
    s_arr = np.asarray(s, dtype=float)
    q_arr = np.asarray(q, dtype=float)
    safe_probs = s_arr / (1.0 + s_arr)
    if mode is RiskMode.MULTIPLICATIVE:
        sigma = float(np.prod(safe_probs))
        return np.full(s_arr.shape, sigma), sigma
    sigma = float(np.dot(safe_probs, q_arr))
    return safe_probs, sigma


def believed_params(spec: ProblemSpec, i: int) -> tuple[PlayerParams, ...]:
    """The per-player parameters player i uses when evaluating u_i."""
    bel = spec.beliefs.believed[i]
    if spec.belief_scope == "self":
        return tuple(bel if j == i else pj for j, pj in enumerate(spec.players))
    truth = spec.players[i]
    override = {
        name: getattr(bel, name)
        for name in _PARAM_FIELDS
        if getattr(bel, name) != getattr(truth, name)
    }
    if not override:
        return spec.players
    return tuple(replace(pj, **override) for pj in spec.players)


def _world(
    params: Sequence[PlayerParams], profile: StrategyProfile, mode: RiskMode
) -> tuple[list[float], list[float], np.ndarray, np.ndarray, float]:
    p = [performance(pj, profile.xp[j]) for j, pj in enumerate(params)]
    s = [safety(pj, profile.xs[j], p[j]) for j, pj in enumerate(params)]
    q = contest_probs(p)
    sigma_i, sigma = aggregate_safety(s, q, mode)
    return s, p, q, sigma_i, sigma


def payoff(i: int, profile: StrategyProfile, spec: ProblemSpec, use_beliefs: bool = False) -> float:
    """Player i's expected net payoff.

    u_i = sigma_i q_i - (1 - sum_j sigma_j q_j) d_i - r_i (xs_i + xp_i).
    With use_beliefs, all quantities are evaluated under the parameters
    player i believes (see believed_params); strategies are taken as given.
    """
    params = believed_params(spec, i) if use_beliefs else spec.players
    _, _, q, sigma_i, _ = _world(params, profile, spec.risk_mode)
    expected_safe = float(np.dot(sigma_i, q))
    own = params[i]
    return float(sigma_i[i] * q[i] - (1.0 - expected_safe) * own.d - own.r * profile.total(i))


def evaluate(profile: StrategyProfile, spec: ProblemSpec) -> Outcome:
    """Evaluate a profile under true parameters for all players at once."""
    s, p, q, sigma_i, sigma = _world(spec.players, profile, spec.risk_mode)
    expected_safe = float(np.dot(sigma_i, q))
    payoffs = tuple(
        float(sigma_i[i] * q[i] - (1.0 - expected_safe) * pi.d - pi.r * profile.total(i))
        for i, pi in enumerate(spec.players)
    )
    return Outcome(
        s=tuple(float(v) for v in s),
        p=tuple(float(v) for v in p),
        q=tuple(float(v) for v in q),
        sigma_i=tuple(float(v) for v in sigma_i),
        sigma=sigma,
        payoffs=payoffs,
    )


def scaling_exponent(params: PlayerParams) -> float:
    """Exponent alpha - theta*beta governing s(c*xs, c*xp) = c**e * s(xs, xp).

    Negative exactly when theta > alpha/beta, the regime where a uniform
    scale-up of both inputs lowers safety.
    """
    return params.alpha - params.theta * params.beta


def symmetric_spec(
    n: int = 2,
    A: float = 1.0,
    alpha: float = 0.5,
    B: float = 1.0,
    beta: float = 0.5,
    theta: float = 0.5,
    d: float = 1.0,
    r: float = 1.0,
    risk_mode: RiskMode = RiskMode.MULTIPLICATIVE,
) -> ProblemSpec:
    """Convenience constructor for games with n identical players."""
    player = PlayerParams(A=A, alpha=alpha, B=B, beta=beta, theta=theta, d=d, r=r)
    return ProblemSpec(players=(player,) * n, risk_mode=risk_mode)
