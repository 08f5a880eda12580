"""Compute-race safety game: model, Nash solver and experiment harness."""

from .model import (
    BeliefProfile,
    ClampWarning,
    ModelDomainError,
    Outcome,
    PlayerParams,
    ProblemSpec,
    RiskMode,
    StrategyProfile,
    aggregate_safety,
    believed_params,
    contest_probs,
    evaluate,
    payoff,
    performance,
    safety,
    scaling_exponent,
    symmetric_spec,
)
from .solver import (
    EquilibriumResult,
    NonFinitePayoffError,
    SolverConfig,
    best_response,
    oracle_solve,
    solve,
    verify_equilibrium,
)
from .scenarios import (
    CLAIM_REGISTRY,
    TIE_FLOOR,
    ClaimReport,
    ClaimSpec,
    SubsidyComparison,
    SubsidyScheme,
    SweepSpec,
    appendix_c_experiments,
    apply_scheme,
    beliefs_sweep,
    compare_subsidies,
    run_sweep,
    scale_players,
    set_axis,
    verify_claim,
)

__version__ = "0.1.0"

__all__ = [
    "BeliefProfile",
    "CLAIM_REGISTRY",
    "ClaimReport",
    "ClaimSpec",
    "ClampWarning",
    "EquilibriumResult",
    "ModelDomainError",
    "NonFinitePayoffError",
    "Outcome",
    "PlayerParams",
    "ProblemSpec",
    "RiskMode",
    "SolverConfig",
    "StrategyProfile",
    "SubsidyComparison",
    "SubsidyScheme",
    "SweepSpec",
    "TIE_FLOOR",
    "aggregate_safety",
    "appendix_c_experiments",
    "apply_scheme",
    "believed_params",
    "beliefs_sweep",
    "best_response",
    "compare_subsidies",
    "contest_probs",
    "evaluate",
    "oracle_solve",
    "payoff",
    "performance",
    "run_sweep",
    "safety",
    "scale_players",
    "scaling_exponent",
    "set_axis",
    "solve",
    "symmetric_spec",
    "verify_claim",
    "verify_equilibrium",
    "__version__",
]
