"""Unit and property tests for the closed-form model quantities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import safetyrace as sr
from safetyrace.model import believed_params

M = sr.RiskMode.MULTIPLICATIVE
W = sr.RiskMode.WINNER_ONLY


def params(**kw):
    base = dict(A=1.0, alpha=0.5, B=1.0, beta=0.5, theta=0.5, d=1.0, r=1.0)
    base.update(kw)
    return sr.PlayerParams(**base)


class TestPerformance:
    def test_identity_exponent(self):
        assert sr.performance(params(B=1.0, beta=1.0), 2.0) == pytest.approx(2.0)

    def test_square_root(self):
        assert sr.performance(params(B=2.0, beta=0.5), 4.0) == pytest.approx(4.0)

    def test_zero_input(self):
        assert sr.performance(params(B=1.0, beta=0.5), 0.0) == 0.0

    def test_overflow_falls_back_to_log_space(self):
        with pytest.warns(sr.ClampWarning):
            value = sr.performance(params(B=1e200, beta=3.0), 1e100)
        assert value == 1e300


class TestSafety:
    def test_theta_zero_ignores_p(self):
        assert sr.safety(params(A=1.0, alpha=1.0, theta=0.0), 3.0, 7.0) == pytest.approx(3.0)

    def test_ratio(self):
        assert sr.safety(params(A=1.0, alpha=1.0, theta=1.0), 2.0, 2.0) == pytest.approx(1.0)

    def test_mixed_exponents(self):
        assert sr.safety(params(A=10.0, alpha=0.5, theta=0.5), 4.0, 4.0) == pytest.approx(10.0)

    def test_p_zero_with_positive_theta_raises(self):
        with pytest.raises(sr.ModelDomainError):
            sr.safety(params(theta=0.5), 1.0, 0.0)

    def test_p_zero_with_nonpositive_theta_is_total(self):
        assert sr.safety(params(theta=0.0, alpha=1.0), 2.0, 0.0) == pytest.approx(2.0)
        assert sr.safety(params(theta=-1.0), 2.0, 0.0) == 0.0

    def test_xs_zero(self):
        assert sr.safety(params(), 0.0, 1.0) == 0.0


class TestContestProbs:
    def test_symmetry(self):
        assert sr.contest_probs([1.0, 1.0]) == pytest.approx([0.5, 0.5])

    def test_direct_ratio(self):
        assert sr.contest_probs([3.0, 1.0]) == pytest.approx([0.75, 0.25])

    def test_degenerate_uniform(self):
        assert sr.contest_probs([0.0, 0.0]) == pytest.approx([0.5, 0.5])

    @given(
        st.lists(st.floats(min_value=0.0, max_value=1e12), min_size=2, max_size=6).filter(
            lambda v: sum(v) > 0
        )
    )
    def test_normalization(self, p):
        q = sr.contest_probs(p)
        assert abs(q.sum() - 1.0) <= 1e-12
        assert np.all((q >= 0.0) & (q <= 1.0))


class TestAggregateSafety:
    def test_multiplicative(self):
        sigma_i, sigma = sr.aggregate_safety([1.0, 1.0], [0.5, 0.5], M)
        assert sigma == pytest.approx(0.25)
        assert sigma_i == pytest.approx([0.25, 0.25])

    def test_winner_only(self):
        sigma_i, sigma = sr.aggregate_safety([1.0, 3.0], [0.5, 0.5], W)
        assert sigma == pytest.approx(0.625)
        assert sigma_i == pytest.approx([0.5, 0.75])

    def test_limit_behavior(self):
        _, sigma = sr.aggregate_safety([1e12, 1e12], [0.5, 0.5], M)
        assert abs(sigma - 1.0) <= 1e-6

    def test_single_player_modes_agree(self):
        s = [3.7]
        q = [1.0]
        _, sig_m = sr.aggregate_safety(s, q, M)
        _, sig_w = sr.aggregate_safety(s, q, W)
        assert sig_m == pytest.approx(sig_w) == pytest.approx(3.7 / 4.7)

    @given(st.lists(st.floats(min_value=1e-12, max_value=1e12), min_size=1, max_size=5))
    def test_bounds(self, s):
        q = np.full(len(s), 1.0 / len(s))
        for mode in (M, W):
            sigma_i, sigma = sr.aggregate_safety(s, q, mode)
            assert 0.0 <= sigma <= 1.0
            assert np.all((sigma_i >= 0.0) & (sigma_i <= 1.0))


class TestPayoff:
    def test_arithmetic_example(self):
        # theta=0, alpha=beta=1, xs=xp=1 gives s=1, p=1, q=0.5, sigma=0.25
        p = params(alpha=1.0, beta=1.0, theta=0.0, d=1.0, r=0.1)
        spec = sr.ProblemSpec(players=(p, p))
        profile = sr.StrategyProfile.constant(2, 1.0)
        assert sr.payoff(0, profile, spec) == pytest.approx(0.25 * 0.5 - 0.75 - 0.2)
        assert sr.payoff(0, profile, spec) == pytest.approx(-0.825)

    def test_cost_and_risk_terms_vanish(self):
        p = params(d=0.0, r=1e-12)
        spec = sr.ProblemSpec(players=(p, p))
        profile = sr.StrategyProfile.constant(2, 1.0)
        o = sr.evaluate(profile, spec)
        assert sr.payoff(0, profile, spec) == pytest.approx(o.sigma_i[0] * o.q[0], abs=1e-10)

    def test_symmetric_payoffs_equal(self):
        spec = sr.symmetric_spec(theta=0.7)
        profile = sr.StrategyProfile.constant(2, 0.3)
        assert sr.payoff(0, profile, spec) == pytest.approx(sr.payoff(1, profile, spec), rel=1e-12)

    def test_propagates_safety_domain_error(self):
        spec = sr.symmetric_spec(theta=0.5)
        profile = sr.StrategyProfile(xs=(1.0, 1.0), xp=(1.0, 0.0))
        with pytest.raises(sr.ModelDomainError):
            sr.payoff(0, profile, spec)

    @given(
        st.floats(min_value=0.01, max_value=100.0),
        st.floats(min_value=0.1, max_value=2.0),
        st.floats(min_value=-2.0, max_value=2.0),
        st.floats(min_value=0.0, max_value=5.0),
        st.floats(min_value=0.01, max_value=10.0),
        st.floats(min_value=0.01, max_value=10.0),
        st.floats(min_value=0.01, max_value=10.0),
    )
    @settings(max_examples=200)
    def test_multiplicative_reduction(self, A, alpha, theta, d, r, x1, x2):
        # Eq. 5 general form must match the sigma*q - (1-sigma)*d - r*X form.
        p = params(A=A, alpha=alpha, theta=theta, d=d, r=r)
        spec = sr.ProblemSpec(players=(p, p), risk_mode=M)
        profile = sr.StrategyProfile(xs=(x1, x2), xp=(x2, x1))
        o = sr.evaluate(profile, spec)
        for i in range(2):
            reduced = o.sigma * o.q[i] - (1.0 - o.sigma) * d - r * profile.total(i)
            assert sr.payoff(i, profile, spec) == pytest.approx(reduced, abs=1e-12, rel=1e-12)


class TestScalingExponent:
    def test_boundary_case(self):
        assert sr.scaling_exponent(params(alpha=0.5, beta=0.5, theta=1.0)) == 0.0

    def test_negative_regime(self):
        assert sr.scaling_exponent(params(alpha=0.5, beta=0.5, theta=2.0)) == -0.5

    def test_no_tradeoff(self):
        assert sr.scaling_exponent(params(alpha=1.0, beta=1.0, theta=0.0)) == 1.0

    def test_sign_classifies_regime(self):
        p = params(alpha=0.7, beta=0.35, theta=2.5)
        assert (sr.scaling_exponent(p) < 0) == (p.theta > p.alpha / p.beta)


@st.composite
def homogeneity_case(draw):
    return dict(
        A=draw(st.floats(min_value=1e-3, max_value=1e3)),
        alpha=draw(st.floats(min_value=0.05, max_value=3.0)),
        B=draw(st.floats(min_value=1e-3, max_value=1e3)),
        beta=draw(st.floats(min_value=0.05, max_value=3.0)),
        theta=draw(st.floats(min_value=-5.0, max_value=5.0)),
        xs=draw(st.floats(min_value=1e-6, max_value=1e6)),
        xp=draw(st.floats(min_value=1e-6, max_value=1e6)),
        c=draw(st.floats(min_value=1e-3, max_value=1e3)),
    )


class TestIdentities:
    @given(homogeneity_case())
    @settings(max_examples=300)
    def test_homogeneity(self, case):
        p = params(A=case["A"], alpha=case["alpha"], B=case["B"], beta=case["beta"], theta=case["theta"])
        xs, xp, c = case["xs"], case["xp"], case["c"]
        base = sr.safety(p, xs, sr.performance(p, xp))
        scaled = sr.safety(p, c * xs, sr.performance(p, c * xp))
        expected = c ** sr.scaling_exponent(p) * base
        assert scaled == pytest.approx(expected, rel=1e-9)

    @given(homogeneity_case())
    @settings(max_examples=300)
    def test_elasticity_form(self, case):
        p = params(A=case["A"], alpha=case["alpha"], B=case["B"], beta=case["beta"], theta=case["theta"])
        xs, xp = case["xs"], case["xp"]
        s = sr.safety(p, xs, sr.performance(p, xp))
        combined = (p.A / p.B**p.theta) * xs**p.alpha * xp ** (-p.theta * p.beta)
        assert s == pytest.approx(combined, rel=1e-9)


class TestTypes:
    def test_player_params_validation_names_field(self):
        with pytest.raises(ValueError, match="A must be positive"):
            params(A=-1.0)
        with pytest.raises(ValueError, match="beta must be positive"):
            params(beta=0.0)
        with pytest.raises(ValueError, match="d must be nonnegative"):
            params(d=-0.5)
        with pytest.raises(ValueError, match="theta must be finite"):
            params(theta=math.nan)

    def test_theta_unrestricted_in_sign(self):
        assert params(theta=-3.0).theta == -3.0

    def test_problem_spec_needs_two_players(self):
        with pytest.raises(ValueError, match="at least 2"):
            sr.ProblemSpec(players=(params(),))

    def test_belief_length_must_match(self):
        with pytest.raises(ValueError, match="beliefs length"):
            sr.ProblemSpec(
                players=(params(), params()),
                beliefs=sr.BeliefProfile(believed=(params(),)),
            )

    def test_strategy_profile_rejects_negative(self):
        with pytest.raises(ValueError):
            sr.StrategyProfile(xs=(1.0, -0.1), xp=(1.0, 1.0))

    def test_risk_mode_parse(self):
        assert sr.RiskMode.parse("multiplicative") is M
        assert sr.RiskMode.parse("winner") is W
        assert sr.RiskMode.parse("winner_only") is W
        with pytest.raises(ValueError):
            sr.RiskMode.parse("other")

    def test_outcome_probability_vector(self):
        spec = sr.symmetric_spec(theta=1.5)
        o = sr.evaluate(sr.StrategyProfile.constant(2, 0.7), spec)
        assert sum(o.q) == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= o.sigma <= 1.0


class TestBeliefs:
    def test_truthful_default_returns_true_params(self):
        spec = sr.symmetric_spec(theta=0.5)
        assert believed_params(spec, 0) == spec.players

    def test_common_scope_applies_to_all_players(self):
        spec = sr.symmetric_spec(A=10.0, theta=0.5).with_belief(1, A=50.0)
        world = believed_params(spec, 1)
        assert world[0].A == 50.0 and world[1].A == 50.0
        # the believer's own block is exactly their believed parameters
        assert world[1] == spec.beliefs.believed[1]
        # player 0 still sees the true world
        assert believed_params(spec, 0) == spec.players

    def test_common_scope_preserves_observable_heterogeneity(self):
        # subsidized prices differ between players; beliefs about A must not
        # overwrite the opponent's observed r
        p1 = params(A=10.0, r=0.5)
        p2 = params(A=10.0, r=1.0)
        spec = sr.ProblemSpec(players=(p1, p2)).with_belief(1, A=99.0)
        world = believed_params(spec, 1)
        assert world[0].r == 0.5 and world[1].r == 1.0
        assert world[0].A == 99.0

    def test_self_scope_only_touches_own_params(self):
        spec = sr.symmetric_spec(A=10.0, theta=0.5)
        spec = sr.ProblemSpec(
            players=spec.players,
            beliefs=spec.beliefs.with_override(1, A=50.0),
            risk_mode=spec.risk_mode,
            belief_scope="self",
        )
        world = believed_params(spec, 1)
        assert world[0].A == 10.0 and world[1].A == 50.0

    def test_payoff_uses_beliefs_for_all_quantities(self):
        spec = sr.symmetric_spec(A=10.0, theta=0.5, risk_mode=W).with_belief(1, A=1000.0)
        profile = sr.StrategyProfile.constant(2, 1.0)
        believed = sr.payoff(1, profile, spec, use_beliefs=True)
        true = sr.payoff(1, profile, spec, use_beliefs=False)
        # believing safety is cheap makes the believed world look much safer
        assert believed > true
