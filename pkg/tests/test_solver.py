"""Solver tests: best responses, fixed-point iteration, oracle agreement."""

import math

import numpy as np
import pytest

import safetyrace as sr

M = sr.RiskMode.MULTIPLICATIVE
W = sr.RiskMode.WINNER_ONLY

CFG = sr.SolverConfig(x_min=1e-6)


def params(**kw):
    base = dict(A=1.0, alpha=0.5, B=1.0, beta=0.5, theta=0.5, d=1.0, r=1.0)
    base.update(kw)
    return sr.PlayerParams(**base)


def baseline(theta, mode=M, r=1.0, A=10.0):
    return sr.symmetric_spec(A=A, theta=theta, r=r, risk_mode=mode)


class TestSolverConfig:
    def test_defaults(self):
        cfg = sr.SolverConfig()
        assert cfg.tol == 1e-8 and cfg.max_iters == 500
        assert cfg.x_min == 1e-10 and cfg.x_max == 1e10
        assert cfg.n_starts == 8 and cfg.seed == 0

    def test_validation(self):
        with pytest.raises(ValueError):
            sr.SolverConfig(x_min=1.0, x_max=0.5)
        with pytest.raises(ValueError):
            sr.SolverConfig(tol=0.0)
        with pytest.raises(ValueError):
            sr.SolverConfig(update="chaotic")


class TestBestResponse:
    def test_cost_dominance_pins_to_floor(self):
        # a huge factor price with no disaster exposure makes any spending
        # beyond the floor worse than the bounded contest prize
        p_costly = params(r=1e6, d=0.0)
        spec = sr.ProblemSpec(players=(p_costly, params()))
        profile = sr.StrategyProfile.constant(2, 1.0)
        xs, xp = sr.best_response(0, profile, spec, CFG)
        assert xs == pytest.approx(CFG.x_min)
        assert xp == pytest.approx(CFG.x_min)

    def test_matches_brute_force_grid(self):
        # frozen argmax of a 400x400 log grid over [1e-3, 1e3]^2 computed for
        # the symmetric A=B=d=r=1, alpha=beta=0.5, theta=0.5 instance with the
        # opponent fixed at (xs, xp) = (0.5, 0.5)
        grid_xs, grid_xp = 0.057464349687159744, 0.0010000000000000002
        cell = math.log(1e3 / 1e-3) / 399
        spec = sr.symmetric_spec(A=1.0, theta=0.5)
        opp = sr.StrategyProfile(xs=(1.0, 0.5), xp=(1.0, 0.5))
        cfg = sr.SolverConfig(x_min=1e-3, x_max=1e3)
        xs, xp = sr.best_response(0, opp, spec, cfg)
        assert abs(math.log(xs) - math.log(grid_xs)) <= cell
        assert abs(math.log(xp) - math.log(grid_xp)) <= cell

    def test_invariant_to_permuting_identical_opponents(self):
        shared = params(theta=0.8)
        spec = sr.ProblemSpec(players=(shared, shared, shared))
        profile = sr.StrategyProfile(xs=(1.0, 0.4, 2.5), xp=(1.0, 1.7, 0.2))
        swapped = sr.StrategyProfile(xs=(1.0, 2.5, 0.4), xp=(1.0, 0.2, 1.7))
        assert sr.best_response(0, profile, spec, CFG) == sr.best_response(0, swapped, spec, CFG)

    def test_result_beats_every_start(self):
        spec = baseline(1.5)
        profile = sr.StrategyProfile.constant(2, 1.0)
        xs, xp = sr.best_response(0, profile, spec, CFG)
        value = sr.payoff(0, profile.replace_player(0, xs, xp), spec, use_beliefs=True)
        for start in (1.0, 1e-3, 1e3):
            alt = sr.payoff(0, profile.replace_player(0, start, start), spec, use_beliefs=True)
            assert value >= alt - 1e-12

    def test_propagates_domain_error_from_opponent(self):
        # opponent at p = 0 with theta > 0 is outside the model's domain
        spec = sr.symmetric_spec(theta=0.5)
        profile = sr.StrategyProfile(xs=(1.0, 1.0), xp=(1.0, 0.0))
        with pytest.raises(sr.ModelDomainError):
            sr.best_response(0, profile, spec, CFG)

    def test_nonfinite_payoff_raises(self):
        # unreachable through validated inputs (the box floor bounds costs);
        # corrupt d past validation to exercise the guard
        p_bad = params()
        object.__setattr__(p_bad, "d", float("inf"))
        spec = sr.ProblemSpec(players=(p_bad, params()))
        with pytest.raises(sr.NonFinitePayoffError):
            sr.best_response(0, sr.StrategyProfile.constant(2, 1.0), spec, CFG)


class TestSolve:
    def test_symmetric_spec_symmetric_profile(self):
        res = sr.solve(baseline(0.5), CFG)
        assert res.converged
        xs, xp = res.profile.xs, res.profile.xp
        assert abs(xs[0] - xs[1]) <= 1e-6 * max(xs)
        assert abs(xp[0] - xp[1]) <= 1e-6 * max(xp)

    def test_claim1_sign_high_theta(self):
        # theta above alpha/beta: safety rises with the factor price
        sig_1 = sr.solve(baseline(1.5, r=1.0), CFG).outcome.sigma
        sig_2 = sr.solve(baseline(1.5, r=2.0), CFG).outcome.sigma
        assert sig_2 > sig_1

    def test_claim1_sign_low_theta(self):
        sig_1 = sr.solve(baseline(0.5, r=1.0), CFG).outcome.sigma
        sig_2 = sr.solve(baseline(0.5, r=2.0), CFG).outcome.sigma
        assert sig_2 < sig_1

    def test_iteration_cap_reports_nonconvergence(self):
        p1 = params(A=100.0, B=2.0, beta=0.25)
        p2 = params(A=100.0, B=1.0, beta=0.25)
        spec = sr.ProblemSpec(players=(p1, p2))
        res = sr.solve(spec, sr.SolverConfig(x_min=1e-6, max_iters=1))
        assert not res.converged
        assert res.iterations == 1
        assert res.residual > sr.SolverConfig().tol

    def test_determinism_bit_identical(self):
        spec = baseline(1.5, mode=W)
        a = sr.solve(spec, CFG)
        b = sr.solve(spec, CFG)
        assert a.profile == b.profile
        assert a.outcome == b.outcome
        assert (a.iterations, a.residual, a.converged) == (b.iterations, b.residual, b.converged)

    def test_init_outside_box_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            sr.solve(baseline(0.5), CFG, init=sr.StrategyProfile.constant(2, 1e-9))

    def test_clamped_flag_marks_box_boundary(self):
        p_costly = params(r=1e6, d=0.0)
        spec = sr.ProblemSpec(players=(p_costly, params()))
        res = sr.solve(spec, CFG)
        assert res.clamped
        boundary = [
            v
            for v in res.profile.xs + res.profile.xp
            if abs(v - CFG.x_min) <= 1e-12 * CFG.x_min or abs(v - CFG.x_max) <= 1e-12 * CFG.x_max
        ]
        assert boundary, "clamped flag set but no coordinate on the box boundary"
        interior = sr.solve(baseline(1.5), CFG)
        assert interior.converged and not interior.clamped
        assert interior.residual <= CFG.tol

    def test_monotone_cost_response(self):
        # total purchased compute weakly decreases in the common factor price
        totals = []
        for r in np.logspace(-1, 1, 10):
            res = sr.solve(baseline(1.5, r=float(r)), CFG)
            assert res.converged
            totals.append(res.profile.total(0))
        assert all(b <= a * (1 + 1e-9) for a, b in zip(totals, totals[1:]))


class TestVerifyEquilibrium:
    def test_converged_baseline_passes(self):
        spec = baseline(0.5)
        res = sr.solve(spec, CFG)
        assert res.converged
        assert sr.verify_equilibrium(res, spec, CFG, 64)

    def test_detects_profitable_deviation(self):
        spec = baseline(0.5)
        res = sr.solve(spec, CFG)
        moved = sr.StrategyProfile(
            xs=res.profile.xs,
            xp=(res.profile.xp[0] * 2.0, res.profile.xp[1]),
        )
        from dataclasses import replace

        bad = replace(res, profile=moved, outcome=sr.evaluate(moved, spec))
        assert not sr.verify_equilibrium(bad, spec, CFG, 64)

    def test_degenerate_grid_uses_stencil_only(self):
        spec = baseline(0.5)
        res = sr.solve(spec, CFG)
        assert sr.verify_equilibrium(res, spec, CFG, 1) in (True, False)
        assert sr.verify_equilibrium(res, spec, CFG, 1)


class TestOracle:
    def test_requires_two_players(self):
        spec = sr.ProblemSpec(players=(params(), params(), params()))
        with pytest.raises(ValueError, match="2 players"):
            sr.oracle_solve(spec, 32)

    def test_symmetric_argmax(self):
        spec = baseline(0.5)
        res = sr.oracle_solve(spec, 64, x_min=1e-6, x_max=1e4)
        assert res.converged
        assert res.profile.xs[0] == res.profile.xs[1]
        assert res.profile.xp[0] == res.profile.xp[1]

    def test_agreement_with_solve(self):
        spec = baseline(0.5)
        fine = sr.solve(spec, CFG)
        coarse = sr.oracle_solve(spec, 200, x_min=1e-6, x_max=1e4)
        cell = math.log(1e4 / 1e-6) / 199
        for i in range(2):
            assert abs(math.log(fine.profile.xs[i]) - math.log(coarse.profile.xs[i])) <= cell
            assert abs(math.log(fine.profile.xp[i]) - math.log(coarse.profile.xp[i])) <= cell
        assert coarse.outcome.sigma == pytest.approx(fine.outcome.sigma, rel=0.02)
