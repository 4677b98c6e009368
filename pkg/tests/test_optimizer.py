import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from markovcap import channels
from markovcap.core import ObjectiveSequence, ParamDomain, PointClass, SequenceConstants, classify_point
from markovcap.optimizer import (
    Algo1Config,
    Algo3Config,
    BacktrackExhausted,
    ConfigError,
    armijo_residuals,
    certified_bound,
    contraction_factor,
    gradient_floor,
    run_algorithm1,
    run_algorithm3,
    verify_lemma1,
    verify_lemma5,
)


def parabola(center=0.3, scale=1.0, rho=0.5, M=2.0, m=2.0, k0=0, lo=0.0, hi=1.0, N=1.0):
    consts = SequenceConstants.constant(N, rho, M, m, k0)
    return ObjectiveSequence(
        ParamDomain.interval(lo, hi), consts, lambda k, th: -scale * (th[0] - center) ** 2, name="parabola"
    )


def drifting_parabola():
    """f_k = -(x-0.3)^2 + 0.5^k x: converges to the plain parabola at rate 0.5."""
    consts = SequenceConstants.constant(1.0, 0.5, 2.0, 2.0, 0)
    return ObjectiveSequence(
        ParamDomain.interval(0, 1), consts, lambda k, th: -((th[0] - 0.3) ** 2) + 0.5**k * th[0]
    )


class TestConfigs:
    def test_alpha_range(self):
        with pytest.raises(ConfigError, match=r"alpha must lie in \(0,0.5\)"):
            Algo1Config(alpha=0.6)

    @pytest.mark.parametrize("kw", [dict(beta=1.0), dict(outer_iters=0), dict(max_backtracks=0), dict(eval_tol=-1)])
    def test_other_fields(self, kw):
        with pytest.raises(ConfigError):
            Algo1Config(**kw)

    def test_algorithm3_defaults_and_b(self):
        cfg = Algo3Config()
        assert (cfg.beta, cfg.b, cfg.outer_iters, cfg.theta0) == (0.5, 0.5, 10, (0.2,))
        with pytest.raises(ConfigError):
            Algo3Config(b=1.0)

    def test_start_must_be_interior(self):
        with pytest.raises(ConfigError, match="interior"):
            run_algorithm1(parabola(), Algo1Config(theta0=1.0))

    def test_algorithm1_needs_modulus(self, ge_seq):
        with pytest.raises(ConfigError, match="modulus"):
            run_algorithm1(ge_seq, Algo1Config(theta0=0.4, outer_iters=2))


class TestAlgorithm1:
    def test_parabola_converges(self):
        trace = run_algorithm1(parabola(), Algo1Config(theta0=0.7, outer_iters=60))
        assert trace.final.theta[0] == pytest.approx(0.3, abs=1e-6)
        assert len(trace) == 60 and trace.stop_reason == "outer_iters"

    def test_drifting_parabola_tracks_limit(self):
        trace = run_algorithm1(drifting_parabola(), Algo1Config(theta0=0.7, outer_iters=60))
        assert trace.final.theta[0] == pytest.approx(0.3, abs=1e-6)

    @given(st.floats(0.05, 0.95).filter(lambda x: abs(x - 0.3) > 1e-6))
    def test_iterates_interior(self, start):
        seq = parabola()
        trace = run_algorithm1(seq, Algo1Config(theta0=start, outer_iters=20))
        assert all(classify_point(seq.domain, r.theta) is PointClass.INTERIOR for r in trace)

    def test_zero_gradient_start_is_rejected(self):
        with pytest.raises(ConfigError, match="vanishes"):
            run_algorithm1(parabola(), Algo1Config(theta0=0.3))

    def test_perturbed_branch_fires_at_stationary_point(self):
        trace = run_algorithm1(drifting_parabola(), Algo1Config(theta0=0.7, outer_iters=80))
        assert trace.final.grad_norm < 1e-14 or any(r.perturbed for r in trace) or len(trace) == 80

    def test_backtrack_exhaustion_raises_with_trace(self):
        seq = parabola(scale=1000.0, M=2000.0, m=2.0)
        with pytest.raises(BacktrackExhausted) as err:
            run_algorithm1(seq, Algo1Config(theta0=0.7, max_backtracks=2))
        assert err.value.trace.stop_reason == "backtrack_exhausted"


class TestAlgorithm3:
    def test_parabola_converges(self):
        seq = parabola(rho=0.1, N=1e-3)
        trace = run_algorithm3(seq, Algo3Config(theta0=0.7, outer_iters=20))
        assert trace.final.theta[0] == pytest.approx(0.3, abs=1e-3)
        # the floor keeps the gradient away from zero until the order catches up
        for r in trace:
            assert r.grad_norm >= gradient_floor(seq, r.outer_k, 0.5)

    def test_start_outside_A(self):
        with pytest.raises(ConfigError, match="outside A"):
            run_algorithm3(parabola(), Algo3Config(theta0=0.3001))

    def test_start_outside_B(self):
        with pytest.raises(ConfigError, match="outside B"):
            run_algorithm3(parabola(rho=0.1, N=1e-3), Algo3Config(theta0=0.7, y0=0.0))

    def test_exhaustion_is_labelled(self):
        seq = parabola(scale=1000.0, M=2000.0, rho=0.1, N=1e-3)
        trace = run_algorithm3(seq, Algo3Config(theta0=0.7, max_backtracks=2))
        assert trace.stop_reason == "backtrack_exhausted"
        with pytest.raises(BacktrackExhausted):
            run_algorithm3(seq, Algo3Config(theta0=0.7, max_backtracks=2, stop_on_exhaust=False))

    def test_order_cap_stops_early(self, ge_seq):
        trace = run_algorithm3(ge_seq, Algo3Config(theta0=0.2, outer_iters=30))
        assert trace.stop_reason == "max_k"
        assert trace.final.outer_k + ge_seq.constants.k0 == ge_seq.max_k


class TestLemmaChecks:
    def test_bec_passes(self, bec_seq):
        report = verify_lemma1(bec_seq)
        assert report.passed, report.failures
        assert report.delta_est > 0 and report.dist_C_boundary > 0
        assert max(report.cond_a_lhs) <= report.delta_est / 8

    def test_noiseless_fails_condition_a(self, noiseless_seq):
        report = verify_lemma1(noiseless_seq, grid_points=501)
        assert not report.passed
        assert report.delta_est > 0
        assert any("condition (a)" in f for f in report.failures)
        assert report.cond_a_lhs[0] > 1000 * report.delta_est / 8

    def test_edge_maximum_fails(self):
        consts = SequenceConstants.constant(1e-6, 0.1, 2.0, 1.0, 5)
        seq = ObjectiveSequence(ParamDomain.interval(0, 1), consts, lambda k, th: th[0])
        report = verify_lemma1(seq, grid_points=101)
        assert not report.passed and report.delta_est <= 0

    def test_ge_start_check_passes(self, ge_seq):
        report = verify_lemma5(ge_seq, b=0.5)
        assert report.passed, report.failures
        assert report.cond_a_rate < 1
        assert 0.05 < report.witness[0] < 0.25

    def test_slow_rate_fails(self):
        report = verify_lemma5(parabola(rho=0.9, k0=0), b=0.5, grid_points=51)
        assert not report.passed
        assert report.cond_a_rate >= 1

    def test_zero_gradient_has_no_witness(self):
        consts = SequenceConstants.constant(1.0, 0.1, 2.0, None, 3)
        seq = ObjectiveSequence(ParamDomain.interval(0, 1), consts, lambda k, th: 0.25)
        report = verify_lemma5(seq, b=0.5, grid_points=51)
        assert not report.passed and report.witness is None

    def test_start_check_b_range(self, ge_seq):
        with pytest.raises(ValueError):
            verify_lemma5(ge_seq, b=1.5)


class TestRunInvariants:
    @pytest.mark.parametrize("run", ["bec_run", "noiseless_run", "ge_run"])
    def test_iterates_interior(self, run, request):
        trace, _ = request.getfixturevalue(run)
        seq = request.getfixturevalue(run.replace("_run", "_seq"))
        assert all(classify_point(seq.domain, r.theta) is PointClass.INTERIOR for r in trace)

    @pytest.mark.parametrize("run, slack", [("bec_run", True), ("noiseless_run", True), ("ge_run", False)])
    def test_armijo_ledger(self, run, slack, request):
        trace, _ = request.getfixturevalue(run)
        seq = request.getfixturevalue(run.replace("_run", "_seq"))
        residuals = armijo_residuals(trace, seq, alpha=0.4, slack=slack)
        # the runner compares a - b >= -tol after rounding a + tol; allow a few ulps of f
        ulps = 4 * np.finfo(float).eps * max(abs(r.f_value) for r in trace)
        assert min(residuals) >= -Algo1Config().eval_tol - ulps

    def test_ge_floor_every_record(self, ge_run, ge_seq):
        trace, _ = ge_run
        for r in trace:
            assert r.grad_norm >= gradient_floor(ge_seq, r.outer_k + ge_seq.constants.k0, 0.5)

    @pytest.mark.parametrize("run", ["bec_run", "noiseless_run"])
    def test_backtracks_bounded(self, run, request):
        trace, _ = request.getfixturevalue(run)
        counts = [r.backtracks for r in trace]
        assert max(counts) <= 50
        assert max(counts[5:]) <= max(counts[:5]) or max(counts[5:]) == max(counts)

    def test_ge_tail_monotone(self, ge_run):
        trace, _ = ge_run
        values = [r.f_value for r in trace]
        tail = values[len(values) // 2 :]
        assert all(b >= a for a, b in zip(tail, tail[1:]))


class TestCertifiedBound:
    def test_literal_report(self, bec_run, bec_seq):
        trace, _ = bec_run
        dist = verify_lemma1(bec_seq).dist_C_boundary
        report = certified_bound(trace, bec_seq, dist)
        c = bec_seq.constants
        assert report.eta == contraction_factor(1.88, 5.81, 0.4, 0.9, dist)
        assert report.delta0 == 2 * 5.81
        assert report.tail == pytest.approx(371 * 0.1 ** (110 + 18), rel=1e-12)
        lo, hi = report.interval
        assert lo <= trace.final.f_value <= hi
        assert report.gamma_coeff == pytest.approx((371 * 5.81 + 5.81**2 + 742) / 0.1 + 2 * 371 * 5.81)
        assert set(report.to_dict()) >= {"eta", "recursion_bound", "tail", "interval", "mode"}
        assert c.m == 1.88

    def test_observed_mode_is_tighter(self, bec_run, bec_seq):
        trace, _ = bec_run
        literal = certified_bound(trace, bec_seq, 0.045)
        observed = certified_bound(trace, bec_seq, 0.045, mode="observed")
        assert observed.recursion_bound < literal.recursion_bound
        assert 0 <= observed.eta_observed < 1

    def test_third_term_value(self):
        assert 1 - 2 * 1.88 * 0.4 * 0.9 / 5.81 == pytest.approx(0.767, abs=5e-4)
        assert contraction_factor(1.88, 5.81, 0.4, 0.9, dist_C=5.81) == pytest.approx(0.767, abs=5e-4)

    def test_eta_outside_unit_interval(self, bec_run, bec_seq):
        trace, _ = bec_run
        with pytest.raises(ValueError, match="constants inconsistent with convergence guarantee"):
            certified_bound(trace, bec_seq, dist_C=-0.1)

    def test_requires_modulus(self, ge_run, ge_seq):
        trace, _ = ge_run
        with pytest.raises(ValueError, match="modulus"):
            certified_bound(trace, ge_seq, 0.05)

    def test_bad_mode(self, bec_run, bec_seq):
        with pytest.raises(ValueError):
            certified_bound(bec_run[0], bec_seq, 0.045, mode="loose")

    @given(st.floats(1e-3, 1.0), st.floats(0.05, 0.45), st.floats(0.1, 0.95))
    def test_contraction_in_unit_interval(self, dist, alpha, beta):
        eta = contraction_factor(1.88, 5.81, alpha, beta, dist)
        assert 0 < eta < 1
        assert math.isclose(eta, 1 - min(2 * 1.88 * alpha, dist / 5.81 * 2 * 1.88 * alpha * beta,
                                         2 * 1.88 * alpha * beta / 5.81))

    def test_larger_seed_gap_widens_interval(self, bec_run, bec_seq):
        trace, _ = bec_run
        a = certified_bound(trace, bec_seq, 0.045, delta0=1.0)
        b = certified_bound(trace, bec_seq, 0.045, delta0=2.0)
        assert b.interval[1] > a.interval[1] and b.interval[0] == a.interval[0]


def test_trace_accessors(bec_run):
    trace, _ = bec_run
    assert trace[-1] is trace.final
    assert trace.thetas().shape == (110, 1)
    assert np.all(np.diff([r.outer_k for r in trace]) == 1)
