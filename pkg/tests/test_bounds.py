import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import comb

import oracles
from wtbound.arrivals import ArrivalProcess, CompositeArrival, Envelope, burst, custom, train
from wtbound.bounds import (FAMILIES, Scenario, bound, bound_backlog, bound_stationary, kernel_backlog,
                            kernel_for, kernel_sotat, kernel_sotat_sigma_rho, kernel_stationary, kernel_wtb,
                            kernel_wtb_delayed, kernel_wtb_sigma_rho, kernel_wtb_single)
from wtbound.channel import ConstantChannel, RayleighChannel

S_GRID = np.geomspace(1e-3, 2.0, 25)


def clipped(res):
    """Log of the reported probability; raw values above 0 carry no ordering."""
    return min(0.0, res.raw_log_value)


def random_scenario(rng, delayed=False):
    ch = RayleighChannel.from_db(float(rng.uniform(0, 15)))
    N = int(rng.integers(1, 5))
    T = int(rng.integers(1, 7))
    inc = tuple(float(v) for v in rng.integers(0, 40, T))
    backlog = tuple(float(v) for v in rng.integers(0, 80, N))
    t = int(rng.integers(1, T + 1))
    w = int(rng.integers(0, 30 - t - (3 if delayed else 0)))
    arr = ArrivalProcess(inc)
    if delayed:
        d = int(rng.integers(0, 4))
        arr = CompositeArrival.constant_overhead(arr, d, float(rng.uniform(0, 30)))
    return Scenario(ch, backlog, arr, t, w)


class TestScenario:
    def test_derived_fields(self, two_hop):
        assert two_hop.tau == 15 and two_hop.x_max == 50 and two_hop.hops == 2

    def test_validation(self, ch5):
        with pytest.raises(ValueError):
            Scenario(ch5, (), burst(1), 1)
        with pytest.raises(ValueError):
            Scenario(ch5, (-1.0,), burst(1), 1)
        with pytest.raises(ValueError):
            Scenario(ch5, (0.0,), burst(1), 1, -1)

    def test_shift(self, ch5):
        sc = Scenario(ch5, (1.0,), CompositeArrival.constant_overhead(train(25, 5), 2, 25), 5, 3)
        sh = sc.shifted()
        assert sh.eval_time == 7 and sh.arrivals.increments[:3] == (25, 25, 25)


class TestWTBKernel:
    def test_single_hop_reduction(self, ch5):
        for w in (0, 4, 11):
            sc = Scenario(ch5, (40.0,), train(25, 5), 5, w)
            for s in S_GRID:
                assert abs(kernel_wtb(sc, s) - kernel_wtb_single(sc, s)) <= 1e-12 * max(1, abs(kernel_wtb(sc, s)))

    def test_single_requires_one_hop(self, two_hop):
        with pytest.raises(ValueError):
            kernel_wtb_single(two_hop, 0.1)

    def test_hand_evaluated_unit_case(self):
        # Zero rate, arrivals and backlog: every factor is 1 and only binomials remain.
        sc = Scenario(ConstantChannel(0.0), (0.0, 0.0), ArrivalProcess((0.0, 0.0, 0.0)), 3, 2)
        expected = comb(5, 4) * 2 + comb(4, 4) + comb(5, 4)
        assert expected == 16
        for s in (0.01, 1.0, 7.0):
            assert math.exp(kernel_wtb(sc, s)) == pytest.approx(expected, rel=1e-13)

    def test_enumeration_oracle(self, two_hop):
        ref = oracles.phi_wtb(two_hop.channel, 0.05, [25] * 5, (50, 50), 5, 10)
        assert oracles.log_rel_err(kernel_wtb(two_hop, 0.05), ref) <= 1e-10

    def test_burst_direct_evaluation(self, single_burst, ch5):
        direct = 0.1 * 25 + 4 * math.log(oracles.V(ch5, 0.1))
        assert kernel_wtb_single(single_burst, 0.1) == pytest.approx(direct, rel=1e-11)

    def test_empty_system_vanishes(self, ch5):
        sc = Scenario(ch5, (0.0,), ArrivalProcess((0.0,)), 1, 0)
        vals = [kernel_wtb_single(sc, s) for s in np.geomspace(0.01, 1e3, 30)]
        assert all(b < a < 0 for a, b in zip(vals, vals[1:]))
        assert bound(sc, "wtb").probability < 1e-4

    @given(st.integers(0, 10 ** 6))
    def test_random_enumeration(self, seed):
        sc = random_scenario(np.random.default_rng(seed))
        s = float(np.random.default_rng(seed + 1).uniform(0.005, 0.5))
        ref = oracles.phi_wtb(sc.channel, s, list(sc.arrivals.increments), sc.backlog, sc.eval_time, sc.target_delay)
        assert oracles.log_rel_err(kernel_wtb(sc, s), ref) <= 1e-10

    def test_stress_grid_finite(self, ch5):
        for N in (1, 3, 5):
            for w in (0, 100, 195):
                sc = Scenario(ch5, (500.0,) * N, train(200, 5), 5, w)
                for s in (1e-6, 0.1, 5.0, 500.0):
                    assert math.isfinite(kernel_wtb(sc, s))
                    assert math.isfinite(kernel_sotat(sc, min(s, 0.99)))

    def test_rejects_delayed_input(self, ch5):
        sc = Scenario(ch5, (1.0,), CompositeArrival.constant_overhead(burst(1), 1, 1), 1)
        with pytest.raises(ValueError):
            kernel_wtb(sc, 0.1)
        with pytest.raises(ValueError):
            bound(sc, "wtb")


class TestEnvelopeForms:
    def test_table_row(self, ch5):
        sc = Scenario(ch5, (100.0,), train(25, 5), 5, 10)
        ref = oracles.table_wtb_row(ch5, 0.05, 0, 25, 100, 5, 10)
        assert oracles.log_rel_err(kernel_wtb_sigma_rho(sc, 0.05), ref) <= 1e-10

    @pytest.mark.parametrize("N,t,w", [(1, 5, 3), (2, 5, 10), (3, 1, 4), (4, 7, 20)])
    def test_geometric_form_matches_sum(self, ch5, N, t, w):
        env = Envelope(10.0, 20.0)
        sc = Scenario(ch5, tuple(range(10, 10 + 10 * N, 10)), custom([20] * t, 10, 20), t, w)
        for s in (0.01, 0.07, 0.3):
            ref = oracles.phi_wtb_envelope(ch5, s, env.sigma, env.rho, sc.backlog, t, w)
            assert oracles.log_rel_err(kernel_wtb_sigma_rho(sc, s), ref) <= 1e-10

    def test_dominates_exact_arrivals(self, ch5):
        sc = Scenario(ch5, (30.0, 20.0), custom([5, 25, 0, 12, 25], sigma=0, rho=25), 5, 6)
        for s in S_GRID:
            assert kernel_wtb_sigma_rho(sc, s) >= kernel_wtb(sc, s) - 1e-12

    def test_unit_ratio_limit(self):
        # V0 = 1 exactly: the geometric sum has t - 1 equal terms.
        sc = Scenario(ConstantChannel(25.0), (0.0,), train(25, 4), 4, 0)
        assert math.exp(kernel_wtb_sigma_rho(sc, 0.01)) == pytest.approx(math.exp(kernel_wtb(sc, 0.01)), rel=1e-12)

    def test_t_one_leaves_backlog_terms(self, ch5):
        sc = Scenario(ch5, (7.0,), train(25, 1), 1, 2)
        s = 0.1
        expected = s * (25 + 7) + 3 * ch5.ln_V(s)
        assert kernel_wtb_sigma_rho(sc, s) == pytest.approx(expected, rel=1e-12)

    def test_needs_envelope(self, ch5):
        sc = Scenario(ch5, (0.0,), ArrivalProcess((1.0,)), 1)
        with pytest.raises(ValueError):
            kernel_wtb_sigma_rho(sc, 0.1)


class TestSOTAT:
    def test_closed_form_single_hop(self, ch5):
        for t, w, sigma, rho in [(5, 10, 0, 25), (1, 3, 25, 0), (3, 0, 10, 20)]:
            sc = Scenario(ch5, (100.0,), custom([rho] * t, sigma, rho), t, w)
            for s in (0.02, 0.1, 0.6):
                ref = oracles.sotat_envelope_sum(ch5, s, sigma, rho, 100, t, w)
                assert oracles.log_rel_err(kernel_sotat_sigma_rho(sc, s), ref) <= 1e-10

    def test_direct_sum_oracle(self, two_hop):
        for s in (0.05, 0.5):
            ref = oracles.sotat_sum(two_hop.channel, s, [25] * 5, (50, 50), 5, 10)
            assert oracles.log_rel_err(kernel_sotat(two_hop, s), ref) <= 1e-10

    def test_s_limit(self, two_hop):
        with pytest.raises(ValueError):
            kernel_sotat(two_hop, 1.0)

    def test_t_zero_single_term(self, ch5):
        sc = Scenario(ch5, (10.0,), burst(25), 0, 4)
        s = 0.3
        assert kernel_sotat(sc, s) == pytest.approx(s * 10 + 4 * ch5.ln_V(s), rel=1e-12)

    def test_bound_not_below_wtb(self, ch5):
        for w in range(0, 31, 3):
            sc = Scenario(ch5, (50.0, 50.0), train(25, 5), 5, w)
            assert clipped(bound(sc, "sotat")) >= clipped(bound(sc, "wtb"))


class TestStationary:
    def test_expression(self, two_hop):
        for s in (0.01, 0.05):
            ref = oracles.stationary_expr(two_hop.channel, s, 0, 25, 50, 2, 10)
            assert oracles.log_rel_err(kernel_stationary(two_hop, s), ref) <= 1e-10

    def test_infeasible_is_inf(self, ch5):
        sc = Scenario(ch5, (0.0,), train(100, 2), 2, 1)
        assert kernel_stationary(sc, 0.01) == math.inf

    def test_unstable_reports_one(self, ch5):
        sc = Scenario(ch5, (0.0,), train(100, 2), 2, 1)
        res = bound_stationary(sc)
        assert res.probability == 1.0 and "no stable s" in res.diagnostics["reason"]

    def test_decreasing_in_w_and_near_one_at_zero(self, ch5):
        vals = [bound(Scenario(ch5, (0.0,), custom([20], 0, 20), 1, w), "stationary").probability
                for w in range(0, 15)]
        assert vals[0] > 0.5
        assert all(b < a for a, b in zip(vals, vals[1:]) if a < 1)

    def test_above_sotat(self, ch10):
        sc = Scenario(ch10, (50.0, 50.0), train(25, 5), 5, 20)
        assert clipped(bound(sc, "stationary")) >= clipped(bound(sc, "sotat"))


class TestDelayed:
    def test_d_zero_is_wtb(self, two_hop):
        sc_d = replace(two_hop, arrivals=CompositeArrival(ArrivalProcess(()), two_hop.arrivals, 0))
        for s in S_GRID:
            assert abs(kernel_wtb_delayed(sc_d, s) - kernel_wtb(two_hop, s)) <= 1e-14 * max(1, abs(kernel_wtb(two_hop, s)))

    def test_enumeration_oracle(self, ch5):
        sc = Scenario(ch5, (33.0,) * 3, CompositeArrival.constant_overhead(train(25, 5), 2, 25), 5, 10)
        ref = oracles.phi_delayed(ch5, 0.05, [25, 25], [25] * 5, (33, 33, 33), 2, 5, 10)
        assert oracles.log_rel_err(kernel_wtb_delayed(sc, 0.05), ref) <= 1e-10

    @given(st.integers(0, 10 ** 6))
    def test_random_enumeration(self, seed):
        sc = random_scenario(np.random.default_rng(seed), delayed=True)
        a = sc.arrivals
        if isinstance(a, CompositeArrival):
            over, msg, d = a.overhead.increments, a.message.increments, a.d
        else:
            over, msg, d = (), a.increments, 0
        s = 0.04
        ref = oracles.phi_delayed(sc.channel, s, over, msg, sc.backlog, d, sc.eval_time, sc.target_delay)
        assert oracles.log_rel_err(kernel_wtb_delayed(sc, s), ref) <= 1e-10

    def test_non_decreasing_in_d(self, ch5):
        for w in (5, 10):
            vals = [clipped(bound(Scenario(ch5, (33.0,) * 3, CompositeArrival.constant_overhead(train(25, 5), d, 25),
                                          5, w), "wtb_delayed")) for d in range(5)]
            assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


class TestBacklog:
    def test_zero_threshold_is_phi_at_t_plus_w(self, two_hop):
        # With t + w past the message end, the arrival index saturates at T.
        s = 0.07
        assert kernel_backlog(two_hop, s, 0.0) == pytest.approx(kernel_wtb(two_hop, s), rel=1e-13)

    def test_decays_with_threshold(self, two_hop):
        vals = [bound_backlog(two_hop, x).raw_log_value for x in (0, 100, 400, 4000)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert bound_backlog(two_hop, 1e5).probability < 1e-100

    def test_negative_threshold(self, two_hop):
        with pytest.raises(ValueError):
            bound_backlog(two_hop, -1)


class TestDispatchAndMonotonicity:
    def test_families(self):
        assert set(FAMILIES) == {"stationary", "sotat", "wtb", "wtb_delayed"}
        with pytest.raises(ValueError):
            kernel_for("nope")

    def test_result_invariants(self, two_hop):
        for fam in ("stationary", "sotat", "wtb", "wtb_delayed"):
            r = bound(two_hop, fam)
            assert 0 <= r.probability <= 1
            assert r.probability == pytest.approx(min(1.0, math.exp(r.raw_log_value)), rel=1e-12)
            assert r.s_opt > 0 and r.evaluations > 0

    @pytest.mark.parametrize("fam", ["stationary", "sotat", "wtb"])
    def test_non_increasing_in_w(self, ch5, fam):
        vals = [clipped(bound(Scenario(ch5, (50.0, 50.0), train(25, 5), 5, w), fam)) for w in range(0, 25)]
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("fam", ["stationary", "sotat", "wtb"])
    def test_non_decreasing_in_backlog(self, ch5, fam):
        base = Scenario(ch5, (30.0, 30.0, 30.0), train(25, 5), 5, 12)
        ref = clipped(bound(base, fam))
        for n in range(3):
            x = list(base.backlog)
            x[n] += 40
            assert clipped(bound(replace(base, backlog=tuple(x)), fam)) >= ref - 1e-9

    def test_ordering_ten_db(self, ch10):
        for w in range(0, 31):
            sc = Scenario(ch10, (50.0, 50.0), train(25, 5), 5, w)
            p = [clipped(bound(sc, f)) for f in ("wtb", "sotat", "stationary")]
            assert p[0] <= p[1] + 1e-12 and p[1] <= p[2] + 1e-12
