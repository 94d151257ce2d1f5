import math

import numpy as np
import pytest

from levybool.detection import (SurvivalCurve, decay_rate, simulate_detection,
                                supermultiplicativity_check, void_survival)
from levybool.field import RadiusLaw, window_plan_from_halfwidth
from levybool.motion import TargetMotion
from levybool.stable import StableParams
from levybool.volume import CompactSet, ball_capacity, ball_volume

from conftest import make_rng

PARAMS = StableParams(1.5, 2)
LAW = RadiusLaw.constant(1.0)


def plan(lam, horizon, w):
    return window_plan_from_halfwidth(PARAMS, lam, LAW, horizon, w)


class TestDirect:
    def test_requires_plan(self, rng):
        with pytest.raises(ValueError):
            simulate_detection(0.5, LAW, PARAMS, TargetMotion.static(),
                               1.0, 0.1, 10, rng, None)

    def test_zero_intensity_never_detects(self, rng):
        curve = simulate_detection(0.0, LAW, PARAMS, TargetMotion.static(),
                                   1.0, 0.1, 50, rng, plan(0.0, 1.0, 5.0))
        assert np.all(curve.survival == 1.0)

    def test_initial_survival_is_void_probability(self):
        # P(T > 0) = exp(-lam * volume of one mean ball)
        lam, n = 0.5, 6000
        curve = simulate_detection(lam, LAW, PARAMS, TargetMotion.static(),
                                   0.5, 0.05, n, make_rng(50),
                                   plan(lam, 0.5, 10.0))
        target = math.exp(-lam * ball_volume(1.0, 2))
        s0, c0 = curve.at(0.0)
        assert abs(s0 - target) <= c0

    def test_survival_nonincreasing(self, rng):
        curve = simulate_detection(0.4, LAW, PARAMS, TargetMotion.static(),
                                   1.0, 0.05, 500, rng, plan(0.4, 1.0, 10.0))
        assert np.all(np.diff(curve.survival) <= 1e-12)

    def test_monotone_in_intensity(self):
        curves = {}
        for lam in (0.3, 0.6):
            curves[lam] = simulate_detection(
                lam, LAW, PARAMS, TargetMotion.static(), 1.0, 0.05, 4000,
                make_rng(51), plan(lam, 1.0, 12.0))
        for t in (0.0, 0.5, 1.0):
            s_lo, c_lo = curves[0.3].at(t)
            s_hi, c_hi = curves[0.6].at(t)
            assert s_hi <= s_lo + c_lo + c_hi

    def test_monotone_under_radius_increase(self):
        lam = 0.4
        small = simulate_detection(lam, RadiusLaw.constant(0.8), PARAMS,
                                   TargetMotion.static(), 1.0, 0.05, 4000,
                                   make_rng(52), plan(lam, 1.0, 12.0))
        big = simulate_detection(lam, RadiusLaw.constant(1.2), PARAMS,
                                 TargetMotion.static(), 1.0, 0.05, 4000,
                                 make_rng(53), plan(lam, 1.0, 12.0))
        for t in (0.0, 0.5, 1.0):
            s_b, c_b = big.at(t)
            s_s, c_s = small.at(t)
            assert s_b <= s_s + c_b + c_s

    def test_h_check_attaches_diagnostics(self):
        lam = 0.4
        curve = simulate_detection(lam, LAW, PARAMS, TargetMotion.static(),
                                   0.5, 0.05, 800, make_rng(54),
                                   plan(lam, 0.5, 8.0), h_check=True)
        assert "h_check" in curve.meta
        assert "ok" in curve.meta["h_check"]


class TestVoid:
    def test_initial_value_single_ball(self):
        # all replicas share the origin-anchored start, so the cell grid
        # needs to be fine enough that alignment bias is below the CI
        lam = 0.5
        curve = void_survival(lam, LAW, PARAMS, TargetMotion.static(), None,
                              0.2, 0.02, 400, make_rng(55),
                              out_times=[0.0], cell=1.0 / 64.0)
        target = math.exp(-lam * ball_volume(1.0, 2))
        s, c = curve.at(0.0)
        assert s == pytest.approx(target, abs=max(3 * c, 0.01))

    def test_ball_summand_at_time_zeroish(self):
        # K = ball(o, 1), R = 0.5: exp(-lam pi 1.5^2) right at the start
        lam = 0.4
        law = RadiusLaw.constant(0.5)
        curve = void_survival(lam, law, PARAMS, TargetMotion.static(),
                              CompactSet.ball([0.0, 0.0], 1.0), 0.1, 0.01,
                              300, make_rng(56), out_times=[0.0],
                              cell=1.0 / 64.0)
        target = math.exp(-lam * math.pi * 1.5 ** 2)
        s, c = curve.at(0.0)
        assert s == pytest.approx(target, abs=max(3 * c, 0.015))

    def test_survival_nonincreasing_by_construction(self, rng):
        curve = void_survival(0.5, LAW, PARAMS, TargetMotion.static(), None,
                              2.0, 0.02, 60, rng)
        assert np.all(np.diff(curve.survival) <= 1e-15)

    def test_oracle_equivalence_small(self):
        # the core dual-route property at reduced scale
        lam, horizon, h, n = 0.5, 3.0, 0.02, 5000
        direct = simulate_detection(lam, LAW, PARAMS, TargetMotion.static(),
                                    horizon, h, n, make_rng(57),
                                    plan(lam, horizon, 25.0))
        void = void_survival(lam, LAW, PARAMS, TargetMotion.static(), None,
                             horizon, h, n // 2, make_rng(58),
                             out_times=[1.0, 2.0, 3.0])
        for t in (1.0, 2.0, 3.0):
            sd, cd = direct.at(t)
            sv, cv = void.at(t)
            assert abs(sd - sv) <= cd + cv

    def test_drifted_target_decays_faster(self):
        lam, horizon = 0.5, 3.0
        static = void_survival(lam, LAW, PARAMS, TargetMotion.static(), None,
                               horizon, 0.02, 300, make_rng(59))
        moving = void_survival(lam, LAW, PARAMS,
                               TargetMotion.linear(4.0, [1.0, 0.0]), None,
                               horizon, 0.02, 300, make_rng(60))
        s_s, c_s = static.at(horizon)
        s_m, c_m = moving.at(horizon)
        assert s_m <= s_s + c_s + c_m


class TestRateFit:
    def test_exact_exponential(self):
        times = np.linspace(0.0, 5.0, 51)
        curve = SurvivalCurve(times=times, survival=np.exp(-2.0 * times),
                              ci=np.zeros_like(times), n=10 ** 6,
                              method="direct")
        fit = decay_rate(curve)
        assert fit.rate == pytest.approx(2.0, abs=1e-12)
        assert fit.stderr < 1e-10

    def test_window_override(self):
        times = np.linspace(0.0, 5.0, 51)
        surv = np.exp(-1.0 * times - 0.5 * np.maximum(1.0 - times, 0.0) ** 2)
        curve = SurvivalCurve(times=times, survival=surv,
                              ci=np.zeros_like(times), n=10 ** 6,
                              method="direct")
        fit = decay_rate(curve, window=(2.0, 5.0))
        assert fit.rate == pytest.approx(1.0, abs=1e-9)

    def test_starved_window_warns(self):
        times = np.linspace(0.0, 3.0, 10)
        surv = np.exp(-times)
        surv[-3:] = 0.0
        curve = SurvivalCurve(times=times, survival=surv,
                              ci=np.zeros_like(times), n=100, method="direct")
        with pytest.warns(UserWarning):
            decay_rate(curve, window=(2.5, 3.0))

    def test_void_curve_uses_neg_log_meta(self):
        # survival underflows to zero yet the rate is still recoverable
        times = np.linspace(1.0, 50.0, 50)
        neg_log = 30.0 * times
        curve = SurvivalCurve(times=times, survival=np.exp(-np.minimum(
            neg_log, 700)), ci=np.zeros_like(times), n=100,
            method="void-formula", meta={"neg_log_survival": neg_log})
        fit = decay_rate(curve)
        assert fit.rate == pytest.approx(30.0, rel=1e-9)


class TestSupermultiplicativity:
    def synthetic(self, rate=1.5):
        times = np.linspace(0.0, 6.0, 121)
        return SurvivalCurve(times=times, survival=np.exp(-rate * times),
                             ci=np.full_like(times, 1e-9), n=10 ** 6,
                             method="direct")

    def test_zero_pair_is_equality(self):
        report = supermultiplicativity_check(self.synthetic(), [(0.0, 2.0)])
        assert report[0].ok
        assert report[0].slack == pytest.approx(0.0, abs=1e-12)

    def test_exact_exponential_is_tight(self):
        report = supermultiplicativity_check(self.synthetic(),
                                             [(1.0, 1.0), (2.0, 2.0)])
        for entry in report:
            assert entry.ok
            assert abs(entry.slack) < 1e-9

    def test_annealed_direct_curve(self):
        # direct MC with a fresh heavy-tailed target per replica
        lam, horizon, h, n = 0.5, 2.0, 0.02, 4000
        curve = simulate_detection(lam, LAW, PARAMS, TargetMotion.levy(),
                                   horizon, h, n, make_rng(61),
                                   plan(lam, horizon, 30.0))
        report = supermultiplicativity_check(curve, [(1.0, 1.0)])
        assert report[0].ok
