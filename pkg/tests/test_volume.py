import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levybool.field import RadiusLaw
from levybool.motion import TargetMotion
from levybool.stable import PathSkeleton, StableParams, sample_skeleton
from levybool.volume import (CompactSet, ball_capacity, ball_union_volume,
                             ball_volume, capacity_constant,
                             cumulative_minkowski_volume, drift_shift,
                             expected_sausage_rate, minkowski_sum_volume,
                             sausage_volume)

from conftest import make_rng


def single_point_skeleton(dim=2):
    return PathSkeleton(times=np.array([0.0]),
                        positions=np.zeros((1, dim)),
                        params=StableParams(1.5, dim))


def brute_force_center_in(points, r, cell):
    """Independent oracle: exhaustive center-in test over the full box."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lo = pts.min(0) - r - 2 * cell
    hi = pts.max(0) + r + 2 * cell
    axes = [np.arange(math.floor(l / cell), math.ceil(h / cell) + 1)
            for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = (np.stack([m.ravel() for m in mesh], 1) + 0.5) * cell
    d2 = ((centers[:, None, :] - pts[None, :, :]) ** 2).sum(2).min(1)
    return float((d2 <= r * r).sum()) * cell ** pts.shape[1]


class TestCapacity:
    def test_closed_form_values(self):
        assert capacity_constant(1.0, 2) == pytest.approx(2 * math.pi, abs=1e-12)
        assert capacity_constant(2.0, 3) == pytest.approx(4 * math.pi, abs=1e-12)

    def test_domain_error_at_boundary(self):
        with pytest.raises(ValueError):
            capacity_constant(2.0, 2)

    def test_ball_capacity_matches_at_alpha_two(self):
        for d in (3, 4, 5):
            assert ball_capacity(2.0, d) == pytest.approx(
                capacity_constant(2.0, d), rel=1e-12)

    def test_ball_capacity_smaller_for_jumps(self):
        # strictly below the gamma-product constant when alpha < 2
        for alpha, d in ((1.0, 2), (1.5, 2), (0.8, 1)):
            assert ball_capacity(alpha, d) < capacity_constant(alpha, d)
        assert ball_capacity(1.0, 2) == pytest.approx(4.0, abs=1e-12)

    def test_hitting_probability_closed_form(self):
        # P(ever hit B_1 from distance x) = I_{1/x^2}((d-a)/2, a/2);
        # MC oracle for the planar Cauchy motion from x = 4
        from scipy import special
        from levybool.stable import sample_increments
        params = StableParams(1.0, 2)
        rng = make_rng(777)
        n, horizon, h = 8000, 200.0, 0.02
        pos = np.tile(np.array([-4.0, 0.0]), (n, 1))
        hit = np.zeros(n, dtype=bool)
        for _ in range(int(horizon / h)):
            pos += sample_increments(params, h, n, rng)
            np.logical_or(hit, (pos ** 2).sum(1) <= 1.0, out=hit)
        exact = special.betainc(0.5, 0.5, 1.0 / 16.0)
        assert hit.mean() == pytest.approx(exact, abs=0.015)


class TestGridVolume:
    def test_single_ball(self):
        v = ball_union_volume([[0.35, -0.2]], 1.0)
        assert v.value == pytest.approx(math.pi, abs=max(v.half_width, 0.12))

    def test_two_disjoint_balls(self):
        v = ball_union_volume([[0.1, 0.2], [10.3, 0.4]], 1.0)
        assert v.value == pytest.approx(2 * math.pi, abs=max(v.half_width, 0.2))

    def test_zero_radius(self):
        assert ball_union_volume([[0.0, 0.0]], 0.0).value == 0.0

    def test_matches_bruteforce_oracle(self):
        rng = make_rng(31)
        for r in (0.5, 1.0, 2.0):
            pts = rng.normal(size=(23, 2)) * 1.5
            mine = ball_union_volume(pts, r).value
            ref = brute_force_center_in(pts, r, r / 8.0)
            assert mine == pytest.approx(ref, abs=1e-9)

    def test_matches_bruteforce_in_3d(self):
        rng = make_rng(32)
        pts = rng.normal(size=(6, 3))
        mine = ball_union_volume(pts, 1.0).value
        ref = brute_force_center_in(pts, 1.0, 1.0 / 8.0)
        assert mine == pytest.approx(ref, abs=1e-9)

    def test_methods_agree(self):
        rng = make_rng(33)
        skel = sample_skeleton(StableParams(1.5, 2), [0, 0], 2.0, 0.02, rng)
        grid = sausage_volume(skel, 1.0)
        hm = sausage_volume(skel, 1.0, method="hit-or-miss", rng=rng)
        assert abs(grid.value - hm.value) <= grid.half_width + hm.half_width

    def test_radius_monotone(self):
        rng = make_rng(34)
        pts = rng.normal(size=(30, 2))
        cell = 0.05
        vols = [ball_union_volume(pts, r, cell=cell).value
                for r in (0.5, 0.8, 1.3)]
        assert vols[0] <= vols[1] <= vols[2]

    @given(seed=st.integers(0, 10 ** 6))
    @settings(max_examples=20, deadline=None)
    def test_scaling_bound_r_to_the_d(self, seed):
        # |B_r(A)| <= r^d |B_1(A)| for any finite set
        rng = make_rng(seed)
        pts = rng.normal(size=(rng.integers(1, 12), 2)) * 2.0
        v1 = ball_union_volume(pts, 1.0)
        for r in (0.5, 2.0):
            vr = ball_union_volume(pts, r)
            tol = vr.half_width + r ** 2 * v1.half_width
            assert vr.value <= r ** 2 * v1.value + tol


class TestShrinkProperty:
    def test_shrunk_sets_have_smaller_dilations(self):
        # scaling a finite set toward the origin cannot grow its dilation
        rng = make_rng(35)
        for _ in range(40):
            pts = rng.normal(size=(rng.integers(2, 14), 2)) * 2.5
            for r in (0.5, 1.0):
                base = ball_union_volume(pts, r)
                for c in (0.0, 0.3, 0.7, 1.0):
                    shrunk = ball_union_volume(pts * c, r)
                    tol = 2.0 * (base.half_width + shrunk.half_width)
                    assert shrunk.value <= base.value + tol


class TestMinkowski:
    def test_point_at_origin_reduces_to_sausage(self):
        skel = single_point_skeleton()
        a = minkowski_sum_volume(skel, 1.0, CompactSet.origin(2))
        b = sausage_volume(skel, 1.0)
        assert a.value == b.value

    def test_ball_summand_dilates_radius(self):
        skel = single_point_skeleton()
        v = minkowski_sum_volume(skel, 1.0, CompactSet.ball([0.0, 0.0], 0.5))
        assert v.value == pytest.approx(ball_volume(1.5, 2),
                                        abs=max(v.half_width, 0.2))

    def test_unit_square_dilated_by_unit_disk(self):
        # area = 1 + 4 + pi (square, four side strips, four corner quarters)
        skel = single_point_skeleton()
        sq = CompactSet.box([-0.5, -0.5], [0.5, 0.5])
        v = minkowski_sum_volume(skel, 1.0, sq)
        exact = 1.0 + 4.0 + math.pi
        assert v.value == pytest.approx(exact, abs=max(v.half_width, 0.25))
        hm = minkowski_sum_volume(skel, 1.0, sq, method="hit-or-miss",
                                  rng=make_rng(36))
        assert abs(hm.value - exact) <= 3.0 * hm.half_width

    def test_point_list_summand(self):
        skel = single_point_skeleton()
        two = CompactSet.point_set([[0.0, 0.0], [10.0, 0.0]])
        v = minkowski_sum_volume(skel, 1.0, two)
        assert v.value == pytest.approx(2 * math.pi, abs=0.3)


class TestDriftShift:
    def test_identity_for_static(self, rng):
        skel = sample_skeleton(StableParams(1.5, 2), [0, 0], 1.0, 0.1, rng)
        out = drift_shift(skel, TargetMotion.static())
        assert np.array_equal(out.positions, skel.positions)

    def test_linear_shift_exact(self, rng):
        skel = sample_skeleton(StableParams(1.5, 2), [0, 0], 2.0, 0.1, rng)
        g = TargetMotion.linear(3.0, [0.0, 1.0])
        out = drift_shift(skel, g)
        assert np.allclose(out.positions[-1], skel.positions[-1]
                           + np.array([0.0, 6.0]))
        assert np.array_equal(out.times, skel.times)

    def test_drift_does_not_shrink_expected_volume(self):
        # MC check of the rearrangement direction for a cadlag drift
        params = StableParams(1.5, 2)
        g = TargetMotion.linear(2.0, [1.0, 0.0])
        n = 60
        static_vals, drift_vals = [], []
        rng = make_rng(37)
        for _ in range(n):
            skel = sample_skeleton(params, [0, 0], 3.0, 0.02, rng)
            static_vals.append(sausage_volume(skel, 1.0,
                                              report_tolerance=False).value)
            drift_vals.append(sausage_volume(drift_shift(skel, g), 1.0,
                                             report_tolerance=False).value)
        s, dv = np.array(static_vals), np.array(drift_vals)
        joint = 1.96 * math.sqrt(s.var() / n + dv.var() / n)
        assert dv.mean() >= s.mean() - joint


class TestSausageRate:
    def test_cumulative_volume_monotone(self, rng):
        skel = sample_skeleton(StableParams(1.2, 2), [0, 0], 2.0, 0.01, rng)
        idx = np.array([10, 50, 100, 200])
        vols = cumulative_minkowski_volume(skel.positions, 1.0, idx)
        assert np.all(np.diff(vols) >= 0)

    def test_self_similarity_of_volume(self):
        # E|B_r(path_t)| = t^(d/a) E|B_{r t^(-1/a)}(path_1)|
        params = StableParams(1.5, 2)
        t, r, n = 4.0, 1.0, 80
        lhs, rhs = [], []
        rng = make_rng(38)
        scale = t ** (1.0 / params.alpha)
        for _ in range(n):
            a = sample_skeleton(params, [0, 0], t, 0.01, rng)
            lhs.append(sausage_volume(a, r, report_tolerance=False).value)
            b = sample_skeleton(params, [0, 0], 1.0, 0.01 / t, rng)
            rhs.append(t ** (2.0 / 1.5)
                       * sausage_volume(b, r / scale,
                                        report_tolerance=False).value)
        lhs, rhs = np.array(lhs), np.array(rhs)
        joint = 1.96 * math.sqrt(lhs.var() / n + rhs.var() / n)
        assert abs(lhs.mean() - rhs.mean()) <= joint + 0.02 * lhs.mean()

    def test_monotone_correction_ladder(self):
        # estimate(t) - t * ball_capacity stays nondecreasing within CI
        params = StableParams(1.5, 2)
        law = RadiusLaw.constant(1.0)
        res = expected_sausage_rate(params, law, 8.0, 0.02, 100, make_rng(39),
                                    times=[2.0, 4.0, 8.0], h_check=False)
        cap = ball_capacity(1.5, 2)
        corr = res.times * (res.rate_mean - cap)
        ci = 1.96 * res.times * res.rate_sem
        assert corr[0] <= corr[1] + ci[0] + ci[1]
        assert corr[1] <= corr[2] + ci[1] + ci[2]

    def test_h_check_runs(self):
        params = StableParams(1.5, 2)
        law = RadiusLaw.constant(1.0)
        res = expected_sausage_rate(params, law, 1.0, 0.05, 24, make_rng(40),
                                    h_check=True)
        assert res.h_check["enabled"]
        assert "ok" in res.h_check

    def test_random_radii_rate_uses_moment(self):
        # limit target Cap_ball * E R^{d-alpha}; at short horizons the
        # estimate must sit above it (positive correction)
        params = StableParams(1.0, 2)
        law = RadiusLaw.discrete([1.0, 2.0], [0.5, 0.5])
        res = expected_sausage_rate(params, law, 6.0, 0.02, 80, make_rng(41),
                                    times=[6.0], h_check=False)
        target = ball_capacity(1.0, 2) * law.moment(1.0)
        assert res.rate_mean[0] + 3 * 1.96 * res.rate_sem[0] >= target
