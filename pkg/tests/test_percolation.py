import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from levybool.field import RadiusLaw, sample_cloud
from levybool.motion import TargetMotion
from levybool.percolation import (ComponentLabeling, components,
                                  components_bruteforce, crossing_probability,
                                  discretize_radii, estimate_lambda_c,
                                  giant_fraction, good_box_fraction,
                                  good_box_single_time_probability,
                                  simulate_percolation_time)
from levybool.stable import StableParams

from conftest import make_rng


class TestComponents:
    def test_two_touching_balls(self):
        lab = components([[0.0, 0.0], [1.5, 0.0]], [1.0, 1.0])
        assert lab.n_components == 1

    def test_empty_input(self):
        lab = components(np.empty((0, 2)), np.empty(0))
        assert lab.n_components == 0
        assert lab.largest == -1

    def test_matches_bruteforce_oracle(self):
        rng = make_rng(81)
        for _ in range(30):
            n = int(rng.integers(2, 50))
            pos = rng.uniform(-6, 6, size=(n, 2))
            radii = rng.uniform(0.1, 1.5, size=n)
            fast = components(pos, radii)
            slow = components_bruteforce(pos, radii)
            assert fast.partition_key() == slow.partition_key()

    @given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 25))
    @settings(max_examples=25, deadline=None)
    def test_matches_bruteforce_hypothesis(self, seed, n):
        rng = make_rng(seed)
        pos = rng.uniform(-4, 4, size=(n, 2))
        radii = rng.uniform(0.05, 2.0, size=n)
        assert components(pos, radii).partition_key() == \
            components_bruteforce(pos, radii).partition_key()

    def test_sizes_partition(self):
        rng = make_rng(82)
        pos = rng.uniform(-5, 5, size=(40, 2))
        lab = components(pos, np.full(40, 0.7))
        assert int(lab.sizes.sum()) == 40


class TestGiantFraction:
    def test_subcritical_dust(self):
        gf = giant_fraction(0.02, RadiusLaw.constant(1.0), 20.0, 2, 30,
                            make_rng(83))
        assert gf.theta < 0.2

    def test_deep_supercritical_saturates(self):
        gf = giant_fraction(2.0, RadiusLaw.constant(1.0), 20.0, 2, 30,
                            make_rng(84))
        assert gf.theta > 0.99

    def test_monotone_in_intensity_by_coupling(self):
        # superposition coupling: add an independent thinning on top of the
        # smaller cloud and relabel; the giant fraction cannot drop much
        rng = make_rng(85)
        lams = [0.4, 0.7, 1.0]
        thetas = []
        for lam in lams:
            vals = []
            for _ in range(25):
                # one common base cloud, thinned superpositions share points
                base = sample_cloud(lams[-1], 16.0, RadiusLaw.constant(1.0),
                                    2, rng)
                keep = rng.uniform(size=len(base)) < lam / lams[-1]
                pos, radii = base.x0[keep], base.radii[keep]
                if len(radii) == 0:
                    vals.append(0.0)
                    continue
                lab = components(pos, radii)
                vals.append(lab.sizes[lab.largest] / len(radii))
            thetas.append((float(np.mean(vals)),
                           1.96 * float(np.std(vals)) / 5.0))
        for (t_lo, c_lo), (t_hi, c_hi) in zip(thetas, thetas[1:]):
            assert t_hi >= t_lo - c_lo - c_hi


class TestLambdaC:
    def test_zero_intensity_never_crosses(self, rng):
        p, _ = crossing_probability(0.0, RadiusLaw.constant(1.0), 8.0, 2, 20,
                                    rng)
        assert p == 0.0

    def test_crossing_monotone_in_intensity(self):
        ps = []
        for lam in (0.2, 0.35, 0.6):
            p, hw = crossing_probability(lam, RadiusLaw.constant(1.0), 10.0, 2,
                                         150, make_rng(86))
            ps.append((p, hw))
        for (p_lo, c_lo), (p_hi, c_hi) in zip(ps, ps[1:]):
            assert p_hi >= p_lo - c_lo - c_hi

    @pytest.mark.slow
    def test_interval_consistent_under_window_doubling(self):
        law = RadiusLaw.constant(1.0)
        lo1, hi1 = estimate_lambda_c(law, 10.0, 2, make_rng(87),
                                     tolerance=0.08, n=150)
        lo2, hi2 = estimate_lambda_c(law, 20.0, 2, make_rng(88),
                                     tolerance=0.08, n=150)
        # brackets from both windows overlap after padding by one notch of
        # bisection resolution
        pad = 0.1
        assert lo1 - pad <= hi2 and lo2 - pad <= hi1

    def test_dimension_gate(self, rng):
        with pytest.raises(ValueError):
            estimate_lambda_c(RadiusLaw.constant(1.0), 8.0, 1, rng)


class TestDiscretisation:
    def test_constant_law_already_on_grid(self, rng):
        law = RadiusLaw.constant(1.0)
        cloud = sample_cloud(0.5, 6.0, law, 2, rng)
        out, spec = discretize_radii(cloud, law, 2.0, 0.25)
        assert np.all(out.radii == 1.0)
        assert len(out) == len(cloud)
        assert spec.M == 4

    def test_rounded_down_subset_model(self, rng):
        law = RadiusLaw.uniform(0.5, 2.5)
        cloud = sample_cloud(1.0, 8.0, law, 2, rng)
        out, spec = discretize_radii(cloud, law, 2.0, 0.2)
        kept = cloud.radii <= 2.0
        assert len(out) == int(kept.sum())
        assert np.all(out.radii <= cloud.radii[kept] + 1e-12)
        assert np.all(out.radii >= 0.0)

    @given(delta=st.sampled_from([0.1, 0.2, 0.25, 0.5]),
           seed=st.integers(0, 10 ** 5))
    @settings(max_examples=20, deadline=None)
    def test_subset_property_hypothesis(self, delta, seed):
        law = RadiusLaw.pareto(0.5, 4.0)
        cloud = sample_cloud(0.8, 5.0, law, 2, make_rng(seed))
        out, _ = discretize_radii(cloud, law, 3.0, delta)
        kept = cloud.radii <= 3.0
        assert np.all(out.radii <= cloud.radii[kept] + 1e-12)

    def test_components_can_only_split(self):
        rng = make_rng(89)
        law = RadiusLaw.uniform(0.3, 1.5)
        for _ in range(10):
            cloud = sample_cloud(0.9, 5.0, law, 2, rng)
            if len(cloud) < 2:
                continue
            out, _ = discretize_radii(cloud, law, 1.5, 0.25)
            before = components_bruteforce(cloud.x0, cloud.radii)
            after = components_bruteforce(out.x0, out.radii)
            assert after.n_components >= before.n_components

    def test_infeasible_delta_adjusted(self, rng):
        law = RadiusLaw.uniform(0.5, 2.5)
        cloud = sample_cloud(0.5, 5.0, law, 2, rng)
        out, spec = discretize_radii(cloud, law, 2.0, 0.22)
        # 0.75 span is not a multiple of 0.22; recorded delta is feasible
        assert spec.M * spec.delta == pytest.approx(1.0 - law.tail(2.0))


class TestPercolationTime:
    PARAMS = StableParams(1.9, 2)
    LAW = RadiusLaw.constant(1.0)

    def test_refuses_subcritical(self, rng):
        with pytest.raises(ValueError):
            simulate_percolation_time(0.2, self.LAW, self.PARAMS,
                                      TargetMotion.static(), 3, 10, 15.0, rng,
                                      lambda_c_interval=(0.3, 0.4))

    def test_perc_survival_dominates_detection(self):
        curves = simulate_percolation_time(
            1.5, self.LAW, self.PARAMS, TargetMotion.static(), 3, 800, 15.0,
            make_rng(90), rho=0.25)
        assert np.all(curves.perc_survival >= curves.det_survival - 1e-12)

    def test_deep_supercritical_percolation_close_to_detection(self):
        curves = simulate_percolation_time(
            2.0, self.LAW, self.PARAMS, TargetMotion.static(), 3, 800, 16.0,
            make_rng(91), rho=0.4)
        for k in range(len(curves.times)):
            gap = curves.perc_survival[k] - curves.det_survival[k]
            assert gap <= curves.perc_ci[k] + curves.det_ci[k] + 2e-3


class TestGoodBox:
    def test_overwhelming_mean_gives_fraction_one(self, rng):
        report = good_box_fraction(4.0, 2, 0.5, 400.0, 5,
                                   StableParams(1.5, 2), rng)
        assert report.good_fraction == 1.0

    def test_single_time_matches_poisson_product(self):
        # informative regime: per-mark mean 25, threshold ~23.75
        lam, V, M, xi = 1.0, 100.0, 4, 0.05
        closed = good_box_single_time_probability(lam, V, M, xi)
        rng = make_rng(92)
        params = StableParams(1.5, 2)
        hits = []
        for _ in range(400):
            rep = good_box_fraction(lam, M, xi, V, 1, params, rng, margin=8.0)
            hits.append(rep.good_fraction)
        emp = float(np.mean(hits))
        hw = 3.0 * math.sqrt(closed * (1 - closed) / len(hits))
        assert abs(emp - closed) <= hw + 0.01

    def test_fraction_in_unit_interval(self, rng):
        report = good_box_fraction(1.0, 4, 0.2, 50.0, 10,
                                   StableParams(1.5, 2), rng)
        assert 0.0 <= report.good_fraction <= 1.0
