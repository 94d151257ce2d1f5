"""Coverage times of scaled sets, bracketed by epsilon-net proxies.

Covering a continuum set cannot be checked directly, so two proxies
bracket it: detecting every net center with radii shrunk by eps is
sufficient for covering the set (upper proxy), and detecting every center
with the true radii is necessary (lower proxy).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .field import RadiusLaw, sample_cloud
from .rngtools import map_replicas
from .stable import StableParams, sample_increments, time_grid


@dataclass(frozen=True)
class TargetSet:
    """Set to be covered, with a known nominal Minkowski dimension.

    kinds: segment (unit length), cube (unit side, full dimension),
    cantor_dust(levels) (middle-thirds construction on the first axis).
    Scaling by k is about the set's centroid so that k A grows
    monotonically in k for the convex kinds.
    """

    kind: str
    dim: int
    levels: int = 0

    @staticmethod
    def segment(dim: int = 2) -> "TargetSet":
        return TargetSet("segment", dim)

    @staticmethod
    def cube(dim: int = 2) -> "TargetSet":
        return TargetSet("cube", dim)

    @staticmethod
    def cantor_dust(levels: int, dim: int = 2) -> "TargetSet":
        if levels < 1:
            raise ValueError("cantor_dust needs at least one level")
        return TargetSet("cantor_dust", dim, levels=levels)

    @property
    def nominal_dimension(self) -> float:
        if self.kind == "segment":
            return 1.0
        if self.kind == "cube":
            return float(self.dim)
        return math.log(2.0) / math.log(3.0)

    def _cantor_intervals(self, level: int) -> np.ndarray:
        """Left endpoints of the 2^level intervals of width 3^-level,
        for the middle-thirds set on [0, 1]."""
        starts = np.array([0.0])
        width = 1.0
        for _ in range(level):
            width /= 3.0
            starts = np.concatenate([starts, starts + 2.0 * width])
        return np.sort(starts)

    def net_centers(self, k: float, eps: float) -> np.ndarray:
        """Centers of eps-balls covering the set scaled by k about its
        centroid; the count is within a constant factor of optimal."""
        if eps <= 0:
            raise ValueError("eps must be positive")
        d = self.dim
        if self.kind == "segment":
            length = k
            n = max(1, int(math.ceil(length / (2.0 * eps))))
            xs = (np.arange(n) + 0.5) * (length / n) - length / 2.0
            centers = np.zeros((n, d))
            centers[:, 0] = xs
            return centers
        if self.kind == "cube":
            side = k
            spacing = 2.0 * eps / math.sqrt(d)
            n = max(1, int(math.ceil(side / spacing)))
            axis = (np.arange(n) + 0.5) * (side / n) - side / 2.0
            mesh = np.meshgrid(*([axis] * d), indexing="ij")
            return np.stack([m.ravel() for m in mesh], axis=1)
        # cantor dust: cover level-m intervals by their midpoints, with m
        # deep enough that a half interval fits in eps (capped at the
        # construction depth)
        m = 0
        while k * 3.0 ** (-m) / 2.0 > eps and m < self.levels:
            m += 1
        width = k * 3.0 ** (-m)
        starts = self._cantor_intervals(m) * k
        centers = np.zeros((len(starts), d))
        centers[:, 0] = starts + width / 2.0 - k / 2.0
        return centers

    def covering_number(self, eps: float, k: float = 1.0) -> int:
        """Size of the shipped eps-net at scale k, without materialising."""
        if eps <= 0:
            raise ValueError("eps must be positive")
        if self.kind == "segment":
            return max(1, int(math.ceil(k / (2.0 * eps))))
        if self.kind == "cube":
            spacing = 2.0 * eps / math.sqrt(self.dim)
            return max(1, int(math.ceil(k / spacing))) ** self.dim
        m = 0
        while k * 3.0 ** (-m) / 2.0 > eps and m < self.levels:
            m += 1
        return 2 ** m


def epsilon_net(target: TargetSet, k: float, eps: float) -> np.ndarray:
    """Finite centers whose eps-balls cover the set scaled by k."""
    return target.net_centers(k, eps)


@dataclass
class DimensionFit:
    estimate: float
    stderr: float
    eps_ladder: np.ndarray
    counts: np.ndarray


def minkowski_dimension_estimate(target: TargetSet, eps_ladder) -> DimensionFit:
    """Regression slope of log covering count against log(1/eps)."""
    eps = np.asarray(eps_ladder, dtype=float)
    if eps.max() / eps.min() < 99.0:
        raise ValueError("eps ladder must span at least two decades")
    counts = np.array([target.covering_number(float(e)) for e in eps])
    x = np.log(1.0 / eps)
    y = np.log(counts)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(x) - 2, 1)
    xx = x - x.mean()
    stderr = math.sqrt(float(resid @ resid) / dof / float(xx @ xx))
    return DimensionFit(estimate=float(coef[0]), stderr=stderr,
                        eps_ladder=eps, counts=counts)


@dataclass
class CoverageResult:
    """Censored samples of the coverage-time proxies at one scale."""

    k: float
    upper_samples: np.ndarray
    lower_samples: np.ndarray
    censored_upper: np.ndarray
    censored_lower: np.ndarray
    t_max: float
    eps: float
    n_centers: int

    @property
    def censor_fraction(self) -> float:
        return float(self.censored_upper.mean())

    @property
    def usable(self) -> bool:
        return self.censor_fraction <= 0.10

    def mean_ci(self, which: str = "upper") -> tuple[float, float]:
        samples = self.upper_samples if which == "upper" else self.lower_samples
        m = float(samples.mean())
        hw = 1.96 * float(samples.std(ddof=1)) / math.sqrt(len(samples))
        return m, hw


def simulate_coverage(lam: float, radius_law: RadiusLaw, params: StableParams,
                      target: TargetSet, k: float, eps: float, t_max: float,
                      step: float, n: int, rng: np.random.Generator,
                      window_halfwidth: float | None = None,
                      threads: int | None = None) -> CoverageResult:
    """Tracks first detection of every net center; the coverage proxy of a
    replica is the latest center detection (censored at t_max).

    Upper proxy: radii max(R - eps, 0). Lower proxy: true radii. Both run
    on the same replica, so upper >= lower pathwise.
    """
    if radius_law.tail(eps) <= 0:
        raise ValueError("radius law must put mass above eps, otherwise the "
                         "shrunk-radius proxy never detects")
    centers = target.net_centers(k, eps)
    d = params.dim
    half_extent = float(np.max(np.abs(centers))) + eps
    if window_halfwidth is None:
        window_halfwidth = half_extent + 6.0 * max(1.0, t_max) ** (1.0 / params.alpha) \
            + radius_law.quantile(0.99) + 4.0
    grid = time_grid(t_max, step)
    streams = rng.spawn(n)
    constant_radius = radius_law.kind == "constant"

    def one(i: int) -> tuple[float, float, bool, bool]:
        sub = streams[i]
        cloud = sample_cloud(lam, window_halfwidth, radius_law, d, sub)
        if len(cloud) == 0:
            return t_max, t_max, True, True
        pos = cloud.x0.copy()
        radii = cloud.radii
        r_up = np.maximum(radii - eps, 0.0)
        t_upper = t_max
        t_lower = t_max
        todo_up = np.arange(len(centers))
        todo_lo = np.arange(len(centers))
        cens_up = True
        cens_lo = True
        r_max = float(radii.max())
        for kdx, t in enumerate(grid):
            if kdx > 0:
                dt = float(grid[kdx] - grid[kdx - 1])
                pos += sample_increments(params, dt, len(cloud), sub)
            tree = cKDTree(pos)
            if constant_radius:
                if len(todo_lo):
                    dist, _ = tree.query(centers[todo_lo], k=1,
                                         distance_upper_bound=radii[0] + 1e-12)
                    todo_lo = todo_lo[~np.isfinite(dist)]
                    if len(todo_lo) == 0:
                        t_lower, cens_lo = t, False
                if len(todo_up):
                    if r_up[0] <= 0:
                        pass
                    else:
                        dist, _ = tree.query(centers[todo_up], k=1,
                                             distance_upper_bound=r_up[0] + 1e-12)
                        todo_up = todo_up[~np.isfinite(dist)]
                        if len(todo_up) == 0:
                            t_upper, cens_up = t, False
            else:
                for which in ("lo", "up"):
                    todo = todo_lo if which == "lo" else todo_up
                    if len(todo) == 0:
                        continue
                    rr = radii if which == "lo" else r_up
                    groups = tree.query_ball_point(centers[todo], r_max + 1e-12)
                    hit = np.zeros(len(todo), dtype=bool)
                    for j, members in enumerate(groups):
                        if not members:
                            continue
                        rel = centers[todo[j]] - pos[members]
                        hit[j] = bool(np.any((rel ** 2).sum(axis=1)
                                             <= rr[members] ** 2))
                    if which == "lo":
                        todo_lo = todo[~hit]
                        if len(todo_lo) == 0:
                            t_lower, cens_lo = t, False
                    else:
                        todo_up = todo[~hit]
                        if len(todo_up) == 0:
                            t_upper, cens_up = t, False
            if not cens_up and not cens_lo:
                break
        return t_upper, t_lower, cens_up, cens_lo

    rows = map_replicas(one, n, threads)
    upper = np.array([r[0] for r in rows])
    lower = np.array([r[1] for r in rows])
    c_up = np.array([r[2] for r in rows])
    c_lo = np.array([r[3] for r in rows])
    return CoverageResult(k=k, upper_samples=upper, lower_samples=lower,
                          censored_upper=c_up, censored_lower=c_lo,
                          t_max=t_max, eps=eps, n_centers=len(centers))


@dataclass
class CoverageSlope:
    ks: np.ndarray
    ratios_upper: np.ndarray
    ratios_lower: np.ndarray
    ratio_cis: np.ndarray
    slope: float
    slope_stderr: float
    reference: float | None


def coverage_slope(results: list[CoverageResult],
                   reference: float | None = None) -> CoverageSlope:
    """Per-scale ratios mean T_cov / log k and the regression slope of the
    mean against log k over the ladder."""
    if len(results) < 4:
        raise ValueError("need at least 4 ladder points")
    ks = np.array([r.k for r in results])
    order = np.argsort(ks)
    ks = ks[order]
    results = [results[i] for i in order]
    means_u = np.array([r.mean_ci("upper")[0] for r in results])
    means_l = np.array([r.mean_ci("lower")[0] for r in results])
    cis = np.array([r.mean_ci("upper")[1] for r in results])
    logk = np.log(ks)
    ratios_u = means_u / logk
    ratios_l = means_l / logk
    A = np.vstack([logk, np.ones_like(logk)]).T
    coef, *_ = np.linalg.lstsq(A, means_u, rcond=None)
    resid = means_u - A @ coef
    dof = max(len(ks) - 2, 1)
    xx = logk - logk.mean()
    stderr = math.sqrt(float(resid @ resid) / dof / float(xx @ xx))
    return CoverageSlope(ks=ks, ratios_upper=ratios_u, ratios_lower=ratios_l,
                         ratio_cis=cis / logk, slope=float(coef[0]),
                         slope_stderr=stderr, reference=reference)
