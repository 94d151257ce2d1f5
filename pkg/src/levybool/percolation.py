"""Continuum-percolation machinery: component labeling of Boolean-model
snapshots, giant-component statistics, critical-intensity bracketing,
radius discretisation onto a finite mark partition, percolation-time
survival curves, and the marked good-box count statistic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse, stats
from scipy.sparse import csgraph

from .field import MarkedCloud, RadiusLaw, sample_cloud
from .motion import TargetMotion
from .rngtools import map_replicas
from .stable import StableParams, sample_increments


# ---------------------------------------------------------------------------
# Component labeling
# ---------------------------------------------------------------------------

@dataclass
class ComponentLabeling:
    """Particle -> component map with sizes; labels are 0..n_components-1."""

    labels: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        if len(self.labels) and int(self.sizes.sum()) != len(self.labels):
            raise ValueError("component sizes must partition the particles")

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    @property
    def largest(self) -> int:
        return int(np.argmax(self.sizes)) if len(self.sizes) else -1

    def partition_key(self) -> frozenset:
        """Canonical partition (for equality tests against other labelings)."""
        groups: dict[int, list[int]] = {}
        for i, lab in enumerate(self.labels):
            groups.setdefault(int(lab), []).append(i)
        return frozenset(frozenset(g) for g in groups.values())


def _candidate_pairs(positions: np.ndarray, radii: np.ndarray) -> tuple:
    """Index pairs within the maximal adjacency reach 2 max(R), found by a
    spatial partition; the exact per-pair test happens in the caller."""
    from scipy.spatial import cKDTree
    reach = 2.0 * float(radii.max())
    if reach <= 0:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    pairs = cKDTree(positions).query_pairs(reach, output_type="ndarray")
    return pairs[:, 0], pairs[:, 1]


def components(positions, radii) -> ComponentLabeling:
    """Connected components of the Boolean model: particles i, j are
    adjacent when |x_i - x_j| <= R_i + R_j. Candidate pairs come from a
    spatial partition sized to the largest radius; adjacency is tested
    exactly on the candidates."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    radii = np.asarray(radii, dtype=float)
    n = len(radii)
    if n == 0:
        return ComponentLabeling(labels=np.empty(0, dtype=int),
                                 sizes=np.empty(0, dtype=int))
    rows, cols = _candidate_pairs(positions, radii)
    if len(rows):
        diff = positions[rows] - positions[cols]
        touch = (diff ** 2).sum(axis=1) <= (radii[rows] + radii[cols]) ** 2
        rows, cols = rows[touch], cols[touch]
    graph = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, labels = csgraph.connected_components(graph, directed=False)
    sizes = np.bincount(labels, minlength=n_comp)
    return ComponentLabeling(labels=labels, sizes=sizes)


class UnionFind:
    """Small array union-find, used as the independent brute-force oracle."""

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def components_bruteforce(positions, radii) -> ComponentLabeling:
    """All-pairs union-find; quadratic, for cross-checking only."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    radii = np.asarray(radii, dtype=float)
    n = len(radii)
    uf = UnionFind(n)
    for i in range(n):
        for j in range(i + 1, n):
            gap2 = float(((positions[i] - positions[j]) ** 2).sum())
            if gap2 <= (radii[i] + radii[j]) ** 2:
                uf.union(i, j)
    roots = np.array([uf.find(i) for i in range(n)])
    _, labels = np.unique(roots, return_inverse=True)
    sizes = np.bincount(labels)
    return ComponentLabeling(labels=labels, sizes=sizes)


# ---------------------------------------------------------------------------
# Giant component and critical intensity
# ---------------------------------------------------------------------------

@dataclass
class GiantFraction:
    theta: float
    half_width: float
    n: int


def giant_fraction(lam: float, radius_law: RadiusLaw, window_halfwidth: float,
                   dim: int, n: int, rng: np.random.Generator,
                   threads: int | None = None) -> GiantFraction:
    """Mean fraction of particles in the largest component of a snapshot;
    finite-window stand-in for the probability of joining the unbounded
    component."""
    streams = rng.spawn(n)

    def one(i: int) -> float:
        cloud = sample_cloud(lam, window_halfwidth, radius_law, dim, streams[i])
        if len(cloud) == 0:
            return 0.0
        lab = components(cloud.x0, cloud.radii)
        return float(lab.sizes[lab.largest] / len(cloud))

    vals = np.array(map_replicas(one, n, threads))
    return GiantFraction(theta=float(vals.mean()),
                         half_width=1.96 * float(vals.std(ddof=1)) / math.sqrt(n),
                         n=n)


def crossing_probability(lam: float, radius_law: RadiusLaw,
                         window_halfwidth: float, dim: int, n: int,
                         rng: np.random.Generator,
                         threads: int | None = None) -> tuple[float, float]:
    """P(some component of the Boolean model joins the left and right faces
    of the window box)."""
    if dim < 2:
        raise ValueError("crossing is defined for dim >= 2")
    w = window_halfwidth
    streams = rng.spawn(n)

    def one(i: int) -> float:
        cloud = sample_cloud(lam, w, radius_law, dim, streams[i])
        m = len(cloud)
        if m == 0:
            return 0.0
        lab = components(cloud.x0, cloud.radii)
        left = cloud.x0[:, 0] - cloud.radii <= -w
        right = cloud.x0[:, 0] + cloud.radii >= w
        if not left.any() or not right.any():
            return 0.0
        return float(bool(np.intersect1d(lab.labels[left],
                                         lab.labels[right]).size))

    vals = np.array(map_replicas(one, n, threads))
    p = float(vals.mean())
    return p, 1.96 * math.sqrt(max(p * (1 - p), 1.0 / n) / n)


def estimate_lambda_c(radius_law: RadiusLaw, window_halfwidth: float, dim: int,
                      rng: np.random.Generator, tolerance: float = 0.05,
                      n: int = 200, lam_hi: float = 4.0,
                      threads: int | None = None) -> tuple[float, float]:
    """Bracketing interval for the critical intensity by bisecting the
    box-crossing probability around 1/2."""
    if dim < 2:
        raise ValueError("percolation needs dim >= 2")
    lam_lo = 0.0
    p_hi, _ = crossing_probability(lam_hi, radius_law, window_halfwidth, dim,
                                   n, rng, threads)
    for _ in range(8):
        if p_hi >= 0.5:
            break
        lam_hi *= 2.0
        p_hi, _ = crossing_probability(lam_hi, radius_law, window_halfwidth,
                                       dim, n, rng, threads)
    else:
        raise RuntimeError("no supercritical intensity found")
    while lam_hi - lam_lo > tolerance:
        mid = 0.5 * (lam_lo + lam_hi)
        p, hw = crossing_probability(mid, radius_law, window_halfwidth, dim,
                                     n, rng, threads)
        if p >= 0.5:
            lam_hi = mid
        else:
            lam_lo = mid
    return lam_lo, lam_hi


# ---------------------------------------------------------------------------
# Radius discretisation onto a finite mark partition
# ---------------------------------------------------------------------------

@dataclass
class DiscretisationSpec:
    """Radius truncation at N and mark-partition width delta, giving M
    equiprobable radius classes. Rounding is downward in radius, so the
    discretised model is a subset of the original."""

    N: float
    delta: float
    M: int
    values: tuple = ()

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("partition must contain at least one mark")


def discretize_radii(cloud: MarkedCloud, radius_law: RadiusLaw, N: float,
                     delta: float) -> tuple[MarkedCloud, DiscretisationSpec]:
    """Removes radii above N and rounds the rest down onto the value grid
    induced by a width-delta partition of the mark space.

    Marks are tail probabilities u = P(R > r); partition points run from
    P(R > N) to 1 in steps of delta (delta is adjusted to the nearest
    feasible width when the range is not an integer multiple). A radius
    with mark in (p_j, p_{j+1}] becomes the value at p_{j+1}, which can
    only shrink it.
    """
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    tail_n = radius_law.tail(N)
    span = 1.0 - tail_n
    m = max(1, round(span / delta))
    eff_delta = span / m
    partition = tail_n + eff_delta * np.arange(1, m + 1)
    values = np.array([_tail_inverse(radius_law, p) for p in partition])
    keep = cloud.radii <= N
    kept_r = cloud.radii[keep]
    u = np.array([radius_law.tail(r) for r in kept_r])
    j = np.clip(np.ceil((u - tail_n) / eff_delta - 1e-12).astype(int), 1, m)
    new_r = values[j - 1]
    new_r = np.minimum(new_r, kept_r)
    new_cloud = MarkedCloud(ids=cloud.ids[keep], x0=cloud.x0[keep],
                            radii=new_r, lam=cloud.lam,
                            window_halfwidth=cloud.window_halfwidth)
    spec = DiscretisationSpec(N=N, delta=eff_delta, M=m,
                              values=tuple(np.unique(values)))
    return new_cloud, spec


def _tail_inverse(radius_law: RadiusLaw, p: float) -> float:
    """Generalised inverse of the tail: largest r with P(R > r) >= p,
    i.e. the (1-p)-quantile from the left."""
    if p >= 1.0:
        return radius_law.quantile(0.0)
    return radius_law.quantile(1.0 - p)


# ---------------------------------------------------------------------------
# Percolation time
# ---------------------------------------------------------------------------

@dataclass
class PercolationCurves:
    """Survival curves of the percolation and detection times at integer
    checking times, from the same replicas (event inclusion makes the
    percolation curve dominate pointwise)."""

    times: np.ndarray
    perc_survival: np.ndarray
    perc_ci: np.ndarray
    det_survival: np.ndarray
    det_ci: np.ndarray
    n: int
    rho: float
    meta: dict = field(default_factory=dict)


def simulate_percolation_time(lam: float, radius_law: RadiusLaw,
                              params: StableParams, g: TargetMotion,
                              horizon: float, n: int, window_halfwidth: float,
                              rng: np.random.Generator,
                              rho: float | None = None,
                              lambda_c_interval: tuple[float, float] | None = None,
                              theta: float | None = None,
                              check_dt: float = 1.0,
                              threads: int | None = None) -> PercolationCurves:
    """First checking time the target touches a ball of the window's
    largest component, requiring that component to carry at least a
    rho mass fraction.

    Checking happens at integer times by default; check_dt < 1 refines the
    grid for sensitivity analysis (deep supercritical intensities decohere
    almost completely between integer times, which starves the integer
    curve at practical replica counts). Refuses intensities that are not
    above the estimated critical interval.
    """
    if lambda_c_interval is not None and lam <= lambda_c_interval[1]:
        raise ValueError(
            f"intensity {lam} is not above the critical interval "
            f"{lambda_c_interval}; percolation time is degenerate")
    if check_dt <= 0:
        raise ValueError("check_dt must be positive")
    if rho is None:
        if theta is None:
            est = giant_fraction(lam, radius_law, window_halfwidth,
                                 params.dim, 60, rng, threads)
            theta = est.theta
        rho = theta / 2.0
    times = np.arange(0.0, float(horizon) + check_dt / 2, check_dt)
    streams = rng.spawn(n)

    def one(i: int) -> tuple[int, int]:
        sub = streams[i]
        cloud = sample_cloud(lam, window_halfwidth, radius_law, params.dim, sub)
        m = len(cloud)
        det_idx = len(times)
        perc_idx = len(times)
        if m == 0:
            return perc_idx, det_idx
        pos = cloud.x0.copy()
        radii = cloud.radii
        g_path = g.path_on_grid(times, params=params, rng=sub)
        for k, t in enumerate(times):
            if k > 0:
                pos += sample_increments(params, check_dt, m, sub)
            rel = pos - g_path[k]
            touching = (rel ** 2).sum(axis=1) <= radii ** 2
            if not touching.any():
                continue
            if det_idx == len(times):
                det_idx = k
            lab = components(pos, radii)
            big = lab.largest
            if lab.sizes[big] >= rho * m and \
                    bool(np.any(lab.labels[touching] == big)):
                perc_idx = k
                break
        return perc_idx, det_idx

    rows = map_replicas(one, n, threads)
    perc_idx = np.array([r[0] for r in rows])
    det_idx = np.array([r[1] for r in rows])

    def curve(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        detected_at = np.bincount(idx[idx < len(times)], minlength=len(times))
        surv = (n - np.cumsum(detected_at)) / n
        var = np.maximum(surv * (1 - surv), 1.0 / n)
        return surv, 1.96 * np.sqrt(var / n)

    ps, pc = curve(perc_idx)
    ds, dc = curve(det_idx)
    # detection is a necessary condition of percolation detection, so
    # domination holds replica-wise on the shared randomness
    return PercolationCurves(times=times, perc_survival=ps,
                             perc_ci=pc, det_survival=ds, det_ci=dc, n=n,
                             rho=rho,
                             meta={"window_halfwidth": window_halfwidth,
                                   "lambda": lam, "target": g.kind,
                                   "check_dt": check_dt})


# ---------------------------------------------------------------------------
# Good boxes for a marked cloud
# ---------------------------------------------------------------------------

@dataclass
class GoodBoxReport:
    """Fraction of integer times at which every mark's count in the box

    meets the (1 - xi) lambda V / M floor. This count criterion is the
    necessary half of box goodness; the coupling half is not measured.
    """

    V: float
    xi: float
    M: int
    t: int
    good_fraction: float
    per_time_flags: np.ndarray
    threshold: float

    def __post_init__(self):
        if not (0.0 <= self.good_fraction <= 1.0):
            raise ValueError("fraction must lie in [0, 1]")


def good_box_single_time_probability(lam: float, V: float, M: int,
                                     xi: float) -> float:
    """Closed-form P(all M mark counts >= (1-xi) lam V / M) for one
    stationary snapshot: marks are independent Poisson(lam V / M)."""
    mean = lam * V / M
    threshold = (1.0 - xi) * mean
    k_min = math.ceil(threshold - 1e-12)
    p_one = float(stats.poisson.sf(k_min - 1, mean))
    return p_one ** M


def good_box_fraction(lam: float, M: int, xi: float, V: float, t: int,
                      params: StableParams, rng: np.random.Generator,
                      margin: float | None = None) -> GoodBoxReport:
    """Evolves an M-marked cloud and counts, at each integer time 1..t,
    the per-mark points inside the volume-V box.

    The simulation window pads the box by a margin so in-flow from outside
    is nearly stationary; the margin defaults to a displacement quantile
    over the horizon.
    """
    if t < 1 or int(t) != t:
        raise ValueError("need an integer t >= 1")
    side = V ** (1.0 / params.dim)
    if margin is None:
        # pad so the in-flow deficit of the box counts at the last time is
        # under ~2.5% of the per-mark mean: P(|X_t| > margin) <= 0.025
        from .stable import tail_mass
        lo, hi = 1.0, 1e9
        for _ in range(60):
            mid = math.sqrt(lo * hi)
            if tail_mass(params, float(t), mid) > 0.025:
                lo = mid
            else:
                hi = mid
        margin = hi + 0.05 * side
    w = side / 2.0 + margin
    # radii play no role in the count statistic
    cloud = sample_cloud(lam, w, RadiusLaw.constant(1.0), params.dim, rng)
    marks = rng.integers(0, M, size=len(cloud))
    pos = cloud.x0.copy()
    half = side / 2.0
    threshold = (1.0 - xi) * lam * V / M
    flags = np.zeros(int(t), dtype=bool)
    for i in range(1, int(t) + 1):
        pos += sample_increments(params, 1.0, len(cloud), rng)
        inside = np.all(np.abs(pos) <= half, axis=1)
        counts = np.bincount(marks[inside], minlength=M)
        flags[i - 1] = bool(np.all(counts >= threshold))
    return GoodBoxReport(V=V, xi=xi, M=M, t=int(t),
                         good_fraction=float(flags.mean()),
                         per_time_flags=flags, threshold=threshold)
