"""Volumes of ball-unions around trajectories, Minkowski sums with compact
sets, and the capacity constant governing the linear volume growth.

Two estimators are available and must agree: deterministic grid occupancy
(cells count when their center lies in the set) and hit-or-miss sampling
in the bounding box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .motion import TargetMotion
from .stable import PathSkeleton, StableParams, sample_skeleton

_MAX_DENSE_CELLS = 1 << 27
_PACK_BITS = 21
_PACK_OFF = 1 << (_PACK_BITS - 1)


def capacity_constant(alpha: float, d: int) -> float:
    """Gamma-product normalization constant
    2^alpha pi^(d/2) Gamma(alpha/2) / Gamma((d - alpha)/2); needs d > alpha.

    This is the reciprocal of the Green-function constant of the motion
    (G(x) = |x|^(alpha-d) / capacity_constant). For alpha = 2 it equals
    the equilibrium capacity of the unit ball and hence the long-run
    sausage volume rate; for alpha < 2 the true ball capacity carries an
    extra factor, see ball_capacity.
    """
    if not (0 < alpha <= 2):
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    if d <= alpha:
        raise ValueError(f"capacity constant needs d > alpha, got d={d}, alpha={alpha}")
    return (2.0 ** alpha * math.pi ** (d / 2.0)
            * math.gamma(alpha / 2.0) / math.gamma((d - alpha) / 2.0))


def ball_capacity(alpha: float, d: int) -> float:
    """Equilibrium capacity of the closed unit ball,
    2^alpha pi^(d/2) Gamma(d/2) / (Gamma((d-alpha)/2) Gamma((d-alpha)/2 + 1)).

    This is the t -> infinity limit of E|B_1(path up to t)| / t: writing
    G(x) = |x|^(alpha-d)/capacity_constant for the Green function, the
    probability of ever hitting the unit ball from x is asymptotically
    ball_capacity * G(x), and equals the regularized incomplete beta
    I_{1/|x|^2}((d-alpha)/2, alpha/2) exactly (checked by simulation in
    the test suite). Coincides with capacity_constant when alpha = 2;
    for alpha < 2 it is strictly smaller. The capacity of B_r scales as
    r^(d-alpha) times this value.
    """
    if not (0 < alpha <= 2):
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    if d <= alpha:
        raise ValueError(f"ball capacity needs d > alpha, got d={d}, alpha={alpha}")
    return (2.0 ** alpha * math.pi ** (d / 2.0) * math.gamma(d / 2.0)
            / (math.gamma((d - alpha) / 2.0) * math.gamma((d - alpha) / 2.0 + 1.0)))


def ball_volume(r: float, d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0) * r ** d


# ---------------------------------------------------------------------------
# Compact sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompactSet:
    """Finite point list, a ball, or an axis-aligned box."""

    kind: str
    data: tuple

    @staticmethod
    def origin(dim: int) -> "CompactSet":
        return CompactSet("points", (((0.0,) * dim),))

    @staticmethod
    def point_set(points) -> "CompactSet":
        arr = np.atleast_2d(np.asarray(points, dtype=float))
        return CompactSet("points", tuple(tuple(p) for p in arr))

    @staticmethod
    def ball(center, radius: float) -> "CompactSet":
        if radius < 0:
            raise ValueError("ball radius must be nonnegative")
        return CompactSet("ball", (tuple(np.asarray(center, dtype=float)), float(radius)))

    @staticmethod
    def box(corner_lo, corner_hi) -> "CompactSet":
        lo = np.asarray(corner_lo, dtype=float)
        hi = np.asarray(corner_hi, dtype=float)
        if np.any(hi < lo):
            raise ValueError("box corners must satisfy lo <= hi")
        return CompactSet("box", (tuple(lo), tuple(hi)))

    @property
    def reach(self) -> float:
        """Radius of a ball around o containing the set."""
        if self.kind == "points":
            return float(max(np.linalg.norm(p) for p in self.data))
        if self.kind == "ball":
            center, radius = self.data
            return float(np.linalg.norm(center) + radius)
        lo, hi = (np.asarray(c) for c in self.data)
        return float(max(np.linalg.norm(lo), np.linalg.norm(hi)))


# ---------------------------------------------------------------------------
# Grid occupancy
# ---------------------------------------------------------------------------

def _pack_keys(idx: np.ndarray) -> np.ndarray:
    """Pack small integer cell indices into int64 keys."""
    d = idx.shape[1]
    if np.any(np.abs(idx) >= _PACK_OFF):
        raise OverflowError("cell index out of packing range; enlarge cells")
    keys = idx[:, 0].astype(np.int64) + _PACK_OFF
    for a in range(1, d):
        keys = (keys << _PACK_BITS) | (idx[:, a].astype(np.int64) + _PACK_OFF)
    return keys


class OccupancyCounter:
    """Incrementally marks cells and reports the running count.

    Uses a dense bitmap when the bounding box is small enough, otherwise a
    hash set of packed indices; both give identical counts. Cells are
    addressed through opaque integer codes so markers can translate a
    stencil offset once and reuse it for every point.
    """

    def __init__(self, cell: float, dim: int, bbox_lo=None, bbox_hi=None):
        self.cell = cell
        self.dim = dim
        self._dense = None
        self._count = 0
        self._dirty = False
        self._set: set | None = None
        if bbox_lo is not None and bbox_hi is not None:
            lo_idx = np.floor(np.asarray(bbox_lo) / cell).astype(np.int64) - 2
            hi_idx = np.ceil(np.asarray(bbox_hi) / cell).astype(np.int64) + 2
            shape = hi_idx - lo_idx + 1
            if np.prod(shape.astype(float)) <= _MAX_DENSE_CELLS:
                self._dense = np.zeros(int(np.prod(shape)), dtype=bool)
                self._lo_idx = lo_idx
                self._shape = shape
                self._strides = np.cumprod(
                    np.concatenate([[1], shape[::-1][:-1]]))[::-1].astype(np.int64)
        if self._dense is None:
            self._set = set()

    def encode(self, idx: np.ndarray) -> np.ndarray:
        """Integer codes of cells given by index rows."""
        if self._dense is not None:
            return ((idx - self._lo_idx) * self._strides).sum(axis=1)
        return _pack_keys(idx)

    def encode_offsets(self, offsets: np.ndarray) -> np.ndarray:
        """Code deltas corresponding to index offsets."""
        if self._dense is not None:
            return (offsets * self._strides).sum(axis=1)
        deltas = offsets[:, 0].astype(np.int64)
        for a in range(1, offsets.shape[1]):
            deltas = (deltas << _PACK_BITS) + offsets[:, a].astype(np.int64)
        return deltas

    def add_codes(self, codes: np.ndarray) -> None:
        """Mark cells by code (duplicates are fine)."""
        if len(codes) == 0:
            return
        if self._dense is not None:
            self._dense[codes] = True
            self._dirty = True
        else:
            self._set.update(np.unique(codes).tolist())

    def add_cells(self, idx: np.ndarray) -> None:
        if len(idx):
            self.add_codes(self.encode(idx))

    @property
    def count(self) -> int:
        if self._dense is not None:
            if self._dirty:
                self._count = int(np.count_nonzero(self._dense))
                self._dirty = False
            return self._count
        return len(self._set)

    @property
    def volume(self) -> float:
        return self.count * self.cell ** self.dim

    def surface_cell_count(self) -> int:
        """Occupied cells with at least one unoccupied axis neighbor."""
        if self._dense is not None:
            grid = self._dense.reshape(tuple(self._shape))
            occ = grid
            surface = np.zeros_like(occ)
            for a in range(self.dim):
                pad_shape = list(occ.shape)
                pad_shape[a] = 1
                pad = np.zeros(pad_shape, dtype=bool)
                fwd = np.concatenate([occ[(slice(None),) * a + (slice(1, None),)],
                                      pad], axis=a)
                back = np.concatenate([pad,
                                       occ[(slice(None),) * a + (slice(0, -1),)]],
                                      axis=a)
                surface |= occ & (~fwd | ~back)
            return int(np.count_nonzero(surface))
        keys = np.fromiter(self._set, dtype=np.int64, count=len(self._set))
        if len(keys) == 0:
            return 0
        strides = [np.int64(1) << (_PACK_BITS * (self.dim - 1 - a))
                   for a in range(self.dim)]
        surface = np.zeros(len(keys), dtype=bool)
        for s in strides:
            for sign in (1, -1):
                shifted = keys + sign * s
                member = np.fromiter((int(k) in self._set for k in shifted),
                                     dtype=bool, count=len(keys))
                surface |= ~member
        return int(np.count_nonzero(surface))


class _BallMarker:
    """Marks all cells whose center lies within r of given points.

    The stencil around a point's own cell is split into a core that is
    always inside (pure code arithmetic, no distance test) and a boundary
    ring that is tested with one small matrix product per chunk.
    """

    def __init__(self, counter: OccupancyCounter, r: float):
        self.counter = counter
        self.r = r
        cell, dim = counter.cell, counter.dim
        self.cell, self.dim = cell, dim
        k = int(math.ceil(r / cell)) + 1
        ranges = [np.arange(-k, k + 1)] * dim
        mesh = np.meshgrid(*ranges, indexing="ij")
        offsets = np.stack([m.ravel() for m in mesh], axis=1)
        norms = np.linalg.norm(offsets, axis=1) * cell
        half_diag = cell * math.sqrt(dim) / 2.0
        keep = norms - half_diag <= r
        offsets = offsets[keep]
        norms = norms[keep]
        always = norms + half_diag <= r
        self._core = offsets[always]
        self._ring = offsets[~always]
        self._core_codes = counter.encode_offsets(self._core) \
            if len(self._core) else np.empty(0, dtype=np.int64)
        self._ring_codes = counter.encode_offsets(self._ring) \
            if len(self._ring) else np.empty(0, dtype=np.int64)
        self._ring_f = self._ring.astype(float) * cell
        self._ring_norm2 = (self._ring_f ** 2).sum(axis=1)

    def mark(self, points: np.ndarray, chunk: int = 1024) -> None:
        cell = self.cell
        for start in range(0, len(points), chunk):
            p = points[start:start + chunk]
            base = np.floor(p / cell).astype(np.int64)
            base_codes = self.counter.encode(base)
            if len(self._core_codes):
                core = (base_codes[:, None] + self._core_codes[None, :]).ravel()
                self.counter.add_codes(core)
            if len(self._ring_codes):
                frac = p - (base + 0.5) * cell
                # |off*cell - frac|^2 = |off*cell|^2 - 2 off.frac + |frac|^2
                cross = frac @ self._ring_f.T
                dist2 = (self._ring_norm2[None, :] - 2.0 * cross
                         + (frac ** 2).sum(axis=1)[:, None])
                rows, cols = np.nonzero(dist2 <= self.r * self.r)
                if len(rows):
                    self.counter.add_codes(base_codes[rows]
                                           + self._ring_codes[cols])


class _BoxMarker:
    """Marks cells whose center lies within r of point + box (Minkowski
    dilation of an axis-aligned box by an r-ball). Slower generic path."""

    def __init__(self, counter: OccupancyCounter, r: float, box: tuple):
        self.counter = counter
        self.r = r
        self.lo, self.hi = (np.asarray(c, dtype=float) for c in box)
        cell, dim = counter.cell, counter.dim
        self.cell, self.dim = cell, dim
        ranges = []
        for a in range(dim):
            k_lo = int(math.floor((self.lo[a] - r) / cell)) - 1
            k_hi = int(math.ceil((self.hi[a] + r) / cell)) + 1
            ranges.append(np.arange(k_lo, k_hi + 1))
        mesh = np.meshgrid(*ranges, indexing="ij")
        self._offsets = np.stack([m.ravel() for m in mesh], axis=1)
        self._off_codes = counter.encode_offsets(self._offsets)
        self._off_f = self._offsets.astype(float) * cell

    def mark(self, points: np.ndarray, chunk: int = 256) -> None:
        cell = self.cell
        for start in range(0, len(points), chunk):
            p = points[start:start + chunk]
            base = np.floor(p / cell).astype(np.int64)
            base_codes = self.counter.encode(base)
            frac = p - (base + 0.5) * cell
            rel = self._off_f[None, :, :] - frac[:, None, :]
            rel = rel - np.clip(rel, self.lo, self.hi)
            mask = (rel ** 2).sum(axis=2) <= self.r * self.r
            rows, cols = np.nonzero(mask)
            if len(rows):
                self.counter.add_codes(base_codes[rows] + self._off_codes[cols])


@dataclass
class VolumeEstimate:
    """Volume with a 95%-style uncertainty half-width.

    grid-occupancy: half_width is the deterministic surface-cell tolerance
    (cell diagonal times surface measure), not a statistical CI.
    """

    value: float
    half_width: float
    method: str
    resolution: float


def _occupancy_volume(points: np.ndarray, r: float, cell: float,
                      box: tuple | None = None,
                      report_tolerance: bool = True) -> VolumeEstimate:
    dim = points.shape[1]
    reach = r + (0.0 if box is None else float(np.max(np.abs(box))))
    lo = points.min(axis=0) - reach - cell
    hi = points.max(axis=0) + reach + cell
    counter = OccupancyCounter(cell, dim, lo, hi)
    marker = _BallMarker(counter, r) if box is None \
        else _BoxMarker(counter, r, box)
    marker.mark(points)
    tol = 0.0
    if report_tolerance:
        tol = counter.surface_cell_count() * cell ** dim * math.sqrt(dim)
    return VolumeEstimate(value=counter.volume, half_width=tol,
                          method="grid-occupancy", resolution=cell)


def ball_union_volume(points, r: float, cell: float | None = None,
                      report_tolerance: bool = True) -> VolumeEstimate:
    """Grid-occupancy volume of the union of r-balls around finite points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0:
        return VolumeEstimate(0.0, 0.0, "grid-occupancy", 0.0)
    cell = r / 8.0 if cell is None else cell
    return _occupancy_volume(pts, r, cell, report_tolerance=report_tolerance)


def _hit_or_miss_volume(points: np.ndarray, r: float, K: CompactSet | None,
                        rng: np.random.Generator, rel_ci: float = 0.01,
                        n_max: int = 2_000_000) -> VolumeEstimate:
    dim = points.shape[1]
    reach = r + (0.0 if K is None else K.reach)
    lo = points.min(axis=0) - reach
    hi = points.max(axis=0) + reach
    box_vol = float(np.prod(hi - lo))
    tree = cKDTree(points)

    if K is None or (K.kind == "points" and len(K.data) == 1
                     and not any(K.data[0])):
        radius, shift, box = r, None, None
    elif K.kind == "ball":
        center, rho = K.data
        radius, shift, box = r + rho, np.asarray(center), None
    elif K.kind == "points":
        radius, shift, box = r, None, None
        pts = points[None, :, :] + np.asarray(K.data)[:, None, :]
        tree = cKDTree(pts.reshape(-1, dim))
    else:
        lo_k, hi_k = (np.asarray(c) for c in K.data)
        radius, shift, box = r, None, (lo_k, hi_k)

    def hits(sample: np.ndarray) -> np.ndarray:
        q = sample if shift is None else sample - shift
        if box is None:
            dist, _ = tree.query(q, k=1, distance_upper_bound=radius)
            return np.isfinite(dist)
        box_reach = np.linalg.norm(np.maximum(np.abs(box[0]), np.abs(box[1])))
        groups = tree.query_ball_point(q, r + box_reach)
        out = np.zeros(len(q), dtype=bool)
        for i, member in enumerate(groups):
            if not member:
                continue
            rel = q[i] - tree.data[member]
            rel = rel - np.clip(rel, box[0], box[1])
            out[i] = bool(np.any((rel ** 2).sum(axis=1) <= r * r))
        return out

    n_pilot = 4000
    sample = rng.uniform(lo, hi, size=(n_pilot, dim))
    p = float(hits(sample).mean())
    n_total = n_pilot
    if 0 < p < 1:
        n_needed = int(min(n_max, 1.96 ** 2 * (1 - p) / (p * rel_ci ** 2)))
        while n_total < n_needed:
            m = min(200_000, n_needed - n_total)
            sample = rng.uniform(lo, hi, size=(m, dim))
            p = (p * n_total + float(hits(sample).sum())) / (n_total + m)
            n_total += m
    hw = 1.96 * math.sqrt(max(p * (1 - p), 1.0 / n_total) / n_total) * box_vol
    return VolumeEstimate(value=p * box_vol, half_width=hw,
                          method="hit-or-miss", resolution=float(n_total))


def sausage_volume(skeleton: PathSkeleton, r: float, method: str = "grid-occupancy",
                   cell: float | None = None, rng: np.random.Generator | None = None,
                   report_tolerance: bool = True) -> VolumeEstimate:
    """Volume of the union of r-balls around the skeleton points."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if method in ("grid", "grid-occupancy"):
        return ball_union_volume(skeleton.positions, r, cell=cell,
                                 report_tolerance=report_tolerance)
    if method == "hit-or-miss":
        if rng is None:
            raise ValueError("hit-or-miss needs an rng")
        if r == 0:
            return VolumeEstimate(0.0, 0.0, "hit-or-miss", 0.0)
        return _hit_or_miss_volume(skeleton.positions, r, None, rng)
    raise ValueError(f"unknown method {method!r}")


def minkowski_sum_volume(skeleton: PathSkeleton, r: float, K: CompactSet,
                         cell: float | None = None,
                         method: str = "grid-occupancy",
                         rng: np.random.Generator | None = None,
                         report_tolerance: bool = True) -> VolumeEstimate:
    """Volume of B_r(skeleton) + K."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    pts = skeleton.positions
    if method == "hit-or-miss":
        if rng is None:
            raise ValueError("hit-or-miss needs an rng")
        return _hit_or_miss_volume(pts, r, K, rng)
    if K.kind == "points":
        expanded = (pts[None, :, :] + np.asarray(K.data)[:, None, :]).reshape(
            -1, pts.shape[1])
        return ball_union_volume(expanded, r, cell=cell,
                                 report_tolerance=report_tolerance)
    if K.kind == "ball":
        center, rho = K.data
        shifted = pts + np.asarray(center)
        return ball_union_volume(shifted, r + rho, cell=cell,
                                 report_tolerance=report_tolerance)
    lo, hi = (np.asarray(c) for c in K.data)
    eff_cell = (r if r > 0 else max(float(np.max(hi - lo)), 1.0)) / 8.0 \
        if cell is None else cell
    return _occupancy_volume(pts, r, eff_cell, box=(lo, hi),
                             report_tolerance=report_tolerance)


# ---------------------------------------------------------------------------
# Cumulative volumes along a path and the expected growth rate
# ---------------------------------------------------------------------------

def cumulative_minkowski_volume(positions: np.ndarray, r: float,
                                checkpoint_idx: np.ndarray,
                                K: CompactSet | None = None,
                                cell: float | None = None) -> np.ndarray:
    """Volume of B_r(positions[:k+1]) + K for each checkpoint index k,
    in one incremental occupancy pass."""
    if K is not None and K.kind == "ball":
        center, rho = K.data
        positions = positions + np.asarray(center)
        r = r + rho
        K = None
    expand = None
    if K is not None and K.kind == "points":
        offsets = np.asarray(K.data)
        if offsets.shape == (1, positions.shape[1]) and not offsets.any():
            K = None
        else:
            expand = offsets
    box = None
    reach = r
    if K is not None and K.kind == "box":
        lo_k, hi_k = (np.asarray(c) for c in K.data)
        box = (lo_k, hi_k)
        reach = r + float(np.max(np.abs(np.concatenate([lo_k, hi_k]))))
    if expand is not None:
        reach = r + float(np.max(np.linalg.norm(expand, axis=1)))
    cell = (r if r > 0 else max(reach, 1.0)) / 8.0 if cell is None else cell
    dim = positions.shape[1]
    lo = positions.min(axis=0) - reach - cell
    hi = positions.max(axis=0) + reach + cell
    counter = OccupancyCounter(cell, dim, lo, hi)
    marker = _BallMarker(counter, r) if box is None \
        else _BoxMarker(counter, r, box)
    out = np.empty(len(checkpoint_idx))
    prev = 0
    for j, k in enumerate(checkpoint_idx):
        seg = positions[prev:k + 1]
        if expand is not None and len(seg):
            seg = (seg[None, :, :] + expand[:, None, :]).reshape(-1, dim)
        marker.mark(seg)
        prev = k + 1
        out[j] = counter.volume
    return out


def cumulative_occupancy_volume(positions: np.ndarray, r: float,
                                checkpoint_idx: np.ndarray,
                                cell: float | None = None) -> np.ndarray:
    """Volume of the r-ball union around positions[:k+1] for each
    checkpoint index k."""
    return cumulative_minkowski_volume(positions, r, checkpoint_idx,
                                       K=None, cell=cell)


@dataclass
class SausageRateResult:
    """Estimates of E|B_R(path up to t)| / t on a time ladder."""

    times: np.ndarray
    rate_mean: np.ndarray
    rate_sem: np.ndarray
    step: float
    n_replicas: int
    h_check: dict


def expected_sausage_rate(params: StableParams, radius_law, horizon: float,
                          step: float, n_replicas: int,
                          rng: np.random.Generator,
                          times=None, h_check: bool = True,
                          cell: float | None = None) -> SausageRateResult:
    """Mean sausage volume per unit time, radius redrawn each replica.

    Checkpoints share one trajectory per replica, so the ladder is
    positively coupled across times. A step-halving diagnostic on a
    quarter of the replicas reports the discretisation bias.
    """
    params.require_transient()
    times = np.array([horizon], dtype=float) if times is None \
        else np.asarray(times, dtype=float)
    if np.any(times <= 0) or np.any(times > horizon):
        raise ValueError("checkpoint times must lie in (0, horizon]")

    def run(h: float, n: int, streams) -> np.ndarray:
        grid = np.arange(0.0, horizon + h / 2, h)
        idx = np.searchsorted(grid, times - 1e-12, side="left")
        rates = np.empty((n, len(times)))
        for i in range(n):
            sub = streams[i]
            radius = float(radius_law.sample(1, sub)[0])
            skel = sample_skeleton(params, np.zeros(params.dim), horizon, h, sub)
            vols = cumulative_occupancy_volume(skel.positions, radius, idx,
                                               cell=cell)
            rates[i] = vols / times
        return rates

    streams = rng.spawn(n_replicas)
    rates = run(step, n_replicas, streams)
    mean = rates.mean(axis=0)
    sem = rates.std(axis=0, ddof=1) / math.sqrt(n_replicas)
    check: dict = {"enabled": bool(h_check)}
    if h_check:
        n_half = max(8, n_replicas // 4)
        half_streams = rng.spawn(n_half)
        half = run(step / 2.0, n_half, half_streams)
        h_mean = half.mean(axis=0)
        h_sem = half.std(axis=0, ddof=1) / math.sqrt(n_half)
        joint = 1.96 * np.sqrt(sem ** 2 + h_sem ** 2)
        check.update({
            "step_halved": step / 2.0,
            "rate_at_half_step": h_mean.tolist(),
            "joint_ci": joint.tolist(),
            "ok": bool(np.all(np.abs(h_mean - mean) <= np.maximum(joint, 1e-12))),
        })
    return SausageRateResult(times=times, rate_mean=mean, rate_sem=sem,
                             step=step, n_replicas=n_replicas, h_check=check)


def drift_shift(skeleton: PathSkeleton, g: TargetMotion,
                rng: np.random.Generator | None = None) -> PathSkeleton:
    """Skeleton with positions shifted by g(t) pointwise; times unchanged."""
    shift = g.path_on_grid(skeleton.times, params=skeleton.params, rng=rng)
    return PathSkeleton(times=skeleton.times.copy(),
                        positions=skeleton.positions + shift,
                        params=skeleton.params)
