"""Survival curves of the detection time, two independent ways.

Direct route: simulate the marked cloud, move every node, record the first
grid time the target is inside some ball. Void route: the probability of
being undetected equals the Poisson void probability of the detecting set,
so one trajectory per replica plus a volume measurement estimates the same
curve. Both routes check detection on the same time grid, so they estimate
the identical grid-time quantity and must agree within Monte Carlo error;
disagreement beyond that indicates a window or implementation problem.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .field import RadiusLaw, WindowPlan, sample_cloud
from .motion import TargetMotion
from .rngtools import map_replicas
from .stable import StableParams, sample_increments, sample_skeleton, time_grid
from .volume import CompactSet, cumulative_minkowski_volume


@dataclass
class SurvivalCurve:
    """P(T > t) estimates on a time grid with 95% half-widths."""

    times: np.ndarray
    survival: np.ndarray
    ci: np.ndarray
    n: int
    method: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.survival = np.asarray(self.survival, dtype=float)
        self.ci = np.asarray(self.ci, dtype=float)
        if np.any(self.survival > 1.0 + 1e-12) or np.any(self.survival < 0.0):
            raise ValueError("survival estimates must lie in [0, 1]")

    def at(self, t: float, tol: float | None = None) -> tuple[float, float]:
        """(survival, half_width) at the grid time closest to t."""
        i = int(np.argmin(np.abs(self.times - t)))
        gap = abs(self.times[i] - t)
        if tol is not None and gap > tol:
            raise KeyError(f"no grid time within {tol} of {t}")
        return float(self.survival[i]), float(self.ci[i])


def _survival_from_detection_indices(det_idx: np.ndarray, n_times: int,
                                     n: int) -> tuple[np.ndarray, np.ndarray]:
    detected_at = np.bincount(det_idx[det_idx < n_times], minlength=n_times)
    surv_counts = n - np.cumsum(detected_at)
    survival = surv_counts / n
    var = np.maximum(survival * (1.0 - survival), 1.0 / n)
    ci = 1.96 * np.sqrt(var / n)
    return survival, ci


def _target_steps(g: TargetMotion, grid: np.ndarray, params: StableParams,
                  rng: np.random.Generator) -> np.ndarray:
    path = g.path_on_grid(grid, params=params, rng=rng)
    return np.diff(path, axis=0)


def simulate_detection(lam: float, radius_law: RadiusLaw, params: StableParams,
                       g: TargetMotion, horizon: float, step: float, n: int,
                       rng: np.random.Generator, window_plan: WindowPlan,
                       threads: int | None = None,
                       h_check: bool = False) -> SurvivalCurve:
    """Direct particle-system estimate of P(T_det > t) on the grid.

    Positions are tracked relative to the target, which turns a moving
    target into extra increments on every node; the initial cloud is the
    planned window centred on the target's start. Replicas stop at their
    first detection.
    """
    if window_plan is None:
        raise ValueError("simulate_detection requires a planned window; "
                         "call plan_window or window_plan_from_halfwidth first")
    grid = time_grid(horizon, step)
    n_times = len(grid)
    w = window_plan.halfwidth
    streams = rng.spawn(n)

    def one(i: int) -> int:
        sub = streams[i]
        cloud = sample_cloud(lam, w, radius_law, params.dim, sub)
        if len(cloud) == 0:
            return n_times
        d_target = None
        if g.kind != "static":
            d_target = _target_steps(g, grid, params, sub)
        pos = cloud.x0.copy()
        radii2 = None
        radii = cloud.radii
        if np.min((pos ** 2).sum(axis=1) - radii ** 2) <= 0:
            return 0
        for k in range(1, n_times):
            dt = float(grid[k] - grid[k - 1])
            pos += sample_increments(params, dt, len(cloud), sub)
            if d_target is not None:
                pos -= d_target[k - 1]
            if np.min((pos ** 2).sum(axis=1) - radii ** 2) <= 0:
                return k
        return n_times

    det_idx = np.array(map_replicas(one, n, threads), dtype=np.int64)
    survival, ci = _survival_from_detection_indices(det_idx, n_times, n)
    meta = {"window_halfwidth": w, "eps_trunc": window_plan.eps_trunc,
            "step": step, "lambda": lam, "target": g.kind}
    if h_check:
        n_half = max(16, n // 4)
        sub_curve = simulate_detection(lam, radius_law, params, g, horizon,
                                       step / 2.0, n_half, rng, window_plan,
                                       threads=threads, h_check=False)
        probe = grid[:: max(1, n_times // 8)]
        deltas = []
        for t in probe:
            s0, c0 = SurvivalCurve(grid, survival, ci, n, "direct").at(t)
            s1, c1 = sub_curve.at(t)
            deltas.append(abs(s1 - s0) - math.hypot(c0, c1))
        meta["h_check"] = {"step_halved": step / 2.0, "n": n_half,
                           "ok": bool(max(deltas) <= 0.0),
                           "worst_excess": float(max(deltas))}
    return SurvivalCurve(times=grid, survival=survival, ci=ci, n=n,
                         method="direct", meta=meta)


def void_survival(lam: float, radius_law: RadiusLaw, params: StableParams,
                  g: TargetMotion, K: CompactSet | None, horizon: float,
                  step: float, n: int, rng: np.random.Generator,
                  out_times=None, cell: float | None = None,
                  threads: int | None = None) -> SurvivalCurve:
    """Void-probability estimate of P(T_det(K) > t).

    Each replica contributes the volume of B_R(sign-flipped trajectory
    composed with g, up to t) + K; the curve is exp(-lambda * mean volume)
    with a delta-method half-width. The levy target is redrawn per replica
    (annealed curve).
    """
    grid = time_grid(horizon, step)
    if out_times is None:
        stride = max(1, len(grid) // 128)
        idx = np.unique(np.r_[np.arange(1, len(grid), stride), len(grid) - 1])
    else:
        wanted = np.asarray(out_times, dtype=float)
        idx = np.searchsorted(grid, wanted - 1e-12, side="left")
        if np.any(np.abs(grid[np.clip(idx, 0, len(grid) - 1)] - wanted) > step):
            raise ValueError("out_times must lie on the simulation grid")
        idx = np.unique(np.clip(idx, 0, len(grid) - 1))
    times = grid[idx]
    if K is None:
        K = CompactSet.origin(params.dim)
    streams = rng.spawn(n)

    def one(i: int) -> np.ndarray:
        sub = streams[i]
        radius = float(radius_law.sample(1, sub)[0])
        skel = sample_skeleton(params, np.zeros(params.dim), horizon,
                               float(grid[1] - grid[0]), sub)
        g_path = g.path_on_grid(grid, params=params, rng=sub)
        eff = -skel.positions + g_path
        return cumulative_minkowski_volume(eff, radius, idx, K=K, cell=cell)

    vols = np.array(map_replicas(one, n, threads), dtype=float)
    mean = vols.mean(axis=0)
    sem = vols.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    survival = np.exp(-lam * mean)
    ci = survival * lam * 1.96 * sem
    meta = {"mean_volume": mean, "volume_sem": sem, "lambda": lam,
            "neg_log_survival": lam * mean, "step": step, "target": g.kind,
            "K": K.kind}
    return SurvivalCurve(times=times, survival=survival, ci=ci, n=n,
                         method="void-formula", meta=meta)


# ---------------------------------------------------------------------------
# Rate extraction and structural checks
# ---------------------------------------------------------------------------

@dataclass
class RateFit:
    """Fitted exponential decay rate of a survival curve tail."""

    rate: float
    stderr: float
    window: tuple[float, float]
    intercept: float
    n_points: int


def decay_rate(curve: SurvivalCurve, window: tuple[float, float] | None = None) -> RateFit:
    """Least-squares slope of -log survival over a tail window.

    Default window: the last 40% of usable grid times. Direct curves
    additionally require survival > 25/n so the starved tail does not
    enter the fit. Void curves carry -log survival in their metadata,
    which avoids underflow when survival drops below float range.
    """
    s = curve.survival
    neg_log = curve.meta.get("neg_log_survival")
    if neg_log is not None:
        usable = np.isfinite(np.asarray(neg_log))
    else:
        usable = s > 0
    if curve.method == "direct":
        usable &= s > 25.0 / curve.n
    t_all = curve.times[usable]
    if window is None:
        if len(t_all) < 3:
            raise ValueError("not enough usable points to fit a rate")
        t_lo = t_all[int(math.floor(0.6 * len(t_all)))]
        window = (float(t_lo), float(t_all[-1]))
    sel = usable & (curve.times >= window[0]) & (curve.times <= window[1])
    if np.count_nonzero(sel) < 2:
        warnings.warn("rate window starved; shrinking to usable points")
        sel = usable
    t = curve.times[sel]
    if neg_log is not None:
        y = np.asarray(neg_log)[sel]
    else:
        y = -np.log(curve.survival[sel])
    n_pts = len(t)
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(n_pts - 2, 1)
    s2 = float(resid @ resid) / dof
    tt = t - t.mean()
    denom = float(tt @ tt)
    stderr = math.sqrt(s2 / denom) if denom > 0 else math.inf
    return RateFit(rate=float(coef[0]), stderr=stderr,
                   window=(float(t[0]), float(t[-1])),
                   intercept=float(coef[1]), n_points=n_pts)


@dataclass
class SupermultEntry:
    t: float
    t_prime: float
    survival_sum: float
    survival_product: float
    slack: float
    three_sigma: float
    ok: bool


def supermultiplicativity_check(curve: SurvivalCurve,
                                pairs) -> list[SupermultEntry]:
    """Checks survival(t + t') >= survival(t) survival(t') - 3 sigma.

    Valid on annealed curves (target motion resampled per replica).
    """
    out = []
    for (t, tp) in pairs:
        s_t, c_t = curve.at(t)
        s_tp, c_tp = curve.at(tp)
        s_sum, c_sum = curve.at(t + tp)
        sig = math.sqrt((c_sum / 1.96) ** 2 + (s_tp * c_t / 1.96) ** 2
                        + (s_t * c_tp / 1.96) ** 2)
        prod = s_t * s_tp
        slack = s_sum - prod
        out.append(SupermultEntry(t=t, t_prime=tp, survival_sum=s_sum,
                                  survival_product=prod, slack=slack,
                                  three_sigma=3.0 * sig,
                                  ok=bool(slack >= -3.0 * sig)))
    return out
