"""Marked Poisson clouds in a finite window, their evolution, and window
planning against the far-set hitting bound.

The model lives on all of R^d; a simulation window truncates only the
initial positions. Particles that leave the window are kept, since heavy
tailed jumps bring them back. The planner sizes the window so that the
expected number of omitted detecting particles, integrated against the
calibrated hitting bound, stays below a caller-chosen budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .motion import TargetMotion
from .stable import (BoundConstants, PathSkeleton, StableParams,
                     hitting_bound, sample_increments, time_grid)


# ---------------------------------------------------------------------------
# Radius laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadiusLaw:
    """Law of the i.i.d. communication radius.

    kinds: constant(r), uniform(a, b), pareto(scale, exponent) with tail
    (scale/x)^exponent for x >= scale, discrete(values, probabilities).
    """

    kind: str
    params: tuple

    @staticmethod
    def constant(r: float) -> "RadiusLaw":
        if r < 0:
            raise ValueError("radius must be nonnegative")
        return RadiusLaw("constant", (float(r),))

    @staticmethod
    def uniform(a: float, b: float) -> "RadiusLaw":
        if not (0 <= a < b):
            raise ValueError("need 0 <= a < b")
        return RadiusLaw("uniform", (float(a), float(b)))

    @staticmethod
    def pareto(scale: float, exponent: float) -> "RadiusLaw":
        if scale <= 0 or exponent <= 0:
            raise ValueError("pareto needs positive scale and exponent")
        return RadiusLaw("pareto", (float(scale), float(exponent)))

    @staticmethod
    def discrete(values, probabilities) -> "RadiusLaw":
        v = tuple(float(x) for x in values)
        p = tuple(float(x) for x in probabilities)
        if len(v) != len(p) or not v:
            raise ValueError("values and probabilities must match and be nonempty")
        if any(x < 0 for x in v) or any(q < 0 for q in p) or abs(sum(p) - 1) > 1e-9:
            raise ValueError("need nonnegative values and a probability vector")
        return RadiusLaw("discrete", (v, p))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, self.params[0])
        if self.kind == "uniform":
            a, b = self.params
            return rng.uniform(a, b, size=n)
        if self.kind == "pareto":
            scale, k = self.params
            return scale * rng.uniform(size=n) ** (-1.0 / k)
        values, probs = self.params
        return rng.choice(np.asarray(values), size=n, p=np.asarray(probs))

    def moment(self, p: float) -> float:
        """Closed-form E R^p; raises on infinite moments."""
        if self.kind == "constant":
            return self.params[0] ** p
        if self.kind == "uniform":
            a, b = self.params
            if p == 0:
                return 1.0
            if a == 0 and p <= -1:
                raise ValueError(f"E R^{p} is infinite for uniform({a},{b})")
            if abs(p + 1.0) < 1e-12:
                return (math.log(b) - math.log(a)) / (b - a)
            return (b ** (p + 1) - a ** (p + 1)) / ((b - a) * (p + 1))
        if self.kind == "pareto":
            scale, k = self.params
            if p >= k:
                raise ValueError(
                    f"E R^{p} is infinite for pareto(exponent={k})")
            return k * scale ** p / (k - p)
        values, probs = self.params
        if p < 0 and any(v == 0 for v in values):
            raise ValueError("negative moment of a law with an atom at 0")
        return float(sum(q * v ** p for v, q in zip(values, probs)))

    def quantile(self, q: float) -> float:
        if not (0 <= q <= 1):
            raise ValueError("quantile level must lie in [0, 1]")
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "uniform":
            a, b = self.params
            return a + q * (b - a)
        if self.kind == "pareto":
            scale, k = self.params
            if q == 1.0:
                return math.inf
            return scale * (1.0 - q) ** (-1.0 / k)
        values, probs = self.params
        order = np.argsort(values)
        cdf = 0.0
        for i in order:
            cdf += probs[i]
            if cdf >= q - 1e-12:
                return values[i]
        return values[order[-1]]

    def tail(self, r: float) -> float:
        """P(R > r)."""
        if self.kind == "constant":
            return 1.0 if r < self.params[0] else 0.0
        if self.kind == "uniform":
            a, b = self.params
            return float(np.clip((b - r) / (b - a), 0.0, 1.0))
        if self.kind == "pareto":
            scale, k = self.params
            return 1.0 if r < scale else (scale / r) ** k
        values, probs = self.params
        return float(sum(q for v, q in zip(values, probs) if v > r))

    def check_dth_moment(self, d: int) -> None:
        m = self.moment(d)     # raises if infinite
        if m <= 0:
            raise ValueError("E R^d must be positive")

    def spec_string(self) -> str:
        if self.kind == "constant":
            return f"const:{self.params[0]!r}"
        if self.kind == "uniform":
            return f"uniform:{self.params[0]!r}:{self.params[1]!r}"
        if self.kind == "pareto":
            return f"pareto:{self.params[0]!r}:{self.params[1]!r}"
        values, probs = self.params
        return ("discrete:" + ",".join(repr(v) for v in values)
                + "@" + ",".join(repr(p) for p in probs))


def parse_radius_law(text: str) -> RadiusLaw:
    """Parse the config syntax: const:r | uniform:a:b | pareto:s:k |
    discrete:v1,v2,...@p1,p2,..."""
    head, _, rest = text.partition(":")
    head = head.strip().lower()
    try:
        if head in ("const", "constant"):
            return RadiusLaw.constant(float(rest))
        if head == "uniform":
            a, b = rest.split(":")
            return RadiusLaw.uniform(float(a), float(b))
        if head == "pareto":
            s, k = rest.split(":")
            return RadiusLaw.pareto(float(s), float(k))
        if head == "discrete":
            vals, _, probs = rest.partition("@")
            return RadiusLaw.discrete([float(v) for v in vals.split(",")],
                                      [float(p) for p in probs.split(",")])
    except (ValueError, TypeError) as exc:
        raise ValueError(f"bad radius law spec {text!r}: {exc}") from exc
    raise ValueError(f"unknown radius law kind in {text!r}")


def radius_moment(radius_law: RadiusLaw, p: float) -> float:
    """Closed-form E R^p (domain-error on infinite moments)."""
    return radius_law.moment(p)


# ---------------------------------------------------------------------------
# Clouds
# ---------------------------------------------------------------------------

@dataclass
class MarkedCloud:
    """Initial positions, radii and identities of the nodes in a window."""

    ids: np.ndarray
    x0: np.ndarray
    radii: np.ndarray
    lam: float
    window_halfwidth: float

    def __post_init__(self):
        if len(self.ids) != len(self.x0) or len(self.ids) != len(self.radii):
            raise ValueError("ids, x0 and radii must have equal length")
        if len(self.x0) and np.max(np.abs(self.x0)) > self.window_halfwidth + 1e-9:
            raise ValueError("initial positions must lie inside the window")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.x0.shape[1]


def sample_cloud(lam: float, window_halfwidth: float, radius_law: RadiusLaw,
                 dim: int, rng: np.random.Generator) -> MarkedCloud:
    """Poisson(lam * (2W)^d) many nodes, uniform in the window, with
    i.i.d. radii independent of the positions."""
    if lam < 0:
        raise ValueError("intensity must be nonnegative")
    if window_halfwidth <= 0:
        raise ValueError("window halfwidth must be positive")
    radius_law.check_dth_moment(dim)
    mean = lam * (2.0 * window_halfwidth) ** dim
    n = int(rng.poisson(mean)) if lam > 0 else 0
    x0 = rng.uniform(-window_halfwidth, window_halfwidth, size=(n, dim))
    radii = radius_law.sample(n, rng)
    return MarkedCloud(ids=np.arange(n), x0=x0, radii=radii, lam=lam,
                       window_halfwidth=window_halfwidth)


def evolve(cloud: MarkedCloud, time_points, params: StableParams,
           rng: np.random.Generator) -> list[PathSkeleton]:
    """Independent skeletons for every particle on a shared grid.

    Radii are not part of the skeletons because they do not change over
    time. Increments are drawn in a fixed particle-major order from the
    given stream, so the result does not depend on scheduling.
    """
    grid = np.asarray(time_points, dtype=float)
    if len(grid) == 0 or grid[0] != 0.0:
        raise ValueError("time grid must start at 0")
    n = len(cloud)
    steps = np.diff(grid)
    positions = np.empty((len(grid), n, cloud.dim))
    positions[0] = cloud.x0
    for k, dt in enumerate(steps):
        positions[k + 1] = positions[k] + sample_increments(params, float(dt), n, rng)
    return [PathSkeleton(times=grid, positions=positions[:, i, :], params=params)
            for i in range(n)]


# ---------------------------------------------------------------------------
# Window planning
# ---------------------------------------------------------------------------

@dataclass
class WindowPlan:
    """Initial-window halfwidth plus the truncation budget it certifies.

    eps_trunc bounds the expected number of particles outside the window
    that would have detected the target by the horizon, measured with the
    calibrated hitting bound (which is loose, so the true omission rate
    is typically far smaller).
    """

    halfwidth: float
    horizon: float
    eps_trunc: float
    margin: float = 0.0
    source: str = "planned"


def _omitted_detectors(lam: float, w_eff: float, r_bar: float, horizon: float,
                       params: StableParams, constants: BoundConstants) -> float:
    """lam * integral over |x| > w_eff of the hitting bound."""
    d = params.dim
    surface = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)

    def integrand(s: np.ndarray) -> np.ndarray:
        vals = np.empty_like(s)
        for i, si in enumerate(s):
            vals[i] = hitting_bound(params, float(si), r_bar, horizon,
                                    constants).total
        return vals * s ** (d - 1)

    # log-spaced panels out to where the polynomial tail is negligible
    s_hi = w_eff * 1e6
    edges = np.geomspace(w_eff, s_hi, 400)
    nodes = 0.5 * (edges[1:] + edges[:-1])
    widths = np.diff(edges)
    total = float(np.sum(integrand(nodes) * widths))
    return lam * surface * total


def plan_window(params: StableParams, lam: float, radius_law: RadiusLaw,
                horizon: float, eps_trunc: float, constants: BoundConstants,
                target: TargetMotion | None = None,
                radius_quantile: float = 0.99) -> WindowPlan:
    """Smallest window halfwidth whose omitted-detector budget is met.

    The integration starts at halfwidth minus a margin that covers the
    target's displacement over the horizon, so a moving target stays
    protected. Fails when the bound's exponential term makes the tail
    integral diverge (kappa * horizon / 2 <= d), which happens for short
    horizons under loosely calibrated constants.
    """
    params.require_transient()
    if eps_trunc <= 0:
        raise ValueError("eps_trunc must be positive")
    r_bar = radius_law.quantile(radius_quantile)
    margin = 0.0
    if target is not None and target.kind != "static":
        margin = target.displacement_bound(horizon, params=params)
    if horizon == 0:
        return WindowPlan(halfwidth=r_bar + margin, horizon=0.0,
                          eps_trunc=0.0, margin=margin)
    if constants.hitting_kappa * horizon / 2.0 <= params.dim:
        raise RuntimeError(
            "window planner failure: exponential term of the hitting bound "
            f"is not integrable at horizon {horizon} "
            f"(kappa={constants.hitting_kappa:.3g}); use a longer horizon or "
            "an explicit halfwidth")

    def budget(w: float) -> float:
        w_eff = max(w - margin, 6.0 * r_bar + 1.0)
        return _omitted_detectors(lam, w_eff, r_bar, horizon, params, constants)

    lo = max(6.0 * r_bar + 1.0, 2.0) + margin
    if budget(lo) <= eps_trunc:
        return WindowPlan(lo, horizon, budget(lo), margin)
    hi = lo
    for _ in range(60):
        hi *= 2.0
        if budget(hi) <= eps_trunc:
            break
    else:
        raise RuntimeError("window planner failure: budget never met")
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if budget(mid) <= eps_trunc:
            hi = mid
        else:
            lo = mid
        if hi / lo < 1.01:
            break
    return WindowPlan(halfwidth=hi, horizon=horizon, eps_trunc=budget(hi),
                      margin=margin)


def window_plan_from_halfwidth(params: StableParams, lam: float,
                               radius_law: RadiusLaw, horizon: float,
                               halfwidth: float,
                               constants: BoundConstants | None = None,
                               target: TargetMotion | None = None) -> WindowPlan:
    """Plan with a caller-chosen halfwidth; the implied truncation budget
    is evaluated from the bound when constants are available (it is an
    upper bound and can be very loose). Meant for desk-scale runs that are
    validated by window-doubling diagnostics instead."""
    margin = 0.0
    if target is not None and target.kind != "static":
        margin = target.displacement_bound(horizon, params=params)
    eps = math.inf
    if constants is not None and horizon > 0:
        r_bar = radius_law.quantile(0.99)
        if constants.hitting_kappa * horizon / 2.0 > params.dim:
            w_eff = max(halfwidth - margin, 6.0 * r_bar + 1.0)
            eps = _omitted_detectors(lam, w_eff, r_bar, horizon, params, constants)
    elif horizon == 0:
        eps = 0.0
    return WindowPlan(halfwidth=halfwidth, horizon=horizon, eps_trunc=eps,
                      margin=margin, source="explicit")
