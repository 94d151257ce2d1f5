"""Isotropic alpha-stable increments, paths, transition density and
escape/hitting statistics.

Sampling route: a standard normal vector run at a random clock. If S has
Laplace transform E exp(-u S) = exp(-dt u^(alpha/2)) and Z is standard
d-dimensional Gaussian, then sqrt(2 S) Z has characteristic function
exp(-dt |xi|^alpha), which is the exact marginal law of the increment.
The clock S is drawn by the Kanter trigonometric transform, so nothing
is truncated or approximated. alpha = 2 bypasses the clock entirely
(Gaussian with covariance 2 dt I).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special


@dataclass(frozen=True)
class StableParams:
    """Stability index alpha in (0, 2] and spatial dimension."""

    alpha: float
    dim: int

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def transient(self) -> bool:
        return self.dim > self.alpha

    def require_transient(self) -> None:
        if not self.transient:
            raise ValueError(
                f"operation requires dim > alpha (transience); "
                f"got alpha={self.alpha}, dim={self.dim}")


@dataclass
class PathSkeleton:
    """Time-gridded trajectory of one particle.

    times[0] == 0 and positions[0] is the declared start point; increments
    between grid times are exact in distribution, while positions between
    grid times are simply not represented (skeleton approximation).
    """

    times: np.ndarray
    positions: np.ndarray
    params: StableParams = field(repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim == 1:
            self.positions = self.positions[:, None]
        if len(self.times) != len(self.positions):
            raise ValueError("times and positions must have equal length")
        if len(self.times) == 0 or self.times[0] != 0.0:
            raise ValueError("skeleton must start at time 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.positions.shape[1] != self.params.dim:
            raise ValueError("position dimension does not match params.dim")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def start(self) -> np.ndarray:
        return self.positions[0]


def sample_subordinator_increment(beta: float, dt: float, rng: np.random.Generator,
                                  size: int | None = None):
    """Increment of the one-sided beta-stable subordinator over duration dt.

    Laplace transform: E exp(-u S) = exp(-dt u^beta). Kanter's transform
    with U uniform on (0, pi) and W unit exponential:

        S = dt^(1/beta) * sin(beta U) / sin(U)^(1/beta)
                        * (sin((1-beta) U) / W)^((1-beta)/beta)
    """
    if not (0.0 < beta < 1.0):
        raise ValueError(f"subordinator index must lie in (0, 1), got {beta}")
    if dt < 0:
        raise ValueError(f"duration must be nonnegative, got {dt}")
    n = 1 if size is None else int(size)
    if dt == 0:
        out = np.zeros(n)
        return float(out[0]) if size is None else out
    u = rng.uniform(0.0, np.pi, size=n)
    w = rng.standard_exponential(size=n)
    ratio = (1.0 - beta) / beta
    s = (dt ** (1.0 / beta)
         * np.sin(beta * u) * np.sin(u) ** (-1.0 / beta)
         * (np.sin((1.0 - beta) * u) / w) ** ratio)
    return float(s[0]) if size is None else s


def sample_increments(params: StableParams, dt: float, n: int,
                      rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. increments of duration dt, shape (n, dim).

    Characteristic function of each row: exp(-dt |xi|^alpha).
    """
    if dt < 0:
        raise ValueError(f"duration must be nonnegative, got {dt}")
    d = params.dim
    if dt == 0:
        return np.zeros((n, d))
    if params.alpha == 2.0:
        return rng.normal(scale=math.sqrt(2.0 * dt), size=(n, d))
    clock = sample_subordinator_increment(params.alpha / 2.0, dt, rng, size=n)
    z = rng.standard_normal((n, d))
    return np.sqrt(2.0 * clock)[:, None] * z


def sample_increment(params: StableParams, dt: float,
                     rng: np.random.Generator) -> np.ndarray:
    """One increment of duration dt as a vector in R^dim."""
    return sample_increments(params, dt, 1, rng)[0]


def time_grid(horizon: float, step: float) -> np.ndarray:
    """Grid {0, h, 2h, ...} whose last point is exactly `horizon`."""
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if not (0 < step <= horizon):
        raise ValueError(f"step must lie in (0, horizon], got {step}")
    n_full = int(math.floor(horizon / step + 1e-9))
    grid = step * np.arange(n_full + 1)
    if grid[-1] < horizon - 1e-9 * max(1.0, horizon):
        grid = np.append(grid, horizon)
    else:
        grid[-1] = horizon
    return grid


def sample_skeleton(params: StableParams, start, horizon: float, step: float,
                    rng: np.random.Generator) -> PathSkeleton:
    """Skeleton of one path on the grid {0, h, 2h, ..., horizon}."""
    grid = time_grid(horizon, step)
    start = np.broadcast_to(np.asarray(start, dtype=float), (params.dim,))
    dts = np.diff(grid)
    pos = np.empty((len(grid), params.dim))
    pos[0] = start
    if len(dts) > 0:
        if params.alpha == 2.0:
            incs = rng.standard_normal((len(dts), params.dim)) \
                * np.sqrt(2.0 * dts)[:, None]
        else:
            clock = np.empty(len(dts))
            uniq = np.unique(dts)
            for dt in uniq:
                sel = dts == dt
                clock[sel] = sample_subordinator_increment(
                    params.alpha / 2.0, float(dt), rng, size=int(sel.sum()))
            incs = np.sqrt(2.0 * clock)[:, None] \
                * rng.standard_normal((len(dts), params.dim))
        pos[1:] = start + np.cumsum(incs, axis=0)
    return PathSkeleton(times=grid, positions=pos, params=params)


# ---------------------------------------------------------------------------
# Transition density by radial Fourier inversion
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _density_quadrature(params: StableParams, t: float, r: float) -> float:
    """Radial inversion of exp(-t u^alpha) with a Bessel kernel.

    p(t, r) = (2 pi)^(-d/2) r^(1 - d/2)
              * int_0^inf exp(-t u^alpha) J_{d/2-1}(u r) u^(d/2) du
    evaluated by composite Gauss-Legendre panels sized to resolve the
    oscillation, with the upper cutoff Xi chosen so the dropped tail is
    below 1e-16 of the integrand scale.
    """
    alpha, d = params.alpha, params.dim
    xi_max = (38.0 / t) ** (1.0 / alpha)
    n_panels = max(48, int(math.ceil(xi_max * r / (math.pi / 2.0))))
    if n_panels > 200_000:
        raise FloatingPointError(
            f"density quadrature would need {n_panels} panels "
            f"(t={t}, r={r}); use the tail series instead")
    edges = np.linspace(0.0, xi_max, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    nu = d / 2.0 - 1.0
    integrand = np.exp(-t * u ** alpha) * special.jv(nu, u * r) * u ** (d / 2.0)
    val = float(np.dot(w, integrand))
    return (2.0 * math.pi) ** (-d / 2.0) * r ** (1.0 - d / 2.0) * val


def _density_at_origin(params: StableParams, t: float) -> float:
    alpha, d = params.alpha, params.dim
    surface = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    return (2.0 * math.pi) ** (-d) * surface \
        * math.gamma(d / alpha) / (alpha * t ** (d / alpha))


def _tail_series_coeffs(params: StableParams, t: float, kmax: int = 4) -> list[float]:
    """Coefficients a_k of the large-r expansion p ~ sum_k a_k r^(-d-k alpha).

    Terms where -k alpha / 2 hits a pole of the gamma function vanish.
    """
    alpha, d = params.alpha, params.dim
    coeffs = []
    for k in range(1, kmax + 1):
        pole_arg = -k * alpha / 2.0
        if abs(pole_arg - round(pole_arg)) < 1e-12 and round(pole_arg) <= 0:
            coeffs.append(0.0)
            continue
        a = ((-1.0) ** k * t ** k / math.factorial(k)
             * 2.0 ** (k * alpha) * math.gamma((d + k * alpha) / 2.0)
             / (math.pi ** (d / 2.0) * math.gamma(pole_arg)))
        coeffs.append(a)
    return coeffs


def _density_series(params: StableParams, t: float, r: float) -> float:
    alpha, d = params.alpha, params.dim
    coeffs = _tail_series_coeffs(params, t)
    return float(sum(a * r ** (-d - k * alpha)
                     for k, a in enumerate(coeffs, start=1)))


def stable_density(params: StableParams, t: float, r: float) -> float:
    """Transition density p(t, o, x) at radial distance r = |x|.

    Depends on the displacement through r only (isotropy). Accuracy is
    ~1e-10 absolute in the quadrature regime, which covers r up to many
    multiples of t^(1/alpha); far beyond that the asymptotic tail series
    takes over.
    """
    if t <= 0:
        raise ValueError(f"time must be positive, got {t}")
    if r < 0:
        raise ValueError(f"radial distance must be nonnegative, got {r}")
    if r == 0.0:
        return _density_at_origin(params, t)
    if params.alpha < 2.0:
        # switch to the series once the k=4 correction is negligible
        scale = t ** (1.0 / params.alpha)
        if r > 60.0 * max(scale, scale ** (2.0 / params.alpha)) and \
                t * r ** (-params.alpha) < 1e-3:
            return _density_series(params, t, r)
    return _density_quadrature(params, t, r)


def radial_mass(params: StableParams, t: float, r_max: float,
                n_nodes: int = 600) -> float:
    """Integral of the density over the ball of radius r_max.

    Straight radial quadrature of `stable_density`; used by normalization
    checks together with `tail_mass`.
    """
    d = params.dim
    surface = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    edges = np.linspace(0.0, r_max, n_nodes // 12 + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    r_nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    dens = np.array([stable_density(params, t, float(r)) for r in r_nodes])
    return float(np.dot(w, dens * surface * r_nodes ** (d - 1)))


def tail_mass(params: StableParams, t: float, r_max: float) -> float:
    """Probability of |X_t| > r_max, via the integrated tail series
    (alpha < 2) or the Gaussian chi-square tail (alpha = 2)."""
    alpha, d = params.alpha, params.dim
    if alpha == 2.0:
        from scipy import stats
        return float(stats.chi2.sf(r_max ** 2 / (2.0 * t), d))
    surface = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    coeffs = _tail_series_coeffs(params, t)
    return float(sum(a * surface * r_max ** (-k * alpha) / (k * alpha)
                     for k, a in enumerate(coeffs, start=1)))


# ---------------------------------------------------------------------------
# Escape and hitting statistics
# ---------------------------------------------------------------------------

@dataclass
class MCEstimate:
    """Monte Carlo estimate with a 95% half-width and refinement info."""

    value: float
    half_width: float
    n: int
    details: dict = field(default_factory=dict)


def _binomial_half_width(p_hat: float, n: int) -> float:
    var = max(p_hat * (1.0 - p_hat), 1.0 / n)
    return 1.96 * math.sqrt(var / n)


def escape_probability(params: StableParams, r: float, t: float, n: int,
                       rng: np.random.Generator, step: float | None = None,
                       refine: bool = True) -> MCEstimate:
    """P(sup_{s <= t} |X_s| >= r) estimated from skeleton maxima.

    The skeleton can only underestimate the supremum, so the raw estimate
    is biased downward; the step is halved once and the two estimates are
    reported so the caller can see whether the bias is resolved.
    """
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if t == 0:
        return MCEstimate(0.0, 0.0, n, {"step": 0.0})

    def run(h: float) -> float:
        grid = time_grid(t, h)
        pos = np.zeros((n, params.dim))
        escaped = np.zeros(n, dtype=bool)
        r2 = r * r
        for dt in np.diff(grid):
            pos += sample_increments(params, float(dt), n, rng)
            np.logical_or(escaped, (pos ** 2).sum(axis=1) >= r2, out=escaped)
        return float(escaped.mean())

    h0 = t / 256.0 if step is None else float(step)
    est0 = run(h0)
    details = {"step": h0, "estimate_at_step": est0}
    if refine:
        est1 = run(h0 / 2.0)
        details["step_halved"] = h0 / 2.0
        details["estimate_at_half_step"] = est1
        hw = _binomial_half_width(est1, n)
        details["h_check_ok"] = bool(abs(est1 - est0) <= 2.0 * hw)
        return MCEstimate(est1, hw, n, details)
    return MCEstimate(est0, _binomial_half_width(est0, n), n, details)


@dataclass
class HittingBoundValue:
    """Evaluated far-set hitting bound, with both terms reported."""

    total: float
    polynomial: float
    exponential: float
    length_scale: float

    def __float__(self) -> float:
        return self.total


def hitting_bound(params: StableParams, distance: float, r: float, t: float,
                  constants: "BoundConstants") -> HittingBoundValue:
    """Upper bound on P(exists s <= t : X_s in B_r(x)) for |x| = distance.

    Form: C (|x|^-(d+alpha) t^2 (r+L)^d + exp(-kappa (L/2 - C' t))) with the
    free length L set to t log|x|, clamped into the admissible range
    (0, |x|/6 - r]. Constants are calibration artifacts, not universal.
    """
    d, alpha = params.dim, params.alpha
    if r < 0 or distance <= 0:
        raise ValueError("need r >= 0 and distance > 0")
    l_cap = distance / 6.0 - r
    if l_cap <= 0:
        raise ValueError(
            f"hitting bound needs r + L <= |x|/6 with L > 0; "
            f"distance {distance} is too close for radius {r}")
    length = min(t * math.log(distance), l_cap) if t > 0 else 0.0
    length = max(length, 0.0)
    poly = constants.hitting_C * distance ** (-(d + alpha)) * t * t \
        * (r + length) ** d
    expo = constants.hitting_C * math.exp(
        -constants.hitting_kappa * (length / 2.0 - constants.hitting_Cprime * t))
    return HittingBoundValue(poly + expo, poly, expo, length)


@dataclass
class BoundConstants:
    """Constants for the escape and hitting bounds, fitted by calibration
    (see levybool.calibrate). Serialized into experiment manifests."""

    alpha: float
    dim: int
    escape_C: float
    hitting_C: float
    hitting_Cprime: float
    hitting_kappa: float
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "dim": self.dim, "escape_C": self.escape_C,
            "hitting_C": self.hitting_C, "hitting_Cprime": self.hitting_Cprime,
            "hitting_kappa": self.hitting_kappa, "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoundConstants":
        return cls(**data)


def escape_bound(params: StableParams, r: float, t: float,
                 constants: BoundConstants) -> float:
    """C r^-alpha t, valid for t < r^alpha and alpha < 2."""
    if params.alpha >= 2.0:
        raise ValueError("escape bound is stated for alpha < 2")
    return constants.escape_C * r ** (-params.alpha) * t
