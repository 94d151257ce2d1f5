"""Deterministic and random motions of the node to be detected."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stable import StableParams, sample_skeleton


@dataclass(frozen=True)
class TargetMotion:
    """Motion g with g(0) = o.

    Kinds:
      static          g(t) = o
      linear          g(t) = beta * t * psi with |psi| = 1, beta > 0
      levy            a fresh independent copy of the node motion per replica
      table           user supplied skeleton, evaluated as a cadlag step
                      function between its grid points
    """

    kind: str
    beta: float = 0.0
    psi: tuple = ()
    table_times: np.ndarray | None = field(default=None, repr=False)
    table_positions: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("static", "linear", "levy", "table"):
            raise ValueError(f"unknown target motion kind {self.kind!r}")
        if self.kind == "linear":
            psi = np.asarray(self.psi, dtype=float)
            if self.beta <= 0:
                raise ValueError("linear motion needs beta > 0")
            if abs(np.linalg.norm(psi) - 1.0) > 1e-9:
                raise ValueError("direction psi must be a unit vector")
        if self.kind == "table":
            t = np.asarray(self.table_times, dtype=float)
            x = np.asarray(self.table_positions, dtype=float)
            if t[0] != 0.0 or np.any(x[0] != 0.0):
                raise ValueError("table motion must start at the origin")

    @staticmethod
    def static() -> "TargetMotion":
        return TargetMotion(kind="static")

    @staticmethod
    def linear(beta: float, psi) -> "TargetMotion":
        psi = np.asarray(psi, dtype=float)
        psi = psi / np.linalg.norm(psi)
        return TargetMotion(kind="linear", beta=beta, psi=tuple(psi))

    @staticmethod
    def levy() -> "TargetMotion":
        return TargetMotion(kind="levy")

    @staticmethod
    def table(times, positions) -> "TargetMotion":
        return TargetMotion(kind="table",
                            table_times=np.asarray(times, dtype=float),
                            table_positions=np.asarray(positions, dtype=float))

    @property
    def is_random(self) -> bool:
        return self.kind == "levy"

    def path_on_grid(self, times: np.ndarray, params: StableParams | None = None,
                     rng: np.random.Generator | None = None) -> np.ndarray:
        """Positions g(t) for every grid time, shape (len(times), dim).

        The levy kind draws a fresh path, so each call with a live rng
        yields a new realisation (annealed target).
        """
        times = np.asarray(times, dtype=float)
        if self.kind == "static":
            if params is None:
                raise ValueError("static motion needs params for the dimension")
            return np.zeros((len(times), params.dim))
        if self.kind == "linear":
            psi = np.asarray(self.psi, dtype=float)
            return self.beta * times[:, None] * psi[None, :]
        if self.kind == "levy":
            if params is None or rng is None:
                raise ValueError("levy target motion needs params and rng")
            if len(times) == 1:
                return np.zeros((1, params.dim))
            step = float(np.min(np.diff(times)))
            skel = sample_skeleton(params, np.zeros(params.dim),
                                   float(times[-1]), step, rng)
            idx = np.searchsorted(skel.times, times, side="right") - 1
            return skel.positions[idx]
        # table: cadlag step interpolation
        idx = np.searchsorted(self.table_times, times, side="right") - 1
        idx = np.clip(idx, 0, len(self.table_times) - 1)
        return self.table_positions[idx]

    def displacement_bound(self, horizon: float, params: StableParams | None = None,
                           quantile: float = 0.999) -> float:
        """Scale of sup_{t <= horizon} |g(t)|, used to pad windows.

        For the levy kind this is a tail quantile of the marginal plus a
        factor two of slack for the running supremum.
        """
        if self.kind == "static":
            return 0.0
        if self.kind == "linear":
            return self.beta * horizon
        if self.kind == "table":
            return float(np.max(np.linalg.norm(self.table_positions, axis=1)))
        if params is None:
            raise ValueError("levy displacement bound needs params")
        if params.alpha == 2.0:
            return 2.0 * np.sqrt(2.0 * horizon) * 4.0
        # marginal tail P(|X_t| > s) ~ tail_mass; invert crudely by bisection
        from .stable import tail_mass
        lo, hi = 1.0, 1e7
        for _ in range(60):
            mid = np.sqrt(lo * hi)
            if tail_mass(params, horizon, mid) > 1.0 - quantile:
                lo = mid
            else:
                hi = mid
        return 2.0 * hi
