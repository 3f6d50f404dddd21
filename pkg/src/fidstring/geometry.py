"""The string: a C^1 parametric plane curve on a closed parameter interval."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, quadrature
from .errors import CurveError
from .expr import Expression, as_expression

__all__ = ["ParamInterval", "Curve", "IrregularCurveWarning"]

REGULARITY_GRID = 10_000
MONOTONE_GRID = 1_000
PROJECTION_TOL = 1e-10


class IrregularCurveWarning(UserWarning):
    """The curve velocity vanishes somewhere on the regularity grid."""


@dataclass(frozen=True)
class ParamInterval:
    t_min: float
    t_max: float

    def __post_init__(self):
        if not (math.isfinite(self.t_min) and math.isfinite(self.t_max)):
            raise CurveError("interval bounds must be finite")
        if not self.t_min < self.t_max:
            raise CurveError(f"interval requires t_min < t_max, got [{self.t_min}, {self.t_max}]")

    @property
    def width(self) -> float:
        return self.t_max - self.t_min

    def contains(self, t) -> bool:
        t = np.asarray(t)
        return bool(np.all((t >= self.t_min) & (t <= self.t_max)))

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, n)


@dataclass(frozen=True)
class Curve:
    """t -> (mu1(t), mu2(t)) on ``interval``; velocities come from dual numbers."""

    mu1: Expression
    mu2: Expression
    interval: ParamInterval
    var: str = "t"
    check_regularity: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mu1", as_expression(self.mu1, [self.var]))
        object.__setattr__(self, "mu2", as_expression(self.mu2, [self.var]))
        if not isinstance(self.interval, ParamInterval):
            object.__setattr__(self, "interval", ParamInterval(*self.interval))
        if self.check_regularity:
            ts = self.interval.grid(REGULARITY_GRID)
            speed = np.hypot(*self.velocities(ts).T)
            bad = np.nonzero(speed == 0.0)[0]
            if bad.size:
                warnings.warn(
                    f"curve velocity vanishes at {bad.size} grid point(s), first at t={float(ts[bad[0]])!r}",
                    IrregularCurveWarning, stacklevel=3)

    # ------------------------------------------------------------ evaluation

    def _check(self, t) -> None:
        if not self.interval.contains(t):
            raise CurveError(
                f"parameter outside [{self.interval.t_min}, {self.interval.t_max}]")

    def points(self, t) -> np.ndarray:
        """Curve points, shape ``t.shape + (2,)``.  No interval check."""
        env = {self.var: np.asarray(t, dtype=float)}
        return np.stack([np.asarray(self.mu1.eval(env)), np.asarray(self.mu2.eval(env))], axis=-1)

    def velocities(self, t) -> np.ndarray:
        env = {self.var: np.asarray(t, dtype=float)}
        _, d1 = self.mu1.eval_dual(env, self.var)
        _, d2 = self.mu2.eval_dual(env, self.var)
        return np.stack([np.asarray(d1), np.asarray(d2)], axis=-1)

    def points_and_velocities(self, t) -> tuple[np.ndarray, np.ndarray]:
        env = {self.var: np.asarray(t, dtype=float)}
        v1, d1 = self.mu1.eval_dual(env, self.var)
        v2, d2 = self.mu2.eval_dual(env, self.var)
        return (np.stack([np.asarray(v1), np.asarray(v2)], axis=-1),
                np.stack([np.asarray(d1), np.asarray(d2)], axis=-1))

    def speed(self, t) -> np.ndarray:
        v = self.velocities(t)
        return np.hypot(v[..., 0], v[..., 1])

    def point(self, t: float) -> np.ndarray:
        self._check(t)
        return self.points(float(t))

    def velocity(self, t: float) -> np.ndarray:
        self._check(t)
        return self.velocities(float(t))

    # ------------------------------------------------------------ arc length

    def arc_length(self, t0: float | None = None, t1: float | None = None, tol: float = 1e-10) -> float:
        """Length of the curve between parameters ``t0 < t1`` (absolute error <= tol)."""
        t0 = self.interval.t_min if t0 is None else t0
        t1 = self.interval.t_max if t1 is None else t1
        self._check([t0, t1])
        if not t0 < t1:
            raise CurveError("arc_length requires t0 < t1")
        if tol <= 0:
            raise ValueError("tol must be positive")
        return quadrature.adaptive(self.speed, t0, t1, abs_tol=tol, rel_tol=0.0,
                                   initial_panels=8).integral

    def segment_length_bounds(self, nodes: np.ndarray) -> np.ndarray:
        """Upper bounds on the arc length between consecutive ``nodes``."""
        _, _, kron, err = quadrature.gk15(self.speed, nodes[:-1], nodes[1:])
        return (np.abs(kron) + err) * (1.0 + 1e-6)

    # ------------------------------------------------------------ projection

    def project(self, p, grid_n: int = 512) -> float:
        """Parameter of the point of the curve nearest to ``p``."""
        t, _ = self.project_points(np.asarray(p, dtype=float).reshape(1, 2), grid_n)
        return float(t[0])

    def project_points(self, p: np.ndarray, grid_n: int = 512) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized nearest-point projection of an ``(n, 2)`` array.

        Coarse minimum over ``grid_n`` equispaced parameters (first index on
        ties), then bisection on the stationarity condition
        ``(p - mu(t)) . mu'(t) = 0`` inside the adjacent grid cell.  Returns
        ``(t_star, distance)``.
        """
        if grid_n < 64:
            raise ValueError("grid_n must be >= 64")
        p = np.asarray(p, dtype=float)
        grid = self.interval.grid(grid_n)
        gpts = self.points(grid)
        idx, _ = _kernels.nearest_node(np.ascontiguousarray(p[:, 0]), np.ascontiguousarray(p[:, 1]),
                                       np.ascontiguousarray(gpts[:, 0]), np.ascontiguousarray(gpts[:, 1]))
        t = self._refine(p, grid, idx)
        dist = np.hypot(*(p - self.points(t)).T)
        return t, dist

    def _stationarity(self, p: np.ndarray, t: np.ndarray) -> np.ndarray:
        mu, vel = self.points_and_velocities(t)
        return np.einsum("ij,ij->i", p - mu, vel)

    def _refine(self, p: np.ndarray, grid: np.ndarray, idx: np.ndarray) -> np.ndarray:
        n = grid.shape[0]
        t = grid[idx].copy()
        if p.shape[0] == 0:
            return t
        f_here = self._stationarity(p, t)
        right = (f_here > 0) & (idx < n - 1)
        left = (f_here < 0) & (idx > 0)
        lo = np.where(right, t, np.where(left, grid[np.maximum(idx - 1, 0)], t))
        hi = np.where(right, grid[np.minimum(idx + 1, n - 1)], t)
        # bracket must show the sign change F(lo) > 0 >= F(hi)
        f_lo = np.where(left, self._stationarity(p, lo), f_here)
        f_hi = np.where(right, self._stationarity(p, hi), f_here)
        active = (right | left) & (f_lo > 0) & (f_hi <= 0)
        # without a sign change the grid node itself is kept
        while True:
            a = np.nonzero(active & ((hi - lo) > PROJECTION_TOL))[0]
            if a.size == 0:
                break
            mid = 0.5 * (lo[a] + hi[a])
            fm = self._stationarity(p[a], mid)
            pos = fm > 0
            lo[a] = np.where(pos, mid, lo[a])
            hi[a] = np.where(pos, hi[a], mid)
        return np.where(active, 0.5 * (lo + hi), t)

    # -------------------------------------------------------- reparameterize

    def reparameterize(self, phi, new_interval, var: str = "r") -> "Curve":
        """Composed curve r -> mu(phi(r)) on ``new_interval``.

        ``phi`` must be strictly increasing (checked on a grid) and map the
        new endpoints onto the current ones within 1e-9.
        """
        phi = as_expression(phi, [var])
        if not isinstance(new_interval, ParamInterval):
            new_interval = ParamInterval(*new_interval)
        values = np.asarray(phi.eval({var: new_interval.grid(MONOTONE_GRID)}))
        if not np.all(np.diff(values) > 0):
            raise CurveError("reparameterization map is not strictly increasing")
        if (abs(values[0] - self.interval.t_min) > 1e-9
                or abs(values[-1] - self.interval.t_max) > 1e-9):
            raise CurveError(
                f"reparameterization maps endpoints to [{values[0]!r}, {values[-1]!r}], "
                f"expected [{self.interval.t_min!r}, {self.interval.t_max!r}]")
        return Curve(self.mu1.substitute(self.var, phi), self.mu2.substitute(self.var, phi),
                     new_interval, var=var, check_regularity=self.check_regularity)

    @classmethod
    def from_strings(cls, mu1: str, mu2: str, t_min: float, t_max: float, var: str = "t", **kw) -> "Curve":
        return cls(mu1, mu2, ParamInterval(float(t_min), float(t_max)), var=var, **kw)
