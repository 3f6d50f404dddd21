"""Built-in problems with known answers.

* Seidenfeld's cubic string (t^3, t) with unit Gaussian noise; the two shift
  priors reproduce the uniform-in-t and uniform-in-t^3 Bayes posteriors.
* Fisher's straight line: Jeffreys gives a truncated normal.
* Fisher's circle: Jeffreys gives a von Mises law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import i0e, ndtr, ndtri
from scipy.stats import vonmises

from .engine import Scenario
from .expr import Expression, parse
from .geometry import Curve, ParamInterval
from .noise import GaussianNoise

__all__ = [
    "TruncatedGaussian1D", "VonMises", "QuadratureReference", "SeidenfeldCase",
    "seidenfeld", "seidenfeld_slab_inverse", "line_scenario", "circle_scenario",
]

SIMPSON_POINTS = 200_001


# ------------------------------------------------------------- references

@dataclass(frozen=True)
class TruncatedGaussian1D:
    mean: float
    sd: float
    interval: ParamInterval

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("sd must be positive")

    def _z(self, t):
        return (np.asarray(t, dtype=float) - self.mean) / self.sd

    @property
    def _bounds(self):
        return ndtr(self._z(self.interval.t_min)), ndtr(self._z(self.interval.t_max))

    def pdf(self, t):
        lo, hi = self._bounds
        z = self._z(t)
        out = np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * self.sd * (hi - lo))
        return np.where((z >= self._z(self.interval.t_min)) & (z <= self._z(self.interval.t_max)), out, 0.0)

    def cdf(self, t):
        lo, hi = self._bounds
        t = np.clip(np.asarray(t, dtype=float), self.interval.t_min, self.interval.t_max)
        return (ndtr(self._z(t)) - lo) / (hi - lo)

    def quantile(self, p):
        lo, hi = self._bounds
        return self.mean + self.sd * ndtri(lo + np.asarray(p, dtype=float) * (hi - lo))


@dataclass(frozen=True)
class VonMises:
    """Von Mises law on the parameter interval [0, 2*pi)."""

    mean_angle: float
    kappa: float

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ValueError("kappa must be non-negative")

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(self.kappa * (np.cos(t - self.mean_angle) - 1.0)) / (2 * math.pi * i0e(self.kappa))

    def cdf(self, t):
        """Mass of [0, t] for t in [0, 2*pi]."""
        # scipy's vonmises cdf keeps increasing by one per period outside [loc - pi, loc + pi]
        law = vonmises(self.kappa, loc=self.mean_angle)
        return law.cdf(np.asarray(t, dtype=float)) - law.cdf(0.0)


@dataclass(frozen=True)
class QuadratureReference:
    """Density proportional to an expression g(t), normalized by composite Simpson."""

    expression: Expression
    interval: ParamInterval
    n_points: int = SIMPSON_POINTS

    def __post_init__(self):
        if isinstance(self.expression, str):
            object.__setattr__(self, "expression", parse(self.expression, ["t"]))
        if self.n_points % 2 == 0:
            raise ValueError("Simpson's rule needs an odd number of points")
        t = self.interval.grid(self.n_points)
        g = self.unnormalized(t)
        h = t[1] - t[0]
        z = h / 3.0 * (g[0] + g[-1] + 4.0 * g[1:-1:2].sum() + 2.0 * g[2:-1:2].sum())
        cum = np.zeros_like(g)
        pair = h / 3.0 * (g[0:-2:2] + 4.0 * g[1:-1:2] + g[2::2])
        cum[2::2] = np.cumsum(pair)
        # odd nodes: quadratic through the pair, integrated over its first half
        cum[1:-1:2] = cum[0:-2:2] + h / 12.0 * (5.0 * g[0:-2:2] + 8.0 * g[1:-1:2] - g[2::2])
        if not (z > 0 and math.isfinite(z)):
            raise ValueError(f"reference normalizer is {z!r}; the kernel under- or overflows")
        object.__setattr__(self, "_z", float(z))
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_cum", cum / z)

    def unnormalized(self, t):
        return np.asarray(self.expression.eval({"t": np.asarray(t, dtype=float)}))

    @property
    def normalizer(self) -> float:
        return self._z

    def pdf(self, t):
        return self.unnormalized(t) / self._z

    def cdf(self, t):
        return np.interp(np.asarray(t, dtype=float), self._t, self._cum)


# ------------------------------------------------------------- seidenfeld

@dataclass(frozen=True)
class SeidenfeldCase:
    scenario: Scenario
    uniform_t: QuadratureReference    # Shift d = (1, 0)
    uniform_t3: QuadratureReference   # Shift d = (0, 1)


def seidenfeld(x=(0.0, 0.0), t_bound: float = 2.0) -> SeidenfeldCase:
    """Cubic string (t^3, t) on [-t_bound, t_bound] with N(0, I) noise."""
    if not t_bound > 0:
        raise ValueError("t_bound must be positive")
    x1, x2 = (float(v) for v in x)
    interval = ParamInterval(-float(t_bound), float(t_bound))
    curve = Curve(parse("t^3", ["t"]), parse("t", ["t"]), interval)
    scenario = Scenario(curve, GaussianNoise(), (x1, x2))
    kernel = f"exp(-((({x1!r}) - t^3)^2 + (({x2!r}) - t)^2) / 2)"
    return SeidenfeldCase(
        scenario,
        QuadratureReference(parse(kernel, ["t"]), interval),
        QuadratureReference(parse(f"3*t^2*{kernel}", ["t"]), interval),
    )


def seidenfeld_slab_inverse(d):
    """Closed-form (theta1, theta2) -> (t, s) for theta = (t^3, t) + s*d, d a coordinate axis."""
    d = tuple(float(v) for v in d)
    if d == (1.0, 0.0):
        return lambda th1, th2: (th2, th1 - th2 ** 3)
    if d == (0.0, 1.0):
        def inverse(th1, th2):
            t = np.cbrt(th1)
            return t, th2 - t
        return inverse
    raise ValueError("closed-form inverse only for d = (1, 0) or (0, 1)")


# ------------------------------------------------------------------- line

def line_scenario(p0, e, interval, x, cov=None) -> tuple[Scenario, TruncatedGaussian1D]:
    """Line p0 + t*e.  Jeffreys restricted fiducial is a truncated normal.

    With precision matrix P the exponent is quadratic in t with curvature
    e'Pe and centre e'P(x - p0) / e'Pe; for cov = sigma^2 I this is
    mean (x - p0).e and sd sigma.
    """
    p0 = np.asarray(p0, dtype=float)
    e = np.asarray(e, dtype=float)
    if abs(math.hypot(*e) - 1.0) > 1e-12:
        raise ValueError("line direction must be a unit vector")
    if not isinstance(interval, ParamInterval):
        interval = ParamInterval(*interval)
    noise = GaussianNoise(np.eye(2) if cov is None else cov)
    a1, a2, b1, b2 = (float(v) for v in (*p0, *e))
    curve = Curve(parse(f"({a1!r}) + ({b1!r})*t", ["t"]), parse(f"({a2!r}) + ({b2!r})*t", ["t"]), interval)
    scenario = Scenario(curve, noise, x)
    prec = noise.precision
    curvature = float(e @ prec @ e)
    mean = float(e @ prec @ (scenario.x - p0)) / curvature
    return scenario, TruncatedGaussian1D(mean, 1.0 / math.sqrt(curvature), interval)


# ----------------------------------------------------------------- circle

def circle_scenario(r: float, x) -> tuple[Scenario, VonMises]:
    """Circle of radius r on [0, 2*pi]; Jeffreys gives VonMises(atan2(x2, x1), r*|x|)."""
    if not r > 0:
        raise ValueError("radius must be positive")
    x1, x2 = (float(v) for v in x)
    if x1 == 0.0 and x2 == 0.0:
        raise ValueError("observation at the centre leaves the mean angle undefined")
    curve = Curve(parse(f"{float(r)!r}*cos(t)", ["t"]), parse(f"{float(r)!r}*sin(t)", ["t"]),
                  ParamInterval(0.0, 2 * math.pi))
    mean = math.atan2(x2, x1) % (2 * math.pi)
    return Scenario(curve, GaussianNoise(), (x1, x2)), VonMises(mean, float(r) * math.hypot(x1, x2))
