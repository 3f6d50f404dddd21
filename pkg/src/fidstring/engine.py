"""Restricted fiducial on the string.

The unnormalized density on the parameter interval is

    g(t) = f(x - mu(t)) * h(t)

with f the noise density and h a prior weight.  :func:`normalize` integrates
g adaptively, keeps every quadrature node, and tabulates the CDF on those
nodes; :class:`RestrictedFiducial` then offers pdf, cdf, quantiles,
inverse-CDF sampling and 1-D pushforwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels, quadrature
from .errors import NodeBudgetError, NumericalError, UnderflowError
from .expr import as_expression
from .geometry import Curve, ParamInterval
from .noise import GaussianNoise
from .priors import PriorWeight

__all__ = ["Scenario", "RestrictedFiducial", "unnormalized_density", "log_unnormalized_density",
           "normalize"]

SCOUT_NODES = 512
INITIAL_PANELS = 64
QUANTILE_TOL = 1e-10
Z_FLOOR = 1e-300
RESHIFT_ROUNDS = 4
RESHIFT_MARGIN = 50.0


@dataclass(frozen=True)
class Scenario:
    """Curve, noise law and the fixed observation x."""

    curve: Curve
    noise: GaussianNoise
    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.shape != (2,) or not np.all(np.isfinite(x)):
            raise ValueError("observation x must be two finite numbers")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    def residuals(self, t) -> np.ndarray:
        return self.x - self.curve.points(t)


def _check_in(interval: ParamInterval, t) -> None:
    if not interval.contains(t):
        raise ValueError(f"t outside [{interval.t_min}, {interval.t_max}]")


def unnormalized_density(scenario: Scenario, prior: PriorWeight, t):
    """f(x - mu(t)) * h(t)."""
    _check_in(scenario.curve.interval, t)
    t = np.asarray(t, dtype=float)
    out = np.asarray(scenario.noise.density(scenario.residuals(t))) * prior.weight(scenario.curve, t)
    return float(out) if out.ndim == 0 else out


def log_unnormalized_density(scenario: Scenario, prior: PriorWeight, t):
    t = np.asarray(t, dtype=float)
    logf = np.asarray(scenario.noise.log_density(scenario.residuals(t)))
    h = np.asarray(prior.weight(scenario.curve, t))
    with np.errstate(divide="ignore"):
        return logf + np.log(h)


def _monotone_slopes(x: np.ndarray, y: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Fritsch-Carlson limiting of Hermite slopes so the interpolant cannot overshoot."""
    delta = np.diff(y) / np.diff(x)
    m = np.maximum(m, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = m[:-1] / delta
        beta = m[1:] / delta
        radius = np.hypot(alpha, beta)
        tau = np.where(delta > 0, np.where(radius > 3.0, 3.0 / radius, 1.0), 0.0)
    scale = np.ones_like(m)
    scale[:-1] = tau
    scale[1:] = np.minimum(scale[1:], tau)
    return m * scale


@dataclass(frozen=True, eq=False)
class RestrictedFiducial:
    """Normalized density of t on the string; immutable after :func:`normalize`."""

    scenario: Scenario
    prior: PriorWeight
    interval: ParamInterval
    Z: float
    log_Z: float
    tol: float
    grid: np.ndarray
    grid_pdf: np.ndarray
    grid_cdf: np.ndarray
    panels: quadrature.PanelSet = field(repr=False)
    _log_shift: float = field(repr=False)
    _scaled_mass: float = field(repr=False)
    _slopes: np.ndarray = field(repr=False)

    # ------------------------------------------------------------- density

    def _scaled(self, t: np.ndarray) -> np.ndarray:
        return np.exp(log_unnormalized_density(self.scenario, self.prior, t) - self._log_shift)

    def pdf(self, t):
        """Exact re-evaluation of g(t) / Z."""
        _check_in(self.interval, t)
        out = self._scaled(np.asarray(t, dtype=float)) / self._scaled_mass
        return float(out) if np.ndim(out) == 0 else out

    def cdf(self, t):
        """Monotone cubic Hermite interpolation of the tabulated CDF, clamped to [0, 1]."""
        _check_in(self.interval, t)
        arr = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        out = _kernels.hermite_eval(self.grid, self.grid_cdf, self._slopes, arr)
        out = np.clip(out, 0.0, 1.0).reshape(np.shape(t))
        return float(out) if out.ndim == 0 else out

    def quantile(self, p):
        """Inverse CDF by bisection to 1e-10 in t."""
        arr = np.asarray(p, dtype=float)
        if not np.all((arr > 0.0) & (arr < 1.0)):
            raise ValueError("quantile level must lie in (0, 1)")
        out = self._invert(np.atleast_1d(arr).ravel()).reshape(arr.shape)
        return float(out) if out.ndim == 0 else out

    def _invert(self, p: np.ndarray) -> np.ndarray:
        return _kernels.hermite_inverse(self.grid, self.grid_cdf, self._slopes,
                                        np.ascontiguousarray(p, dtype=float), QUANTILE_TOL)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` inverse-CDF draws."""
        if n < 1:
            raise ValueError("n must be >= 1")
        return self._invert(rng.random(n))

    # ---------------------------------------------------------- summaries

    def mean(self) -> float:
        num = np.sum(self.panels.weights() * self.panels.nodes * self.panels.values)
        return float(num / self._scaled_mass)

    def mode(self) -> float:
        k = int(np.argmax(self.grid_pdf))
        lo = self.grid[max(k - 1, 0)]
        hi = self.grid[min(k + 1, self.grid.size - 1)]
        if hi <= lo:
            return float(self.grid[k])
        res = minimize_scalar(lambda s: -self._scaled(np.asarray(s)), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        best = float(res.x)
        if self._scaled(np.asarray(best)) >= self._scaled(np.asarray(self.grid[k])):
            return best
        return float(self.grid[k])

    def total_mass(self, tol: float = 1e-12) -> float:
        """Re-integrate the normalized pdf on a staggered panel layout.

        Breakpoints sit at the midpoints of the normalization panels, so no
        panel or node is shared while narrow peaks stay resolved.
        """
        edges = self.panels.edges
        mids = 0.5 * (edges[:-1] + edges[1:])
        return quadrature.adaptive(self.pdf, self.interval.t_min, self.interval.t_max,
                                   rel_tol=tol, breakpoints=mids).integral

    # --------------------------------------------------------- pushforward

    def pushforward_pdf(self, phi, y, grid_n: int = 1000):
        """Density of phi(T) at ``y`` for strictly monotone ``phi``: pdf(t) / |phi'(t)|."""
        var = self.scenario.curve.var
        phi = as_expression(phi, [var])
        ts = self.interval.grid(grid_n)
        vals = np.asarray(phi.eval({var: ts}))
        steps = np.diff(vals)
        if np.all(steps > 0):
            increasing = True
        elif np.all(steps < 0):
            increasing = False
        else:
            raise ValueError("pushforward map is not strictly monotone on the interval")
        y_arr = np.asarray(y, dtype=float)
        flat = np.atleast_1d(y_arr).ravel()
        y_lo, y_hi = min(vals[0], vals[-1]), max(vals[0], vals[-1])
        if np.any((flat < y_lo) | (flat > y_hi)):
            raise ValueError(f"y outside the image [{y_lo!r}, {y_hi!r}]")
        lo = np.full(flat.shape, self.interval.t_min)
        hi = np.full(flat.shape, self.interval.t_max)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.all((mid == lo) | (mid == hi)):
                break
            below = np.asarray(phi.eval({var: mid})) < flat
            if not increasing:
                below = ~below
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        t = 0.5 * (lo + hi)
        _, dphi = phi.eval_dual({var: t}, var)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.pdf(t) / np.abs(dphi)).reshape(y_arr.shape)
        return float(out) if out.ndim == 0 else out

    # --------------------------------------------------------------- table

    def table(self, n: int) -> dict:
        """pdf/cdf and curve points on ``n`` equispaced parameters."""
        t = self.interval.grid(n)
        pts = self.scenario.curve.points(t)
        cdf = self.cdf(t)
        cdf[0], cdf[-1] = 0.0, 1.0
        return {"t": t, "theta1": pts[:, 0], "theta2": pts[:, 1], "pdf": self.pdf(t), "cdf": cdf}


def normalize(
    scenario: Scenario,
    prior: PriorWeight,
    interval: ParamInterval | None = None,
    tol: float = 1e-10,
    max_nodes: int = 200_000,
) -> RestrictedFiducial:
    """Normalize g over ``interval`` (default: the whole string).

    Adaptive Gauss-Kronrod to absolute error ``tol * Z``.  The likelihood is
    handled in log space, shifted by its maximum on a scouting grid, so
    observations far from the string do not underflow prematurely.  Raises
    :class:`UnderflowError` if Z < 1e-300 and :class:`NodeBudgetError` if the
    node budget runs out.
    """
    if not 1e-12 <= tol <= 1e-3:
        raise ValueError("tol must lie in [1e-12, 1e-3]")
    curve_iv = scenario.curve.interval
    if interval is None:
        interval = curve_iv
    elif not isinstance(interval, ParamInterval):
        interval = ParamInterval(*interval)
    if interval.t_min < curve_iv.t_min or interval.t_max > curve_iv.t_max:
        raise ValueError("normalization interval must lie inside the curve interval")

    scout = log_unnormalized_density(scenario, prior, interval.grid(SCOUT_NODES))
    finite = scout[np.isfinite(scout)]
    if finite.size == 0:
        raise UnderflowError("density vanishes on the scouting grid; rescale the problem "
                             "or move the observation closer to the string")
    shift = float(finite.max())

    def scaled(t):
        # overflow is possible before a re-shift and is detected below
        with np.errstate(over="ignore"):
            return np.exp(log_unnormalized_density(scenario, prior, t) - shift)

    for _ in range(RESHIFT_ROUNDS):
        try:
            panels = quadrature.adaptive(scaled, interval.t_min, interval.t_max, rel_tol=tol,
                                         initial_panels=INITIAL_PANELS, max_nodes=max_nodes)
        except NodeBudgetError as exc:
            raise NodeBudgetError(f"normalization: {exc}") from None
        # a peak narrower than the scouting grid can sit far above the scouted maximum
        logs = log_unnormalized_density(scenario, prior, panels.nodes.ravel())
        top = float(np.max(logs[np.isfinite(logs)], initial=-np.inf))
        if top <= shift + RESHIFT_MARGIN:
            break
        shift = top

    node_cum, edge_cum = panels.running_integrals()
    mass = float(edge_cum[-1])
    if not math.isfinite(mass):
        raise NumericalError("unnormalized density is not finite on the interval")
    if not mass > 0:
        raise UnderflowError("normalizing constant is zero; rescale the problem")
    log_z = shift + math.log(mass)
    if log_z < math.log(Z_FLOOR):
        raise UnderflowError(
            f"normalizing constant exp({log_z:.1f}) is below 1e-300; the observation is too "
            "far from the string for double precision, rescale the problem")

    edges = panels.edges
    edge_vals = scaled(edges)
    m = edges.size - 1
    grid = np.concatenate([np.column_stack([edges[:-1], panels.nodes]).ravel(), edges[-1:]])
    vals = np.concatenate([np.column_stack([edge_vals[:-1], panels.values]).ravel(), edge_vals[-1:]])
    cum = np.concatenate([np.column_stack([edge_cum[:-1], node_cum]).ravel(), edge_cum[-1:]])
    assert grid.size == 16 * m + 1

    keep = np.concatenate([[True], np.diff(grid) > 0])
    grid, vals, cum = grid[keep], vals[keep], cum[keep]
    cdf = np.maximum.accumulate(np.clip(cum / mass, 0.0, 1.0))
    cdf[0], cdf[-1] = 0.0, 1.0
    pdf = vals / mass
    slopes = _monotone_slopes(grid, cdf, pdf)
    for arr in (grid, pdf, cdf, slopes):
        arr.setflags(write=False)
    return RestrictedFiducial(
        scenario=scenario, prior=prior, interval=interval, Z=math.exp(log_z), log_Z=log_z,
        tol=tol, grid=grid, grid_pdf=pdf, grid_cdf=cdf, panels=panels,
        _log_shift=shift, _scaled_mass=mass, _slopes=slopes,
    )
