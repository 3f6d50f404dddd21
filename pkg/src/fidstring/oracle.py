"""Monte Carlo conditioning oracles for the restricted fiducial.

Both oracles draw the unrestricted fiducial theta = x - u and keep draws that
land (nearly) on the string:

* :func:`slab_oracle` writes theta = mu(t) + s*d and keeps |s| < eps, which
  converges to the :class:`~fidstring.priors.Shift` weight for direction d;
* :func:`tube_oracle` keeps draws within Euclidean distance eps of the curve,
  which converges to the Jeffreys weight.

Proposals are processed in fixed-size batches, each with its own child of
``SeedSequence(seed)``, so results do not depend on the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .engine import Scenario
from .errors import InversionFailure

__all__ = ["OracleResult", "ks_distance", "slab_oracle", "tube_oracle"]

BATCH_SIZE = 1 << 20
PREFILTER_NODES = 256
SLAB_GRID = 4096
MAX_FAILURE_FRACTION = 1e-3
ROOT_TOL = 1e-13


def ks_distance(samples, dist) -> float:
    """One-sample Kolmogorov-Smirnov statistic of ``samples`` against ``dist.cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("samples must be non-empty")
    cdf = np.asarray(dist.cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    return float(min(1.0, max(d_plus, d_minus, 0.0)))


@dataclass(frozen=True)
class OracleResult:
    kind: str
    accepted_t: np.ndarray = field(repr=False)
    n_proposed: int
    epsilon: float
    seed: int
    n_inversion_failures: int = 0
    ks_distance: Optional[float] = None

    @property
    def n_accepted(self) -> int:
        return int(self.accepted_t.size)

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_proposed

    def compare(self, dist) -> "OracleResult":
        """Copy with ``ks_distance`` measured against ``dist`` (anything with a cdf)."""
        ks = ks_distance(self.accepted_t, dist) if self.n_accepted else float("nan")
        return OracleResult(self.kind, self.accepted_t, self.n_proposed, self.epsilon, self.seed,
                            self.n_inversion_failures, ks)

    def report(self) -> dict:
        return {
            "kind": self.kind,
            "epsilon": self.epsilon,
            "n_proposed": self.n_proposed,
            "n_accepted": self.n_accepted,
            "acceptance_rate": self.acceptance_rate,
            "ks_distance": self.ks_distance,
            "seed": self.seed,
            "n_inversion_failures": self.n_inversion_failures,
        }


def _run_batches(work: Callable, n_proposed: int, seed: int, batch_size: int, workers: int):
    n_batches = -(-n_proposed // batch_size)
    streams = np.random.SeedSequence(seed).spawn(n_batches)
    sizes = [min(batch_size, n_proposed - k * batch_size) for k in range(n_batches)]
    jobs = [(np.random.Generator(np.random.PCG64(ss)), size) for ss, size in zip(streams, sizes)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: work(*job), jobs))
    else:
        results = [work(*job) for job in jobs]
    accepted = np.concatenate([r[0] for r in results]) if results else np.empty(0)
    failures = sum(r[1] for r in results)
    return accepted, failures


def _check_common(epsilon: float, n_proposed: int) -> None:
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError("epsilon must be positive: the exact condition has probability zero")
    if n_proposed < 1:
        raise ValueError("n_proposed must be >= 1")


# --------------------------------------------------------------------- tube

def tube_oracle(
    scenario: Scenario,
    epsilon: float,
    n_proposed: int,
    seed: int,
    grid_n: int = 512,
    reference=None,
    batch_size: int = BATCH_SIZE,
    workers: int = 1,
) -> OracleResult:
    """Accept theta = x - u when its distance to the curve is below ``epsilon``.

    The recorded parameter is the nearest-point projection.  A coarse
    tabulation with a provable lower bound on the distance discards far
    proposals before the exact projection.
    """
    _check_common(epsilon, n_proposed)
    curve = scenario.curve
    coarse_t = curve.interval.grid(PREFILTER_NODES)
    coarse = curve.points(coarse_t)
    cx = np.ascontiguousarray(coarse[:, 0])
    cy = np.ascontiguousarray(coarse[:, 1])
    # every curve point is within half a segment length of a node
    margin = 0.5 * float(np.max(curve.segment_length_bounds(coarse_t)))
    cutoff = (epsilon + margin) ** 2
    x = scenario.x

    def work(rng, size):
        theta = x - scenario.noise.sample(rng, size)
        _, d2 = _kernels.nearest_node(np.ascontiguousarray(theta[:, 0]),
                                      np.ascontiguousarray(theta[:, 1]), cx, cy)
        cand = theta[d2 < cutoff]
        if cand.shape[0] == 0:
            return np.empty(0), 0
        t, dist = curve.project_points(cand, grid_n)
        return t[dist < epsilon], 0

    accepted, _ = _run_batches(work, n_proposed, seed, batch_size, workers)
    result = OracleResult("tube", accepted, n_proposed, float(epsilon), seed)
    return result.compare(reference) if reference is not None else result


# --------------------------------------------------------------------- slab

class _SlabInverter:
    """Numerical inverse of (t, s) -> mu(t) + s*d via the cross-product alignment.

    theta = mu(t) + s*d  <=>  cross(theta, d) = cross(mu(t), d), and then
    s = (theta - mu(t)) . d / |d|^2.
    """

    def __init__(self, scenario: Scenario, d, grid_n: int):
        self.curve = scenario.curve
        self.d1, self.d2 = float(d[0]), float(d[1])
        self.dd = self.d1 * self.d1 + self.d2 * self.d2
        self.t = self.curve.interval.grid(grid_n)
        self.h = self.t[1] - self.t[0]
        mu, vel = self.curve.points_and_velocities(self.t)
        self.G = self._cross(mu[:, 0], mu[:, 1])
        self.s_margin = 2.0 * self.h * float(np.max(np.abs(vel @ np.array([self.d1, self.d2])))) / self.dd
        step = np.sign(np.diff(self.G))
        # maximal runs of strictly monotone cells
        self.pieces = []
        k = 0
        while k < step.size:
            if step[k] == 0:
                k += 1
                continue
            j = k
            while j + 1 < step.size and step[j + 1] == step[k]:
                j += 1
            self.pieces.append((k, j + 1, step[k] > 0))
            k = j + 1

    def _cross(self, a1, a2):
        return a1 * self.d2 - a2 * self.d1

    def __call__(self, theta: np.ndarray, epsilon: float):
        c = self._cross(theta[:, 0], theta[:, 1])
        n = c.size
        count = np.zeros(n, dtype=np.int64)
        lo_idx = np.zeros(n, dtype=np.int64)
        for k0, k1, inc in self.pieces:
            g = self.G[k0:k1 + 1]
            gmin, gmax = (g[0], g[-1]) if inc else (g[-1], g[0])
            inside = (c >= gmin) & (c <= gmax)
            count += inside
            idx = np.nonzero(inside)[0]
            if idx.size:
                key = g if inc else -g
                target = c[idx] if inc else -c[idx]
                j = np.clip(np.searchsorted(key, target, side="right") - 1, 0, k1 - k0 - 1)
                lo_idx[idx] = k0 + j
        failures = int(np.count_nonzero(count > 1))
        ok = np.nonzero(count == 1)[0]
        if ok.size == 0:
            return np.empty(0), failures
        c_ok = c[ok]
        th = theta[ok]
        j = lo_idx[ok]
        t0, t1 = self.t[j], self.t[j + 1]
        g0, g1 = self.G[j], self.G[j + 1]
        t_lin = t0 + (c_ok - g0) / (g1 - g0) * (t1 - t0)
        s_lin = self._s(th, t_lin)
        near = np.abs(s_lin) < epsilon + self.s_margin
        th, c_ok, t0, t1 = th[near], c_ok[near], t0[near], t1[near]
        increasing = self.G[j[near] + 1] > self.G[j[near]]
        lo, hi = t0.copy(), t1.copy()
        while True:
            a = np.nonzero((hi - lo) > ROOT_TOL)[0]
            if a.size == 0:
                break
            mid = 0.5 * (lo[a] + hi[a])
            mu = self.curve.points(mid)
            below = (self._cross(mu[:, 0], mu[:, 1]) < c_ok[a]) == increasing[a]
            lo[a] = np.where(below, mid, lo[a])
            hi[a] = np.where(below, hi[a], mid)
        t = 0.5 * (lo + hi)
        s = self._s(th, t)
        return t[np.abs(s) < epsilon], failures

    def _s(self, theta, t):
        mu = self.curve.points(t)
        r = theta - mu
        return (r[:, 0] * self.d1 + r[:, 1] * self.d2) / self.dd


def slab_oracle(
    scenario: Scenario,
    d,
    epsilon: float,
    n_proposed: int,
    seed: int,
    inverse: Callable | None = None,
    reference=None,
    grid_n: int = SLAB_GRID,
    batch_size: int = BATCH_SIZE,
    workers: int = 1,
) -> OracleResult:
    """Accept theta = x - u when theta = mu(t) + s*d with |s| < ``epsilon``.

    ``inverse(theta1, theta2) -> (t, s)`` may supply a closed-form inverse;
    otherwise the map is inverted numerically.  Proposals whose inverse is
    not unique count as inversion failures; more than 0.1% of proposals
    failing aborts the run with :class:`InversionFailure`.
    """
    _check_common(epsilon, n_proposed)
    d = np.asarray(d, dtype=float)
    if d.shape != (2,) or not np.all(np.isfinite(d)) or not np.any(d != 0):
        raise ValueError("slab direction d must be a non-zero 2-vector")
    x = scenario.x
    interval = scenario.curve.interval

    if inverse is None:
        inverter = _SlabInverter(scenario, d, grid_n)

        def work(rng, size):
            return inverter(x - scenario.noise.sample(rng, size), epsilon)
    else:
        def work(rng, size):
            theta = x - scenario.noise.sample(rng, size)
            t, s = inverse(theta[:, 0], theta[:, 1])
            bad = ~(np.isfinite(t) & np.isfinite(s))
            keep = ~bad & (np.abs(s) < epsilon) & (t >= interval.t_min) & (t <= interval.t_max)
            return t[keep], int(np.count_nonzero(bad))

    accepted, failures = _run_batches(work, n_proposed, seed, batch_size, workers)
    if failures > MAX_FAILURE_FRACTION * n_proposed:
        raise InversionFailure(
            f"slab inversion failed for {failures} of {n_proposed} proposals "
            "(the shift section is not invertible)")
    result = OracleResult("slab", accepted, n_proposed, float(epsilon), seed, failures)
    return result.compare(reference) if reference is not None else result
