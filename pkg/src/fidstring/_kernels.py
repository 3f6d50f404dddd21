"""Hot inner loops, compiled with numba when available.

Set ``FIDSTRING_DISABLE_NUMBA=1`` to force the pure-numpy implementations.
Both paths perform the same floating-point operations in the same order, so
they return bit-identical results; ``tests/test_kernels.py`` checks this.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("FIDSTRING_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    import numba
    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

_CHUNK = 1 << 14


# ---------------------------------------------------------------- numpy path

def nearest_node_np(px, py, gx, gy):
    """Index of the nearest tabulated node (first on ties) and its squared distance."""
    n = px.shape[0]
    idx = np.empty(n, dtype=np.int64)
    d2 = np.empty(n)
    step = max(1, _CHUNK * 64 // max(1, gx.shape[0]))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        dx = px[lo:hi, None] - gx[None, :]
        dy = py[lo:hi, None] - gy[None, :]
        dist = dx * dx + dy * dy
        j = np.argmin(dist, axis=1)
        idx[lo:hi] = j
        d2[lo:hi] = dist[np.arange(hi - lo), j]
    return idx, d2


def hermite_eval_np(x, y, m, t):
    """Cubic Hermite interpolant through (x, y) with slopes m, evaluated at t."""
    n = x.shape[0]
    i = np.clip(np.searchsorted(x, t, side="right") - 1, 0, n - 2)
    return _hermite_segment(x[i], x[i + 1], y[i], y[i + 1], m[i], m[i + 1], t)


def _hermite_segment(x0, x1, y0, y1, m0, m1, t):
    h = x1 - x0
    s = (t - x0) / h
    s2 = s * s
    s3 = s2 * s
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    # increment form: flat segments return y0 exactly; clamp keeps rounding inside the knots
    out = y0 + (y1 - y0) * h01 + h * (h10 * m0 + h11 * m1)
    return np.minimum(np.maximum(out, y0), y1)


def hermite_inverse_np(x, y, m, p, tol):
    """Bisection for H(t) = p inside the knot interval bracketing p."""
    n = x.shape[0]
    i = np.clip(np.searchsorted(y, p, side="right") - 1, 0, n - 2)
    x0, x1, y0, y1, m0, m1 = x[i], x[i + 1], y[i], y[i + 1], m[i], m[i + 1]
    lo = x0.copy()
    hi = x1.copy()
    active = (hi - lo) > tol
    while active.any():
        a = np.nonzero(active)[0]
        mid = 0.5 * (lo[a] + hi[a])
        below = _hermite_segment(x0[a], x1[a], y0[a], y1[a], m0[a], m1[a], mid) < p[a]
        lo[a] = np.where(below, mid, lo[a])
        hi[a] = np.where(below, hi[a], mid)
        active[a] = (hi[a] - lo[a]) > tol
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)

    @_jit
    def nearest_node_nb(px, py, gx, gy):
        n = px.shape[0]
        g = gx.shape[0]
        idx = np.empty(n, dtype=np.int64)
        d2 = np.empty(n)
        for k in range(n):
            best = np.inf
            bj = 0
            x = px[k]
            y = py[k]
            for j in range(g):
                dx = x - gx[j]
                dy = y - gy[j]
                dist = dx * dx + dy * dy
                if dist < best:
                    best = dist
                    bj = j
            idx[k] = bj
            d2[k] = best
        return idx, d2

    @_jit
    def _segment_nb(x0, x1, y0, y1, m0, m1, t):
        h = x1 - x0
        s = (t - x0) / h
        s2 = s * s
        s3 = s2 * s
        h10 = s3 - 2.0 * s2 + s
        h01 = -2.0 * s3 + 3.0 * s2
        h11 = s3 - s2
        out = y0 + (y1 - y0) * h01 + h * (h10 * m0 + h11 * m1)
        return min(max(out, y0), y1)

    @_jit
    def hermite_eval_nb(x, y, m, t):
        n = x.shape[0]
        out = np.empty(t.shape[0])
        for k in range(t.shape[0]):
            i = np.searchsorted(x, t[k], side="right") - 1
            i = min(max(i, 0), n - 2)
            out[k] = _segment_nb(x[i], x[i + 1], y[i], y[i + 1], m[i], m[i + 1], t[k])
        return out

    @_jit
    def hermite_inverse_nb(x, y, m, p, tol):
        n = x.shape[0]
        out = np.empty(p.shape[0])
        for k in range(p.shape[0]):
            i = np.searchsorted(y, p[k], side="right") - 1
            i = min(max(i, 0), n - 2)
            lo = x[i]
            hi = x[i + 1]
            while (hi - lo) > tol:
                mid = 0.5 * (lo + hi)
                if _segment_nb(x[i], x[i + 1], y[i], y[i + 1], m[i], m[i + 1], mid) < p[k]:
                    lo = mid
                else:
                    hi = mid
            out[k] = 0.5 * (lo + hi)
        return out

    nearest_node = nearest_node_nb
    hermite_eval = hermite_eval_nb
    hermite_inverse = hermite_inverse_nb
else:
    nearest_node = nearest_node_np
    hermite_eval = hermite_eval_np
    hermite_inverse = hermite_inverse_np


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
