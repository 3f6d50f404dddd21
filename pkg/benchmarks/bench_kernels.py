"""Compare the numba and pure-numpy kernels on oracle-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both paths are checked for bit-identical output before timing.
"""
import argparse
import sys
import timeit

import numpy as np

from fidstring import _kernels
from fidstring.engine import normalize
from fidstring.priors import Jeffreys
from fidstring.scenarios import seidenfeld


def cases():
    rng = np.random.default_rng(0)
    # tube prefilter: one oracle batch against the 256-node tabulation
    px, py = rng.normal(size=(2, 1 << 20))
    gt = np.linspace(-2, 2, 256)
    gx, gy = np.ascontiguousarray(gt ** 3), np.ascontiguousarray(gt)
    yield "nearest_node 1M x 256", (px, py, gx, gy), "nearest_node"

    rf = normalize(seidenfeld((1, 1)).scenario, Jeffreys())
    x, y, m = rf.grid, rf.grid_cdf, rf._slopes
    t = rng.uniform(-2, 2, 1 << 20)
    yield "hermite_eval 1M", (x, y, m, t), "hermite_eval"
    p = rng.random(1 << 18)
    yield "hermite_inverse 256k", (x, y, m, p, 1e-10), "hermite_inverse"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled (FIDSTRING_DISABLE_NUMBA); nothing to compare")
        return 1
    print(f"{'kernel':<24}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}  identical")
    for label, inputs, name in cases():
        f_np = getattr(_kernels, name + "_np")
        f_nb = getattr(_kernels, name + "_nb")
        a, b = f_np(*inputs), f_nb(*inputs)  # also warms up the jit
        a, b = (a if isinstance(a, tuple) else (a,)), (b if isinstance(b, tuple) else (b,))
        same = all(np.array_equal(u, v) for u, v in zip(a, b))
        t_np = min(timeit.repeat(lambda: f_np(*inputs), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*inputs), number=1, repeat=args.repeat))
        print(f"{label:<24}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}x  {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
