"""Time the compiled ℓ_p minimizer against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--rows 20000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from linfest import kernels
from linfest.posterior import gauss_hermite_measure, mixture_posterior_arrays
from linfest.signal_model import PriorSpec


def workload(rows, seed=0):
    """Posterior measures of a sparse Gaussian prior at realistic pseudo-observations."""
    prior = PriorSpec.sparse_gaussian(0.05, 1.0)
    rng = np.random.default_rng(seed)
    x = np.where(rng.random(rows) < 0.05, rng.standard_normal(rows), 0.0)
    q = x + np.sqrt(5e-4) * rng.standard_normal(rows)
    return gauss_hermite_measure(*mixture_posterior_arrays(prior, q, 5e-4))


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    pts, wts = workload(args.rows)
    print(f"rows={args.rows} points/row={pts.shape[1]} compiled={kernels.lp_minimize_compiled is not None}")
    for p in (2.5, 5.0, 10.0, 15.0):
        t_py, r_py = best_time(lambda: kernels.lp_minimize_python(pts, wts, p, 1e-12), args.repeat)
        line = f"p={p:<5g} numpy {t_py:8.3f}s"
        if kernels.lp_minimize_compiled is not None:
            t_c, r_c = best_time(lambda: kernels.lp_minimize_compiled(pts, wts, p, 1e-12), args.repeat)
            diff = float(np.max(np.abs(r_c[0] - r_py[0])))
            line += f"  cython {t_c:8.3f}s  speedup {t_py / t_c:5.1f}x  max|diff| {diff:.1e}"
        print(line)


if __name__ == "__main__":
    main()
