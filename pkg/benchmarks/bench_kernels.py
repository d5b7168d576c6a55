"""Compare the compiled kernel loops with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from thermolab import _kernels_py
from thermolab.kernels import kernel_spec
from thermolab.params import UNIT, derive
from thermolab.quadrature import NODES, WEIGHTS

try:
    from thermolab import _ckernels
except ImportError:
    _ckernels = None


def cases():
    dp = derive(UNIT)
    g1 = kernel_spec("G1", dp)
    g2 = kernel_spec("G2", dp)
    r = np.linspace(1e-6, 1.0, 1_000_000)
    t = 1e4
    yield "kernel_values G1 (1e6 points)", "kernel_values", (r, t, *g1.args(), g1.sigma)
    yield "kernel_values G2 (1e6 points)", "kernel_values", (r, t, *g2.args(), g2.sigma)
    yield ("panel_sum G1 (2e5 panels x 8 nodes)", "panel_sum",
           (0.0, 1.0 / 200_000, 200_000, t, *g1.args(), 0.0, NODES, WEIGHTS))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _ckernels is None:
        print("compiled backend not built; only the numpy timings are shown")
    print(f"{'case':40s} {'numpy [ms]':>12s} {'cython [ms]':>12s} {'speed-up':>9s} {'max rel diff':>13s}")
    for label, fn, call_args in cases():
        py = getattr(_kernels_py, fn)
        t_py = min(timeit.repeat(lambda: py(*call_args), number=1, repeat=args.repeat))
        ref = py(*call_args)
        if _ckernels is None:
            print(f"{label:40s} {1e3 * t_py:12.2f} {'-':>12s}")
            continue
        cy = getattr(_ckernels, fn)
        t_cy = min(timeit.repeat(lambda: cy(*call_args), number=1, repeat=args.repeat))
        got = cy(*call_args)
        diff = np.max(np.abs(np.asarray(got) - ref) / np.maximum(np.abs(ref), 1e-300))
        print(f"{label:40s} {1e3 * t_py:12.2f} {1e3 * t_cy:12.2f} {t_py / t_cy:8.1f}x {diff:13.2e}")


if __name__ == "__main__":
    main()
