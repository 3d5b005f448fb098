"""Compare the compiled kernels with the numpy fallback.

Run with ``python benchmarks/bench_kernels.py [--n 100000] [--repeat 5]``.
"""

import argparse
import timeit

import numpy as np

from tailcast import _pykernels
from tailcast.distributions import GpdParams, gpd_sample

try:
    from tailcast import _ckernels
except ImportError:
    _ckernels = None


def cases(n):
    a = gpd_sample(GpdParams(0.5, 1.0, 0.0), n, 0)
    x = np.random.default_rng(1).standard_normal(n)
    return {
        "gpd_nll_derivs": lambda m: m.gpd_nll_derivs(a, 0.5, 2),
        "gpd_nll_derivs (series)": lambda m: m.gpd_nll_derivs(a[:1000], 1e-7, 2),
        "gpd_ad_statistic": lambda m: m.gpd_ad_statistic(np.sort(a), 0.5),
        "acf": lambda m: m.acf(x, 40),
        "record_counts": lambda m: m.record_counts(x),
    }


def best_time(fn, module, repeat):
    number = 1
    while timeit.timeit(lambda: fn(module), number=number) < 0.2:
        number *= 2
    return min(timeit.repeat(lambda: fn(module), number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    print(f"n = {args.n}")
    print(f"{'kernel':<26}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for name, fn in cases(args.n).items():
        t_py = best_time(fn, _pykernels, args.repeat)
        if _ckernels is None:
            print(f"{name:<26}{t_py * 1e3:>14.3f}{'n/a':>14}{'':>10}")
            continue
        t_c = best_time(fn, _ckernels, args.repeat)
        print(f"{name:<26}{t_py * 1e3:>14.3f}{t_c * 1e3:>14.3f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
