"""Time the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import timeit

import numpy as np

from npprio import _purepy

try:
    from npprio import _kernels
except ImportError:
    _kernels = None


def cases():
    r, r_lo = 0.9, 0.45
    d = ((1 - r) ** 2 + 4 * r_lo) ** 0.5
    rng = np.random.default_rng(0)
    phi0 = rng.random(1001)
    lam = 0.5 ** np.arange(1001)
    expo = rng.standard_exponential(200_000)
    unif = rng.random(200_000)

    def sim(mod):
        state = np.zeros(3, dtype=np.int64)
        mod.simulate_chunk(state, expo, unif, 2.25, 1.125, 1.0, 3, 73, np.zeros((74, 74)), np.zeros(3), True)

    return {
        "scaled_marginal n=1000": lambda mod: mod.scaled_marginal(r, 1.0, r_lo / d, 1.2, 1000),
        "lambda_series n=1000": lambda mod: mod.lambda_series(-1.0, 1.0 / d, r_lo, 0.5 * (1 + r + d), 1000),
        "convolution_chain 1001x200": lambda mod: mod.convolution_chain(phi0, lam, 200),
        "binomial_cdf_table 1001x2000": lambda mod: mod.binomial_cdf_table(0.7, 1000, 2000, True),
        "simulate_chunk 2e5 events": sim,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels are not built; only the fallback can be timed")
    print(f"{'kernel':32s} {'python [s]':>12s} {'cython [s]':>12s} {'speed-up':>9s}")
    for name, fn in cases().items():
        t_py = min(timeit.repeat(lambda: fn(_purepy), number=1, repeat=args.repeat))
        if _kernels is None:
            print(f"{name:32s} {t_py:12.4f} {'-':>12s} {'-':>9s}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat))
        print(f"{name:32s} {t_py:12.4f} {t_cy:12.4f} {t_py / t_cy:9.1f}")


if __name__ == "__main__":
    main()
