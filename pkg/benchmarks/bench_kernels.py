"""Time the compiled kernels against the numpy twin.

    python3 benchmarks/bench_kernels.py [--n 600] [--d 40] [--repeat 3]
"""
import argparse
import timeit

import numpy as np

from cohortclust import kernels


def cases(n, d, k, seed=0):
    rng = np.random.default_rng(seed)
    x = (rng.random((n, d)) < 0.5).astype(np.float64)
    init = x[rng.choice(n, k, replace=False)].copy()
    D = kernels.backends()["python"].pairwise_euclidean(x)
    return {
        "pairwise_euclidean": lambda m: m.pairwise_euclidean(x),
        "lloyd": lambda m: m.lloyd(x, init.copy(), 300),
        "pam_build+swap": lambda m: m.pam_swap(D, m.pam_build(D, k), 100, 1e-10),
        "agglomerate(average)": lambda m: m.agglomerate(D, k, 2),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=600)
    ap.add_argument("--d", type=int, default=40)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    mods = kernels.backends()
    if "cython" not in mods:
        print("compiled backend not built; only the numpy twin is timed")
    print(f"n={args.n} d={args.d} k={args.k}, best of {args.repeat}")
    print(f"{'kernel':<22}" + "".join(f"{name:>12}" for name in mods) + ("     speedup" if len(mods) > 1 else ""))
    for label, fn in cases(args.n, args.d, args.k).items():
        times = {name: min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat)) for name, m in mods.items()}
        row = f"{label:<22}" + "".join(f"{times[name] * 1e3:>10.1f}ms" for name in mods)
        if len(mods) > 1:
            row += f"{times['python'] / times['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
