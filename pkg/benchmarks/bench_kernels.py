"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel with the best-of-N wall time of each backend and
the speedup.  Exits with status 1 if the compiled extension is not built.
"""

import argparse
import sys
import timeit

import numpy as np

from lavarnet import _kernels_py

try:
    from lavarnet import _kernels as compiled
except ImportError:
    compiled = None


def cases():
    rng = np.random.default_rng(0)
    history = rng.uniform(-0.5, 0.5, size=(2, 15))
    coefs = rng.uniform(-0.1, 0.1, size=(3, 10, 10))
    noise = rng.standard_normal((11_000, 10))
    init = np.zeros((3, 10))
    train = rng.normal(size=(6_000, 75))
    queries = rng.normal(size=(2_000, 75))
    return {
        "henon_chain K=15 steps=11000": lambda m: m.henon_chain(history, 11_000, 0.3, 10.0),
        "var_simulate K=10 P=3 steps=11000": lambda m: m.var_simulate(coefs, noise, init),
        "knn_indices 2000x6000 D=75 k=5": lambda m: m.knn_indices(queries, train, 5),
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if compiled is None:
        print("compiled kernels are not built; run `pip install --no-build-isolation -e .`", file=sys.stderr)
        return 1
    print(f"{'kernel':<36}{'compiled s':>12}{'python s':>12}{'speedup':>10}")
    for name, fn in cases().items():
        t_c = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
        t_p = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        print(f"{name:<36}{t_c:>12.4f}{t_p:>12.4f}{t_p / t_c:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
