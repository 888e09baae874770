"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--steps 5000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from extpos import kernels
from extpos.drone import K1, drone


def cases(steps, rng):
    plant = drone()
    A = rng.standard_normal((6, 6))
    A *= 0.9 / np.max(np.abs(np.linalg.eigvals(A)))
    B, C = rng.standard_normal((6, 2)), rng.standard_normal((2, 6))
    U = rng.uniform(-1, 1, (steps, 2))
    fb = (plant.A, plant.B, plant.C, K1, [10.0, 0.0], np.zeros((2, 1)), np.zeros(4), np.zeros(1), steps, 2)
    return {
        "simulate n=6": lambda impl: kernels.simulate(A, B, C, np.ones(6), U, impl=impl),
        "run_feedback drone": lambda impl: kernels.run_feedback(*fb, impl=impl),
        "markov n=6": lambda impl: kernels.markov(A, B, C, steps, impl=impl),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = kernels.backends()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(sorted(impls))}")
    print(f"{'kernel':<22}" + "".join(f"{name:>14}" for name in sorted(impls)) + f"{'speedup':>10}")
    for label, fn in cases(args.steps, np.random.default_rng(0)).items():
        best = {name: min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
                for name, mod in sorted(impls.items())}
        speed = best["python"] / best["cython"] if "cython" in best else float("nan")
        print(f"{label:<22}" + "".join(f"{best[n] * 1e3:>12.2f}ms" for n in sorted(best)) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
