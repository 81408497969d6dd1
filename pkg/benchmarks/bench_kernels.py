"""Compare the compiled and numpy blade-bilinear backends.

Run with ``python benchmarks/bench_kernels.py``. Besides the raw kernel it
times one full network pass per backend, which shows how little of the
network runtime the kernel accounts for.
"""
import argparse
import time

import numpy as np

from cliffordflow import algebra as ga
from cliffordflow import kernels
from cliffordflow import motors as mo
from cliffordflow.cfa import CfaConfig, init_weights, network_forward
from cliffordflow.layers import ManyBodyProduct


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--residues", type=int, default=100)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    N, H, P = args.residues, 8, 8
    a, b = rng.standard_normal((2, N * H, P, 16))
    layer = ManyBodyProduct.init(rng, P, P)
    t_gp, _ = layer._tables

    cfg = CfaConfig()
    weights = init_weights(0, cfg)
    frames = mo.random_frames(rng, N, scale=15.0)

    cases = {
        f"geometric product, {N * H * P} pairs": lambda: ga.geometric_product(a, b),
        f"per-channel tables, {N * H} x {P} channels": lambda: kernels.blade_bilinear(a, b, t_gp, ga.GP_TARGET),
        f"network forward, N={N}": lambda: network_forward(frames, 0.5, weights, cfg),
    }
    print(f"backends available: {', '.join(kernels.AVAILABLE)}")
    rows = {}
    for label, fn in cases.items():
        for name in kernels.AVAILABLE:
            with kernels.use_backend(name):
                fn()  # warm up
                rows[label, name] = best_of(fn, 1 if "forward" in label else args.repeat)
    width = max(len(k) for k in cases)
    print(f"{'case':<{width}}  " + "  ".join(f"{n:>10}" for n in kernels.AVAILABLE))
    for label in cases:
        print(f"{label:<{width}}  " + "  ".join(f"{rows[label, n] * 1e3:8.2f}ms" for n in kernels.AVAILABLE))


if __name__ == "__main__":
    main()
