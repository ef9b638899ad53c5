"""Compare the compiled and NumPy im2col/col2im kernels.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--skip-step]

Times each kernel on layer shapes taken from the network (full width at a
128x128 crop for the first stage, 1/8 width for the rest) and one full
training step at 1/8 width. Results are medians over ``--repeat`` runs.
"""
import argparse
import statistics
import time
from fractions import Fraction

import numpy as np

from deblurnet import kernels
from deblurnet.network import DeblurNetParams, loss_total
from deblurnet.tensor import Tensor

# (label, B, C, H, W, k, stride)
CASES = [
    ("n1 conv1 96/11 s2", 2, 3, 128, 128, 11, 2),
    ("n1 conv2 256/7", 2, 96, 64, 64, 7, 1),
    ("n1 conv5 256/3", 2, 384, 32, 32, 3, 1),
    ("n2 conv 32/5 @1/8", 8, 32, 64, 64, 5, 1),
]


def median_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    impls = kernels.implementations()
    print(f"{'case':24s} {'op':7s} " + " ".join(f"{n:>10s}" for n in impls) + "   speedup")
    for label, B, C, H, W, k, s in CASES:
        p = (k - 1) // 2
        ho, wo = -(-H // s), -(-W // s)
        x = rng.standard_normal((B, C, H, W)).astype(np.float32)
        cols = rng.standard_normal((C * k * k, B * ho * wo)).astype(np.float32)
        for op in ("im2col", "col2im"):
            row = {}
            for name, (fwd, adj) in impls.items():
                if op == "im2col":
                    row[name] = median_time(lambda: fwd(x, k, s, p, ho, wo), repeat)
                else:
                    row[name] = median_time(lambda: adj(cols, B, C, H, W, k, s, p, ho, wo), repeat)
            speed = row["python"] / row["cython"] if "cython" in row else float("nan")
            print(f"{label:24s} {op:7s} " + " ".join(f"{row[n] * 1e3:8.2f}ms" for n in impls)
                  + f"   {speed:6.2f}x")


def bench_step(repeat):
    rng = np.random.default_rng(1)
    g = Tensor(rng.random((8, 3, 64, 64), dtype=np.float32))
    f = Tensor(rng.random((8, 3, 64, 64), dtype=np.float32))
    params = DeblurNetParams.create(Fraction(1, 8), seed=0)

    def step():
        params.zero_grad()
        loss, _, _ = loss_total(g, f, params)
        loss.backward()

    original = kernels.BACKEND
    results = {}
    try:
        for name in kernels.implementations():
            kernels.set_backend(name)
            results[name] = median_time(step, repeat)
    finally:
        kernels.set_backend(original)
    print("\nforward+backward, batch 8, 64x64, width 1/8")
    for name, t in results.items():
        print(f"  {name:8s} {t * 1e3:8.1f} ms")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-step", action="store_true")
    args = ap.parse_args()
    print(f"compiled core available: {kernels.HAVE_COMPILED}, default backend: {kernels.BACKEND}\n")
    bench_kernels(args.repeat)
    if not args.skip_step:
        bench_step(max(1, args.repeat // 2))


if __name__ == "__main__":
    main()
