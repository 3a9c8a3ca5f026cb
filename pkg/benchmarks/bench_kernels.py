"""Time the numba kernels against their numpy fallbacks.

Run: python benchmarks/bench_kernels.py [--repeat N]

Also checks that both paths return the same bits (cartpole_step may differ
in the last place of sin/cos, so it is compared with a tolerance).
"""
import argparse
import timeit

import numpy as np

from dppo import kernels


def cases(rng):
    x = rng.normal(size=(128, 64))
    w = rng.normal(size=(64, 64))
    b = rng.normal(size=64)
    rewards = rng.normal(size=(8, 256))
    values = rng.normal(size=(8, 256))
    dones = (rng.random((8, 256)) < 0.02).astype(np.float64)
    boot = rng.normal(size=8)
    states = rng.uniform(-0.05, 0.05, size=(8, 4))
    actions = rng.integers(0, 2, size=8)
    return [
        ("dense 128x64x64", kernels.dense, (x, w, b), True),
        ("dense 2048x64x64", kernels.dense, (rng.normal(size=(2048, 64)), w, b), True),
        ("ordered_sum 4096", kernels.ordered_sum, (rng.normal(size=4096),), True),
        ("gae 8x256", kernels.gae, (rewards, values, dones, boot, 0.99, 0.95), True),
        ("cartpole_step 8", kernels.cartpole_step, (states, actions), False),
    ]


def best_time(fn, args, repeat):
    fn(*args)  # warm-up, includes jit compilation
    n = 1
    while timeit.timeit(lambda: fn(*args), number=n) < 0.05:
        n *= 2
    return min(timeit.repeat(lambda: fn(*args), number=n, repeat=repeat)) / n


def same(a, b, exact):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    if exact:
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return all(np.allclose(x, y, rtol=1e-15, atol=0) for x, y in zip(a, b))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<20} {'numba us':>10} {'numpy us':>10} {'speedup':>8}  match")
    for name, fn, fargs, exact in cases(rng):
        tj = best_time(fn.jit, fargs, args.repeat)
        tp = best_time(fn.py, fargs, args.repeat)
        ok = same(fn.jit(*fargs), fn.py(*fargs), exact)
        print(f"{name:<20} {tj * 1e6:>10.1f} {tp * 1e6:>10.1f} {tp / tj:>7.1f}x  "
              f"{'bit-equal' if exact and ok else 'close' if ok else 'MISMATCH'}")


if __name__ == "__main__":
    main()
