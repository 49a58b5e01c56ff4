"""Compare the compiled and numpy 3x3 convolution backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--size H W] [--channels CI CO]
"""
import argparse
import time

import numpy as np

from spectrarec import kernels


def best_time(fn, repeat):
    fn()  # warm-up
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--size", type=int, nargs=2, default=(64, 64), metavar=("H", "W"))
    p.add_argument("--channels", type=int, nargs=2, default=(16, 16), metavar=("CI", "CO"))
    args = p.parse_args(argv)

    rng = np.random.default_rng(0)
    (h, w), (ci, co) = args.size, args.channels
    impls = kernels.implementations()
    print(f"active backend: {kernels.BACKEND}; image {h}x{w}, {ci}->{co} channels, best of {args.repeat}")
    for dtype in (np.float32, np.float64):
        x = rng.normal(size=(h, w, ci)).astype(dtype)
        wt = rng.normal(size=(3, 3, ci, co)).astype(dtype)
        b = rng.normal(size=co).astype(dtype)
        g = rng.normal(size=(h, w, co)).astype(dtype)
        ref = None
        for name, impl in impls.items():
            fwd = best_time(lambda: kernels.conv3x3_forward(x, wt, b, impl), args.repeat)
            bwd = best_time(lambda: kernels.conv3x3_backward(x, wt, g, impl), args.repeat)
            out = kernels.conv3x3_forward(x, wt, b, impl)
            diff = "" if ref is None else f"  max |diff| vs python {np.max(np.abs(out - ref)):.1e}"
            ref = out if ref is None else ref
            print(f"{np.dtype(dtype).name:8s} {name:7s} forward {fwd * 1e3:8.3f} ms  backward {bwd * 1e3:8.3f} ms{diff}")
    if "cython" not in impls:
        print("compiled kernels not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
