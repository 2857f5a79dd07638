"""Time the pixel kernels and a short inpainting run under each backend.

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 20] [--iters 200]

Backends that are not importable are skipped. The first call of each numba
kernel is a warm-up (JIT compile or cache load) and is not timed.
"""

import argparse
import time

import numpy as np

from fbfep import kernels
from fbfep.inpainting import corrupt, make_mask, run_inpainting, synthetic_image
from fbfep.schedules import INPAINT_FBF_EP


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--iters", type=int, default=200)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.size
    x = rng.random((n, n))
    gx, gy = 2 * rng.standard_normal((2, n, n))
    cases = {
        "grad_forward": lambda: kernels.grad_forward(x),
        "div_adjoint": lambda: kernels.div_adjoint(gx, gy),
        "proj_unit_disks": lambda: kernels.proj_unit_disks(gx, gy),
        "pair_norm_sum": lambda: kernels.pair_norm_sum(gx, gy),
    }
    m = min(n, 64)
    clean = synthetic_image(m, m)
    mask = make_mask(m, m, 0.8, 7)
    b = corrupt(clean, mask)
    cases[f"inpaint {m}x{m} x{args.iters}"] = lambda: run_inpainting(clean, b, mask, INPAINT_FBF_EP, iters=args.iters)

    names = [k for k in ("numpy", "numba") if k in kernels._IMPLS]
    prev = kernels.backend()
    times = {}
    try:
        for backend in names:
            kernels.use_backend(backend)
            for label, fn in cases.items():
                fn()  # warm-up
                reps = 3 if label.startswith("inpaint") else args.repeat
                times[backend, label] = best_of(fn, reps)
    finally:
        kernels.use_backend(prev)

    print(f"{'case':<28}" + "".join(f"{b:>14}" for b in names) + ("     speedup" if len(names) == 2 else ""))
    for label in cases:
        row = f"{label:<28}" + "".join(f"{times[b, label] * 1e3:>11.3f} ms" for b in names)
        if len(names) == 2:
            row += f"{times['numpy', label] / times['numba', label]:>11.2f}x"
        print(row)


if __name__ == "__main__":
    main()
