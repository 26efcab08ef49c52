"""Compare the compiled conv kernels against the numpy fallback.

Times every distinct (input, weight, stride) combination that one
generator and one discriminator pass actually issue, then the whole
models through both backends.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeats 5] [--degree 3]
"""

import argparse
import time

import numpy as np

from opgan import backend
from opgan import _kernels_np
from opgan.models import build_discriminator, build_generator


def record_shapes(g, d, x):
    """One forward+backward of each model, logging each conv call."""
    seen = {}
    original = backend.conv_fwd

    def spy(xp, w, stride):
        key = (xp.shape, w.shape, stride)
        seen.setdefault(key, 0)
        seen[key] += 1
        return original(xp, w, stride)

    backend.conv_fwd = spy
    try:
        fake, cache = g.forward(x, want_cache=True)
        g.backward(np.ones_like(fake), cache)
        pair = np.concatenate([x, fake])
        scores, caches = d.forward(pair, want_cache=True)
        d.backward(np.ones_like(scores), caches, want_input=True)
    finally:
        backend.conv_fwd = original
    return seen


def time_call(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(shapes, repeats, rng):
    from opgan import _kernels

    print(f"{'input':>14} {'weight':>14} {'s':>2} {'calls':>5} "
          f"{'numpy ms':>9} {'compiled ms':>11} {'speedup':>8}")
    total_np = total_c = 0.0
    for (xshape, wshape, stride), calls in sorted(shapes.items()):
        xp = rng.standard_normal(xshape).astype(np.float32)
        w = rng.standard_normal(wshape).astype(np.float32)
        t_np = time_call(lambda: _kernels_np.conv_fwd(xp, w, stride), repeats)
        t_c = time_call(lambda: _kernels.conv_fwd(xp, w, stride), repeats)
        total_np += t_np * calls
        total_c += t_c * calls
        print(f"{str(xshape):>14} {str(wshape):>14} {stride:>2} {calls:>5} "
              f"{1e3 * t_np:9.3f} {1e3 * t_c:11.3f} {t_np / t_c:7.1f}x")
    print(f"weighted forward totals: numpy {1e3 * total_np:.1f} ms, "
          f"compiled {1e3 * total_c:.1f} ms ({total_np / total_c:.1f}x)")


def bench_models(g, d, x, repeats):
    def full_pass():
        fake, cache = g.forward(x, want_cache=True)
        g.backward(np.ones_like(fake), cache)
        pair = np.concatenate([x, fake])
        scores, caches = d.forward(pair, want_cache=True)
        d.backward(np.ones_like(scores), caches, want_input=True)

    print(f"\n{'whole models (fwd+bwd)':>30} {'ms':>9}")
    for name, flag in (("numpy", False), ("compiled", True)):
        saved = backend._use_compiled
        backend._use_compiled = flag
        try:
            t = time_call(full_pass, repeats)
        finally:
            backend._use_compiled = saved
        print(f"{name:>30} {1e3 * t:9.1f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--degree", type=int, default=3)
    args = parser.parse_args()

    if not backend.compiled_available():
        raise SystemExit("compiled extension not built; nothing to compare")

    rng = np.random.default_rng(0)
    g = build_generator(args.degree, rng)
    d = build_discriminator(args.degree, rng)
    x = rng.uniform(-0.5, 0.5, (1, 32000)).astype(np.float32)

    shapes = record_shapes(g, d, x)
    print(f"degree {args.degree}, {len(shapes)} distinct conv shapes\n")
    bench_kernels(shapes, args.repeats, rng)
    bench_models(g, d, x, args.repeats)


if __name__ == "__main__":
    main()
