"""Timing comparison of the compiled kernels against the NumPy fallback.

Run from the repo root:

    python benchmarks/bench_kernels.py

Imports both backend modules directly, so the result does not depend on
which backend the package selected at import time.
"""

import time

import numpy as np

from mblast import _core_py
from mblast.coding import ConvCode, _output_tables, conv_encode

try:
    from mblast import _core
except ImportError:
    _core = None


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def bench_iterations(backend, k=64, m=192, t_max=10, repeats=50):
    rng = np.random.default_rng(7)
    h = rng.standard_normal((2 * m, k)) / np.sqrt(2 * m)
    x = rng.choice([-1.0, 1.0], size=k)
    y = h @ x + 0.3 * rng.standard_normal(2 * m)
    return time_call(
        lambda: backend.run_iterations(h, y, 0.25, k / m, t_max, True, False, 0.0),
        repeats,
    )


def bench_viterbi(backend, info_bits=256, repeats=50):
    rng = np.random.default_rng(11)
    code = ConvCode()
    bits = rng.integers(0, 2, info_bits).astype(np.uint8)
    llr = (1.0 - 2.0 * conv_encode(bits, code)) * 4.0
    llr += rng.standard_normal(llr.size)
    out0, out1 = _output_tables(code)
    pairs = llr.reshape(-1, 2)
    tail = code.constraint_length - 1
    return time_call(lambda: backend.viterbi_path(pairs, out0, out1, tail), repeats)


def main():
    rows = []
    for name, fn in (("iterations k=64 m=192 t=10", bench_iterations),
                     ("viterbi 64-state 262 steps", bench_viterbi)):
        numpy_t = fn(_core_py)
        if _core is not None:
            compiled_t = fn(_core)
            rows.append((name, numpy_t, compiled_t, numpy_t / compiled_t))
        else:
            rows.append((name, numpy_t, None, None))

    print(f"{'kernel':<32} {'numpy':>12} {'compiled':>12} {'speedup':>9}")
    for name, numpy_t, compiled_t, speedup in rows:
        if compiled_t is None:
            print(f"{name:<32} {numpy_t * 1e3:>10.3f}ms {'n/a':>12} {'n/a':>9}")
        else:
            print(f"{name:<32} {numpy_t * 1e3:>10.3f}ms {compiled_t * 1e3:>10.3f}ms "
                  f"{speedup:>8.1f}x")
    if _core is None:
        print("\ncompiled extension not built; install with a working C toolchain")


if __name__ == "__main__":
    main()
