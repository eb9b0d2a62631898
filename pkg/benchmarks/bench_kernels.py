"""Compare the numba kernels against the pure-numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each case is warmed up once per path (so JIT compilation is excluded) and the
best of ``--repeat`` wall times is reported.  Results from both paths are
checked for agreement before timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from monocone import kernels
from monocone.family import parse_family
from monocone.joint import jsr_bounds
from monocone.words import all_words

GOLDEN = "dim 2\nmap A = [ x1 + x2 ; x2 ]\nmap B = [ x1 ; x1 + x2 ]\n"
MIXED = """dim 4
map p = [ max(x2, 0.5*x3) + 0.2*x4 ; geo(0.5: x1, 0.5: x3) ; min(x1 + x4, 2*x2) ; 0.3*x1 + 0.6*x3 ]
map q = [ 0.4*x4 + x2 ; max(x1, x3) ; 0.7*x2 + 0.1*x4 ; geo(0.3: x2, 0.7: x3) ]
"""


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    mixed = parse_family(MIXED)
    golden = parse_family(GOLDEN)
    X = rng.uniform(0.0, 1.0, (200_000, mixed.n))
    W = all_words(len(mixed), 10)
    probes = np.eye(mixed.n) + 0.01
    seeds = np.ones((1, mixed.n))
    P = rng.uniform(0.0, 1.0, (4000, 3))
    return {
        "eval_batch (200k rows, n=4)": lambda: kernels.eval_batch(mixed.program, 0, X),
        "screen_words (1024 words, 16 iters)": lambda: kernels.screen_words(mixed.program, W, probes, seeds, 16),
        "pareto_keep (4000 rows, n=3)": lambda: kernels.pareto_keep(P, True),
        "jsr_bounds golden max_len=16": lambda: jsr_bounds(golden, max_len=16),
        "jsr_bounds mixed max_len=10": lambda: jsr_bounds(mixed, max_len=10),
    }


def _same(a, b) -> bool:
    if hasattr(a, "upper"):
        return a.upper == b.upper and a.lower == b.lower
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-12, atol=0.0)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    print(f"{'case':40s} {'numba [s]':>11s} {'numpy [s]':>11s} {'speedup':>8s}  agree")
    for name, fn in cases().items():
        with kernels.numba_enabled(True):
            fast_out = fn()
            fast = _best(fn, args.repeat)
        with kernels.numba_enabled(False):
            slow_out = fn()
            slow = _best(fn, args.repeat)
        print(f"{name:40s} {fast:11.4f} {slow:11.4f} {slow / fast:7.1f}x  {_same(fast_out, slow_out)}")


if __name__ == "__main__":
    main()
