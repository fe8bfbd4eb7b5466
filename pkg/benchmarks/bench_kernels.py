"""Timing and parity comparison of the compiled kernels vs the NumPy fallback.

Run as: python benchmarks/bench_kernels.py

Each kernel is timed in both backends on identical inputs; results must
agree (allclose for floating point, exact for edit distance) or the
benchmark aborts. Useful when deciding whether a platform without a C
compiler loses anything that matters.
"""

from __future__ import annotations

import string
import sys
import time

import numpy as np

from eit._kernels import BACKEND, pure

if BACKEND != "native":
    sys.exit("compiled backend unavailable; nothing to compare (build the extension)")

from eit._kernels import _native as native  # noqa: E402


def timed(fn, *args, repeat: int = 5):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def bench_levenshtein(rng):
    alphabet = string.ascii_lowercase
    pairs = [
        (
            "".join(rng.choice(list(alphabet), size=rng.integers(20, 60))),
            "".join(rng.choice(list(alphabet), size=rng.integers(20, 60))),
        )
        for _ in range(2000)
    ]

    def run(impl):
        return [impl.levenshtein(a, b) for a, b in pairs]

    got_native, t_native = timed(run, native)
    got_pure, t_pure = timed(run, pure)
    assert got_native == got_pure, "edit distance mismatch between backends"
    return "levenshtein (2000 pairs, len 20-60)", t_native, t_pure


def bench_pairwise(rng):
    x = rng.standard_normal((600, 128))
    got_native, t_native = timed(native.pairwise_sq_dists, x)
    got_pure, t_pure = timed(pure.pairwise_sq_dists, x)
    assert np.allclose(got_native, got_pure, atol=1e-8), "pairwise distance mismatch"
    return "pairwise_sq_dists (600 x 128)", t_native, t_pure


def bench_cross(rng):
    a = rng.standard_normal((400, 128))
    b = rng.standard_normal((300, 128))
    got_native, t_native = timed(native.cross_sq_dists, a, b)
    got_pure, t_pure = timed(pure.cross_sq_dists, a, b)
    assert np.allclose(got_native, got_pure, atol=1e-8), "cross distance mismatch"
    return "cross_sq_dists (400 x 300 x 128)", t_native, t_pure


def bench_tsne_grad(rng):
    n = 400
    y = rng.standard_normal((n, 2))
    p = np.abs(rng.standard_normal((n, n)))
    np.fill_diagonal(p, 0.0)
    p /= p.sum()
    (gn, kn), t_native = timed(native.tsne_grad_kl, p, p, y)
    (gp, kp), t_pure = timed(pure.tsne_grad_kl, p, p, y)
    assert np.allclose(gn, gp, atol=1e-10) and abs(kn - kp) < 1e-10, "gradient mismatch"
    return "tsne_grad_kl (400 points)", t_native, t_pure


def main():
    rng = np.random.default_rng(7)
    print(f"{'kernel':<38} {'native':>10} {'pure':>10} {'speedup':>8}")
    for bench in (bench_levenshtein, bench_pairwise, bench_cross, bench_tsne_grad):
        name, t_native, t_pure = bench(rng)
        print(f"{name:<38} {t_native * 1e3:>8.2f}ms {t_pure * 1e3:>8.2f}ms {t_pure / t_native:>7.1f}x")
    print("parity checks passed")


if __name__ == "__main__":
    main()
