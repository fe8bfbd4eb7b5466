"""Pure-NumPy implementations of the hot kernels.

Semantically equivalent to the compiled backend in ``_native.pyx``; used
whenever the extension is unavailable or ``EIT_PURE_PYTHON`` is set.
Results within one backend are fully deterministic; across backends they
agree to floating-point tolerance (the benchmark asserts this).
"""

from __future__ import annotations

import numpy as np

KL_FLOOR = 1e-12


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert/delete/substitute) between two strings."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            )
        previous = current
    return previous[-1]


# Row-block size keeping the (block, m, d) difference tensor near 64 MB.
def _block_rows(m: int, d: int) -> int:
    return max(1, (8 << 20) // max(1, m * d))


def cross_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows of ``a`` and rows of ``b``.

    Computed from explicit differences (not the expanded dot-product form)
    so small distances keep full precision; chunked to bound memory.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    n, d = a.shape
    out = np.empty((n, b.shape[0]))
    step = _block_rows(b.shape[0], d)
    for lo in range(0, n, step):
        diff = a[lo : lo + step, None, :] - b[None, :, :]
        out[lo : lo + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between all rows of ``x`` (n x n, zero diagonal)."""
    out = cross_sq_dists(x, x)
    np.fill_diagonal(out, 0.0)
    return out


def tsne_grad_kl(p_eff: np.ndarray, p_true: np.ndarray, y: np.ndarray):
    """One t-SNE force evaluation on the 2-D layout ``y``.

    Returns ``(grad, kl)`` where ``grad`` is the gradient of
    KL(p_eff || q) with respect to ``y`` under the Student-t kernel
    q_ij = w_ij / sum(w), w_ij = 1 / (1 + ||y_i - y_j||^2), and ``kl``
    is KL(p_true || q) with the documented 1e-12 floor inside the log.
    """
    n = y.shape[0]
    w = 1.0 / (1.0 + pairwise_sq_dists(y))
    np.fill_diagonal(w, 0.0)
    s = w.sum()
    q = w / s
    pq_w = (p_eff - q) * w
    grad = 4.0 * (pq_w.sum(axis=1)[:, None] * y - pq_w @ y)
    mask = p_true > 0.0
    q_floor = np.maximum(q, KL_FLOOR)
    kl = float(np.sum(p_true[mask] * (np.log(p_true[mask]) - np.log(q_floor[mask]))))
    return grad, kl
