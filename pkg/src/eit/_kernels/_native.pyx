# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: edit distance, pairwise distances, t-SNE force evaluation.

Mirrors ``pure.py``. Loop-ordered to avoid the large temporaries the
vectorized fallback allocates per call.
"""

from libc.math cimport log
from libc.stdlib cimport free, malloc

import numpy as np

DEF KL_FLOOR = 1e-12


def levenshtein(str a, str b):
    """Unit-cost edit distance (insert/delete/substitute) between two strings."""
    cdef Py_ssize_t la = len(a), lb = len(b)
    cdef Py_ssize_t i, j
    cdef long sub, best, cand
    cdef long *prev
    cdef long *curr
    cdef long *tmp
    cdef Py_UCS4 ca
    if a == b:
        return 0
    if la < lb:
        a, b = b, a
        la, lb = lb, la
    if lb == 0:
        return la
    prev = <long *> malloc((lb + 1) * sizeof(long))
    curr = <long *> malloc((lb + 1) * sizeof(long))
    if prev == NULL or curr == NULL:
        free(prev)
        free(curr)
        raise MemoryError()
    try:
        for j in range(lb + 1):
            prev[j] = j
        for i in range(1, la + 1):
            curr[0] = i
            ca = a[i - 1]
            for j in range(1, lb + 1):
                sub = prev[j - 1] + (ca != <Py_UCS4> b[j - 1])
                best = prev[j] + 1
                cand = curr[j - 1] + 1
                if cand < best:
                    best = cand
                if sub < best:
                    best = sub
                curr[j] = best
            tmp = prev
            prev = curr
            curr = tmp
        return prev[lb]
    finally:
        free(prev)
        free(curr)


def pairwise_sq_dists(x):
    """Squared Euclidean distances between all rows of ``x`` (n x n, zero diagonal)."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1]
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = xv[i, k] - xv[j, k]
                acc += diff * diff
            ov[i, j] = acc
            ov[j, i] = acc
    return out


def cross_sq_dists(a, b):
    """Squared Euclidean distances between rows of ``a`` and rows of ``b``."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t na = av.shape[0], nb = bv.shape[0], d = av.shape[1]
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(na):
        for j in range(nb):
            acc = 0.0
            for k in range(d):
                diff = av[i, k] - bv[j, k]
                acc += diff * diff
            ov[i, j] = acc
    return out


def tsne_grad_kl(p_eff, p_true, y):
    """One t-SNE force evaluation; see the fallback docstring for the contract."""
    cdef double[:, ::1] pe = np.ascontiguousarray(p_eff, dtype=np.float64)
    cdef double[:, ::1] pt = np.ascontiguousarray(p_true, dtype=np.float64)
    cdef double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]
    w_arr = np.empty((n, n), dtype=np.float64)
    grad = np.zeros((n, 2), dtype=np.float64)
    cdef double[:, ::1] w = w_arr
    cdef double[:, ::1] gv = grad
    cdef Py_ssize_t i, j
    cdef double dx, dy, s, wij, m, q, kl, p
    s = 0.0
    for i in range(n):
        w[i, i] = 0.0
        for j in range(i + 1, n):
            dx = yv[i, 0] - yv[j, 0]
            dy = yv[i, 1] - yv[j, 1]
            wij = 1.0 / (1.0 + dx * dx + dy * dy)
            w[i, j] = wij
            w[j, i] = wij
            s += 2.0 * wij
    kl = 0.0
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            wij = w[i, j]
            q = wij / s
            m = 4.0 * (pe[i, j] - q) * wij
            gv[i, 0] += m * (yv[i, 0] - yv[j, 0])
            gv[i, 1] += m * (yv[i, 1] - yv[j, 1])
            p = pt[i, j]
            if p > 0.0:
                kl += p * (log(p) - log(q if q > KL_FLOOR else KL_FLOOR))
    return grad, kl
