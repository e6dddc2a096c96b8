"""Loop kernels compiled with numba.

Single-threaded, one fixed traversal order per reduction, so results do not
depend on how many workers call them concurrently.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _deconvolve(od, inv):
    n = od.shape[0]
    out = np.empty((n, 3), dtype=np.float64)
    for i in range(n):
        o0 = od[i, 0]
        o1 = od[i, 1]
        o2 = od[i, 2]
        for k in range(3):
            a = o0 * inv[0, k] + o1 * inv[1, k] + o2 * inv[2, k]
            out[i, k] = a if a > 0.0 else 0.0
    return out


def deconvolve(od, inv):
    return _deconvolve(
        np.ascontiguousarray(od, dtype=np.float64),
        np.ascontiguousarray(inv, dtype=np.float64),
    )


@njit(**_JIT)
def _bin_of(v, n_bins, top):
    if not v > 0.0:
        return -1
    c = v if v < top else top
    k = int(np.ceil(c * n_bins / top))
    if k < 1:
        k = 1
    elif k > n_bins:
        k = n_bins
    if k > 1 and c <= (k - 1) * top / n_bins:
        k -= 1
    if k < n_bins and c > k * top / n_bins:
        k += 1
    return k - 1


@njit(**_JIT)
def _histo_bins(v, n_bins, top):
    out = np.empty(v.shape[0], dtype=np.int64)
    for j in range(v.shape[0]):
        out[j] = _bin_of(v[j], n_bins, top)
    return out


@njit(**_JIT)
def _histo_accumulate(v, n_bins, top):
    acc = np.zeros(n_bins, dtype=np.float64)
    for j in range(v.shape[0]):
        b = _bin_of(v[j], n_bins, top)
        if b >= 0:
            acc[b] += v[j]
    return acc


def histo_bins(values, n_bins, top):
    return _histo_bins(np.ascontiguousarray(values, dtype=np.float64).ravel(), int(n_bins), float(top))


def histo_accumulate(values, n_bins, top):
    return _histo_accumulate(
        np.ascontiguousarray(values, dtype=np.float64).ravel(), int(n_bins), float(top)
    )


@njit(**_JIT)
def _block_means(v, k):
    h, w = v.shape
    sums = np.zeros(k * k, dtype=np.float64)
    counts = np.zeros(k * k, dtype=np.int64)
    for r in range(h):
        br = ((r + 1) * k - 1) // h
        for c in range(w):
            b = br * k + ((c + 1) * k - 1) // w
            sums[b] += v[r, c]
            counts[b] += 1
    out = np.empty(k * k, dtype=np.float64)
    for b in range(k * k):
        out[b] = sums[b] / counts[b]
    return out


def block_means(values, k):
    return _block_means(np.ascontiguousarray(values, dtype=np.float64), int(k))


@njit(**_JIT)
def _weighted_sums(f, p):
    n, d = f.shape
    c = p.shape[1]
    sums = np.zeros((c, d), dtype=np.float64)
    mass = np.zeros(c, dtype=np.float64)
    for i in range(n):
        for ci in range(c):
            w = p[i, ci]
            mass[ci] += w
            for di in range(d):
                sums[ci, di] += w * f[i, di]
    return sums, mass


def weighted_sums(f, p):
    return _weighted_sums(
        np.ascontiguousarray(f, dtype=np.float64),
        np.ascontiguousarray(p, dtype=np.float64),
    )


@njit(**_JIT)
def _cosine_map(f, q, eps):
    n, d = f.shape
    c = q.shape[0]
    qn = np.empty(c, dtype=np.float64)
    for ci in range(c):
        s = 0.0
        for di in range(d):
            s += q[ci, di] * q[ci, di]
        qn[ci] = np.sqrt(s)
    out = np.zeros((n, c), dtype=np.float64)
    for i in range(n):
        s = 0.0
        for di in range(d):
            s += f[i, di] * f[i, di]
        fn = np.sqrt(s)
        if fn < eps:
            continue
        for ci in range(c):
            if qn[ci] < eps:
                continue
            dot = 0.0
            for di in range(d):
                dot += f[i, di] * q[ci, di]
            val = dot / (fn * qn[ci])
            if val > 1.0:
                val = 1.0
            elif val < -1.0:
                val = -1.0
            out[i, ci] = val
    return out


def cosine_map(f, q, eps):
    return _cosine_map(
        np.ascontiguousarray(f, dtype=np.float64),
        np.ascontiguousarray(q, dtype=np.float64),
        float(eps),
    )
