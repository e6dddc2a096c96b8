"""Vectorised numpy implementations of the hot kernels.

Each function mirrors the loop kernel of the same name in ``_kernels_numba``.
Histogram and block accumulation go through ``np.bincount`` which adds in
element order, so those two agree bit-for-bit with the loop versions.
"""

import numpy as np


def deconvolve(od, inv):
    """Per-pixel ``od @ inv`` with negative amounts clamped to zero.

    ``od`` is (N, 3), ``inv`` is (3, 3); returns (N, 3) float64.
    """
    od = np.asarray(od, dtype=np.float64)
    out = od[:, 0:1] * inv[0] + od[:, 1:2] * inv[1] + od[:, 2:3] * inv[2]
    return np.maximum(out, 0.0)


def histo_bins(values, n_bins, top):
    """Zero-based bin per value; -1 for values that fall in no bin."""
    v = np.asarray(values, dtype=np.float64).ravel()
    idx = np.full(v.shape, -1, dtype=np.int64)
    pos = v > 0.0
    c = np.minimum(v[pos], top)
    k = np.ceil(c * n_bins / top).astype(np.int64)
    k = np.clip(k, 1, n_bins)
    lower = (k - 1) * top / n_bins
    k = np.where((c <= lower) & (k > 1), k - 1, k)
    upper = k * top / n_bins
    k = np.where((c > upper) & (k < n_bins), k + 1, k)
    idx[pos] = k - 1
    return idx


def histo_accumulate(values, n_bins, top):
    v = np.asarray(values, dtype=np.float64).ravel()
    idx = histo_bins(v, n_bins, top)
    keep = idx >= 0
    return np.bincount(idx[keep], weights=v[keep], minlength=n_bins).astype(np.float64)


def block_means(values, k):
    """Means over a k x k grid of floor-balanced bands, row-major block order."""
    v = np.asarray(values, dtype=np.float64)
    h, w = v.shape
    # pixel r lies in band b iff floor(b*h/k) <= r < floor((b+1)*h/k)
    rows = ((np.arange(h) + 1) * k - 1) // h
    cols = ((np.arange(w) + 1) * k - 1) // w
    labels = (rows[:, None] * k + cols[None, :]).ravel()
    sums = np.bincount(labels, weights=v.ravel(), minlength=k * k)
    counts = np.bincount(labels, minlength=k * k)
    return sums / counts


def weighted_sums(f, p):
    """Return (sum_i p[i,c] f[i,:], sum_i p[i,c]) for (N, D) features, (N, C) weights."""
    f = np.asarray(f, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    return p.T @ f, p.sum(axis=0)


def cosine_map(f, q, eps):
    """Cosine similarity of every row of ``f`` (N, D) with every row of ``q`` (C, D).

    Pairs where either norm is below ``eps`` get similarity 0.
    """
    f = np.asarray(f, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    fn = np.sqrt(np.einsum("nd,nd->n", f, f))
    qn = np.sqrt(np.einsum("cd,cd->c", q, q))
    dots = f @ q.T
    denom = fn[:, None] * qn[None, :]
    ok = (fn[:, None] >= eps) & (qn[None, :] >= eps)
    out = np.zeros_like(dots)
    np.divide(dots, denom, out=out, where=ok)
    return np.clip(out, -1.0, 1.0)
