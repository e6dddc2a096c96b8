"""Class prototypes, cross-image similarity maps and the prototype consistency loss.

Feature maps are (H, W, D), probability maps and class masks are (H, W, C),
all channel-last. Features and probabilities come from an external
segmentation network; nothing here runs one.
"""

from __future__ import annotations

import numpy as np

from odstain import kernels
from odstain.errors import DegenerateClass, InvalidParameter, ShapeMismatch

MIN_CLASS_MASS = 1e-8
ZERO_NORM = 1e-12
PROB_SUM_TOL = 1e-4


def _tensor(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ShapeMismatch(f"{name} must be a non-empty (H, W, K) tensor, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidParameter(f"{name} contains non-finite values")
    return arr


def check_prob_map(p, name="probability map") -> np.ndarray:
    p = _tensor(p, name)
    if p.shape[2] < 2:
        raise ShapeMismatch(f"{name} needs at least 2 classes, got {p.shape[2]}")
    if p.min() < 0.0 or p.max() > 1.0:
        raise InvalidParameter(f"{name} has values outside [0, 1]")
    if np.abs(p.sum(axis=2) - 1.0).max() > PROB_SUM_TOL:
        raise InvalidParameter(f"{name} does not sum to 1 over classes")
    return p


def compute_prototypes(f, p) -> np.ndarray:
    """Probability-weighted mean feature per class, shape (C, D)."""
    f = _tensor(f, "feature map")
    p = check_prob_map(p)
    if f.shape[:2] != p.shape[:2]:
        raise ShapeMismatch(f"feature map {f.shape[:2]} and probabilities {p.shape[:2]} differ")
    sums, mass = kernels.weighted_sums(f.reshape(-1, f.shape[2]), p.reshape(-1, p.shape[2]))
    for c, m in enumerate(mass):
        if m < MIN_CLASS_MASS:
            raise DegenerateClass(c, m)
    return sums / mass[:, None]


def cross_similarity(f, q) -> np.ndarray:
    """Cosine similarity of every pixel feature with every prototype, (H, W, C).

    Zero-length features or prototypes give similarity 0.
    """
    f = _tensor(f, "feature map")
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != f.shape[2]:
        raise ShapeMismatch(f"prototypes {q.shape} do not match feature depth {f.shape[2]}")
    h, w, d = f.shape
    return kernels.cosine_map(f.reshape(-1, d), q, ZERO_NORM).reshape(h, w, q.shape[0])


def class_softmax(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.shape[-1] < 2:
        raise ShapeMismatch(f"softmax needs at least 2 classes, got {s.shape[-1]}")
    z = np.exp(s - s.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def _check_mask(m, shape, name):
    m = np.asarray(m, dtype=np.float64)
    if m.shape != shape:
        raise ShapeMismatch(f"{name} has shape {m.shape}, expected {shape}")
    if not (np.isin(m, (0.0, 1.0)).all() and (m.sum(axis=2) == 1.0).all()):
        raise InvalidParameter(f"{name} is not a one-hot class mask")
    return m


def ctpc_from_prototypes(f_f, q_r, f_r, q_f, m_f, m_r) -> float:
    """Consistency loss given both images' prototypes.

    Fake features are scored against real prototypes and vice versa; each
    softmaxed prediction is compared with that image's own mask.
    """
    f_f = _tensor(f_f, "fake features")
    f_r = _tensor(f_r, "real features")
    p_fr = class_softmax(cross_similarity(f_f, q_r))
    p_rf = class_softmax(cross_similarity(f_r, q_f))
    if p_fr.shape != p_rf.shape:
        raise ShapeMismatch(f"fake/real grids differ: {p_fr.shape} vs {p_rf.shape}")
    m_f = _check_mask(m_f, p_fr.shape, "fake mask")
    m_r = _check_mask(m_r, p_rf.shape, "real mask")
    total = np.abs(p_fr - m_f).sum() + np.abs(p_rf - m_r).sum()
    return float(total) / p_fr.size


def ctpc_loss(f_f, p_f, f_r, p_r, m_f, m_r) -> float:
    q_f = compute_prototypes(f_f, p_f)
    q_r = compute_prototypes(f_r, p_r)
    if q_f.shape != q_r.shape:
        raise ShapeMismatch(f"fake/real prototypes differ: {q_f.shape} vs {q_r.shape}")
    return ctpc_from_prototypes(f_f, q_r, f_r, q_f, m_f, m_r)
