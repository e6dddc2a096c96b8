"""Focal optical density maps and the pseudo class masks derived from them."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from odstain.core import check_i0, rgb_to_grayscale
from odstain.errors import InvalidAlpha, InvalidParameter, InvalidTarget

log = logging.getLogger(__name__)

NON_TUMOR, TUMOR = 0, 1


@dataclass(frozen=True)
class FodMap:
    values: np.ndarray
    alpha: float

    @property
    def shape(self):
        return self.values.shape


def as_values(o) -> np.ndarray:
    """Raw (H, W) float64 values of a FodMap or array-like."""
    if isinstance(o, FodMap):
        o = o.values
    arr = np.asarray(o, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidParameter(f"FOD map must be 2-D, got shape {arr.shape}")
    return arr


def check_alpha(alpha, force=False) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= 0.0:
        raise InvalidAlpha(f"alpha must be a positive number, got {alpha}")
    if alpha <= 1.0:
        if not force:
            raise InvalidAlpha(f"focusing exponent must satisfy alpha > 1, got {alpha}")
        log.warning("alpha=%g <= 1 accepted because force is set", alpha)
    return alpha


def gray_od(gray, i0=255.0) -> np.ndarray:
    """Plain optical density of a grayscale plane, ``-log10(max(gray, 1) / i0)``.

    Gray values above ``i0`` are treated as ``i0`` (zero density).
    """
    i0 = check_i0(i0)
    g = np.asarray(gray, dtype=np.float64)
    return np.log10(i0 / np.clip(g, 1.0, i0))


def fod_from_gray(gray, alpha=1.8, i0=255.0, force=False) -> FodMap:
    alpha = check_alpha(alpha, force)
    return FodMap(np.power(gray_od(gray, i0), alpha), alpha)


def fod_map(dab_img, alpha=1.8, i0=255.0, force=False) -> FodMap:
    return fod_from_gray(rgb_to_grayscale(dab_img), alpha, i0, force)


def pseudo_mask(o, tau=0.5) -> np.ndarray:
    """One-hot (H, W, 2) uint8 mask: channel 1 (tumor) where O > tau, else channel 0."""
    if not tau >= 0.0:
        raise InvalidParameter(f"mask threshold must be >= 0, got {tau}")
    tumor = as_values(o) > tau
    out = np.zeros(tumor.shape + (2,), dtype=np.uint8)
    out[..., TUMOR] = tumor
    out[..., NON_TUMOR] = ~tumor
    return out


def downsample_mask(m, h2, w2) -> np.ndarray:
    """Nearest-neighbour resample of a class mask to (h2, w2).

    Source index is ``floor((dst + 0.5) * size / new_size)``, which never mixes
    classes, so the one-hot property survives.
    """
    m = np.asarray(m)
    if m.ndim != 3:
        raise InvalidParameter(f"class mask must be (H, W, C), got shape {m.shape}")
    h, w = m.shape[:2]
    if not (1 <= h2 <= h and 1 <= w2 <= w):
        raise InvalidTarget(f"cannot resample a {h}x{w} mask to {h2}x{w2}")
    rows = np.floor((np.arange(h2) + 0.5) * (h / h2)).astype(np.int64)
    cols = np.floor((np.arange(w2) + 0.5) * (w / w2)).astype(np.int64)
    return m[np.minimum(rows, h - 1)][:, np.minimum(cols, w - 1)]


def heatmap(o) -> np.ndarray:
    """8-bit gray rendering, value e -> 255 (linear, saturating), as (H, W, 3)."""
    v = np.clip(as_values(o) / math.e * 255.0, 0.0, 255.0)
    g = np.rint(v).astype(np.uint8)
    return np.repeat(g[:, :, None], 3, axis=2)
