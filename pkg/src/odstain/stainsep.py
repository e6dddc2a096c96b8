"""Optical density and Ruifrok-Johnston colour deconvolution for H-DAB images.

A stain matrix is a (3, 3) float array whose rows are unit absorption vectors
(hematoxylin, DAB, residual) over the R, G, B channels.
"""

from __future__ import annotations

import numpy as np

from odstain import kernels
from odstain.core import as_rgb, check_i0
from odstain.errors import InvalidParameter, SingularMatrix

HEMATOXYLIN, DAB, RESIDUAL = 0, 1, 2

HEMATOXYLIN_VECTOR = (0.650, 0.704, 0.286)
DAB_VECTOR = (0.268, 0.570, 0.776)

_MAX_CONDITION = 1e12


def stain_matrix(h=HEMATOXYLIN_VECTOR, d=DAB_VECTOR, residual=None) -> np.ndarray:
    """Build a row-normalised stain matrix.

    With ``residual=None`` the third row is the normalised cross product of
    the first two.
    """
    h = _unit(h, "hematoxylin")
    d = _unit(d, "DAB")
    r = np.cross(h, d) if residual is None else np.asarray(residual, dtype=np.float64)
    m = np.stack([h, d, _unit(r, "residual")])
    check_stain_matrix(m)
    return m


def stain_matrix_from_values(values) -> np.ndarray:
    """Stain matrix from 9 row-major numbers; rows are normalised."""
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size != 9:
        raise InvalidParameter(f"a stain matrix needs 9 numbers, got {vals.size}")
    rows = vals.reshape(3, 3)
    return stain_matrix(rows[0], rows[1], rows[2])


def _unit(v, name):
    v = np.asarray(v, dtype=np.float64).reshape(3)
    n = float(np.linalg.norm(v))
    if not np.isfinite(n) or n < 1e-12:
        raise SingularMatrix(f"{name} stain vector has zero length")
    return v / n


def check_stain_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise InvalidParameter(f"stain matrix must be 3x3, got {m.shape}")
    if not np.allclose(np.linalg.norm(m, axis=1), 1.0, atol=1e-6):
        raise InvalidParameter("stain matrix rows must have unit length")
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > _MAX_CONDITION:
        raise SingularMatrix(f"stain matrix is singular (condition number {cond:.3g})")
    return m


DEFAULT_STAIN_MATRIX = stain_matrix()
DEFAULT_STAIN_MATRIX.setflags(write=False)


def od_transform(img, i0=255.0) -> np.ndarray:
    """Per-channel optical density ``-log10(max(I, 1) / i0)``, shape (H, W, 3)."""
    i0 = check_i0(i0)
    arr = as_rgb(img).astype(np.float64)
    return np.log10(i0 / np.maximum(arr, 1.0))


def separate(od, m=DEFAULT_STAIN_MATRIX) -> np.ndarray:
    """Unmix an OD image into per-stain amounts, negatives clamped to 0.

    Solves ``od = a @ m`` per pixel (the OD vector is the amount-weighted sum
    of the stain rows), i.e. ``a = od @ inv(m)``.
    """
    m = check_stain_matrix(m)
    inv = np.linalg.inv(m)
    od = np.asarray(od, dtype=np.float64)
    if od.shape[-1] != 3:
        raise InvalidParameter(f"OD image needs 3 channels, got shape {od.shape}")
    flat = od.reshape(-1, 3)
    return kernels.deconvolve(flat, inv).reshape(od.shape)


def reconstruct(conc, m=DEFAULT_STAIN_MATRIX, i0=255.0) -> np.ndarray:
    """Render per-stain amounts back to an 8-bit RGB image (all stains)."""
    i0 = check_i0(i0)
    m = check_stain_matrix(m)
    conc = np.asarray(conc, dtype=np.float64)
    od = conc[..., 0:1] * m[0] + conc[..., 1:2] * m[1] + conc[..., 2:3] * m[2]
    return _to_uint8(i0 * np.power(10.0, -od))


def reconstruct_stain(conc, stain_index, m=DEFAULT_STAIN_MATRIX, i0=255.0) -> np.ndarray:
    """Render a single stain's amounts: ``round(i0 * 10**(-a_s * v_s))`` per channel."""
    if stain_index not in (0, 1, 2):
        raise InvalidParameter(f"stain_index must be 0, 1 or 2, got {stain_index}")
    i0 = check_i0(i0)
    m = check_stain_matrix(m)
    a = np.asarray(conc, dtype=np.float64)[..., stain_index]
    return _to_uint8(i0 * np.power(10.0, -a[..., None] * m[stain_index]))


def _to_uint8(intensity):
    return np.clip(np.rint(intensity), 0, 255).astype(np.uint8)


def dab_image(img, m=DEFAULT_STAIN_MATRIX, i0=255.0) -> np.ndarray:
    """The DAB-only rendering of an IHC image."""
    conc = separate(od_transform(img, i0), m)
    return reconstruct_stain(conc, DAB, m, i0)
