"""Synthetic H-DAB image pairs for tests, benchmarks and smoke runs.

A "real" tile is a smooth hematoxylin background with a few Gaussian DAB
blobs; its "fake" counterpart moves the blobs a little and rescales their
amount, mimicking a generator that is roughly but not exactly right.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from odstain.core import save_png
from odstain.stainsep import DEFAULT_STAIN_MATRIX, reconstruct


def _blobs(shape, centers, radii, amounts):
    yy, xx = np.mgrid[0 : shape[0], 0 : shape[1]].astype(np.float64)
    field = np.zeros(shape)
    for (cy, cx), r, a in zip(centers, radii, amounts):
        field += a * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * r * r))
    return field


def make_pair(rng, size=128, m=DEFAULT_STAIN_MATRIX):
    """Return ``(fake, real)`` uint8 images of shape (size, size, 3)."""
    shape = (size, size)
    hema = ndimage.gaussian_filter(rng.random(shape), sigma=size / 32.0)
    hema = 0.15 + 0.5 * (hema - hema.min()) / max(np.ptp(hema), 1e-12)

    n_blobs = int(rng.integers(1, 6))
    level = rng.uniform(0.2, 1.4)
    centers = rng.uniform(0.1 * size, 0.9 * size, size=(n_blobs, 2))
    radii = rng.uniform(size / 24.0, size / 8.0, size=n_blobs)
    amounts = level * rng.uniform(0.5, 1.0, size=n_blobs)

    shift = rng.normal(0.0, size / 40.0, size=centers.shape)
    scale = rng.uniform(0.6, 1.3)

    def render(dab):
        conc = np.stack([hema, np.minimum(dab, 2.0), np.zeros(shape)], axis=-1)
        return reconstruct(conc, m)

    real = render(_blobs(shape, centers, radii, amounts))
    fake = render(_blobs(shape, centers + shift, radii, scale * amounts))
    return fake, real


def write_corpus(out_dir, n_pairs=20, size=512, seed=0):
    """Write ``out_dir/fake/*.png`` and ``out_dir/real/*.png``; returns both dirs."""
    out_dir = Path(out_dir)
    fake_dir, real_dir = out_dir / "fake", out_dir / "real"
    fake_dir.mkdir(parents=True, exist_ok=True)
    real_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n_pairs):
        fake, real = make_pair(rng, size)
        save_png(fake, fake_dir / f"tile_{i:03d}.png")
        save_png(real, real_dir / f"tile_{i:03d}.png")
    return fake_dir, real_dir
