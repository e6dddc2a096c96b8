"""Dispatch to the active kernel backend (see ``odstain._accel``)."""

from odstain._accel import BACKEND, USE_NUMBA

if USE_NUMBA:
    from odstain import _kernels_numba as _impl
else:
    from odstain import _kernels_numpy as _impl

deconvolve = _impl.deconvolve
histo_bins = _impl.histo_bins
histo_accumulate = _impl.histo_accumulate
block_means = _impl.block_means
weighted_sums = _impl.weighted_sums
cosine_map = _impl.cosine_map

__all__ = [
    "BACKEND",
    "deconvolve",
    "histo_bins",
    "histo_accumulate",
    "block_means",
    "weighted_sums",
    "cosine_map",
]
