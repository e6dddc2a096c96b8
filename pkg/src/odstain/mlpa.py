"""Multi-level protein awareness losses between a fake and a real FOD map.

Scalar norms are absolute values. All reductions run in one fixed order, so
the terms are bit-reproducible for a given backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from odstain import kernels
from odstain.core import PipelineConfig
from odstain.errors import ImageTooSmall, InvalidParameter, ShapeMismatch
from odstain.fod import as_values

# upper edge of the histogram range; larger values land in the top bin
HISTO_TOP = math.e


@dataclass(frozen=True)
class MlpaBreakdown:
    avg_term: float
    histo_term: float
    block_term: float
    total: float

    def to_dict(self) -> dict:
        return {
            "avg": self.avg_term,
            "histo": self.histo_term,
            "block": self.block_term,
            "total": self.total,
        }


def _pair(o_f, o_r):
    f = as_values(o_f)
    r = as_values(o_r)
    if f.shape != r.shape:
        raise ShapeMismatch(f"FOD maps differ in shape: {f.shape} vs {r.shape}")
    return f, r


def _mean(v):
    # correctly rounded sum: independent of backend and traversal order
    return float(math.fsum(v.ravel())) / v.size


def mlpa_avg(o_f, o_r, beta=0.2) -> float:
    """Gated difference of mean expression.

    Returns ``|mean_f - mean_r|`` when it reaches ``beta * mean_r`` and 0
    inside that tolerance band. The band is scaled by the real map only.
    """
    if not 0.0 <= beta < 1.0:
        raise InvalidParameter(f"beta must lie in [0, 1), got {beta}")
    f, r = _pair(o_f, o_r)
    avg_f, avg_r = _mean(f), _mean(r)
    diff = abs(avg_f - avg_r)
    return diff if diff >= beta * avg_r else 0.0


def histo_accumulation(o, n_h=20) -> np.ndarray:
    """Per-bin sums of FOD values over ``n_h`` equal bins of (0, e].

    The bin is picked from ``min(O, e)`` but the raw value is accumulated,
    so the bins always sum to the total FOD mass. Zeros fall in no bin.
    """
    if int(n_h) != n_h or n_h < 1:
        raise InvalidParameter(f"n_h must be an integer >= 1, got {n_h}")
    return kernels.histo_accumulate(as_values(o), int(n_h), HISTO_TOP)


def mlpa_histo(o_f, o_r, n_h=20) -> float:
    f, r = _pair(o_f, o_r)
    hf = histo_accumulation(f, n_h)
    hr = histo_accumulation(r, n_h)
    return float(np.abs(hf - hr).sum()) / n_h


def block_averages(o, n_b=16) -> np.ndarray:
    """Mean FOD of each block of a sqrt(n_b) x sqrt(n_b) grid, row-major.

    Block ``r`` covers rows ``floor(r*H/k)`` up to ``floor((r+1)*H/k)``.
    """
    k = math.isqrt(int(n_b)) if n_b >= 1 else 0
    if int(n_b) != n_b or k * k != n_b:
        raise InvalidParameter(f"n_b must be a perfect square >= 1, got {n_b}")
    v = as_values(o)
    h, w = v.shape
    if h < k or w < k:
        raise ImageTooSmall(f"a {h}x{w} map cannot be split into {k}x{k} blocks")
    return kernels.block_means(v, k)


def mlpa_block(o_f, o_r, n_b=16) -> float:
    f, r = _pair(o_f, o_r)
    bf = block_averages(f, n_b)
    br = block_averages(r, n_b)
    return float(np.abs(bf - br).sum()) / n_b


def mlpa_total(o_f, o_r, cfg: PipelineConfig | None = None) -> MlpaBreakdown:
    cfg = cfg or PipelineConfig()
    a = mlpa_avg(o_f, o_r, cfg.beta)
    h = mlpa_histo(o_f, o_r, cfg.n_h)
    b = mlpa_block(o_f, o_r, cfg.n_b)
    return MlpaBreakdown(a, h, b, a + h + b)
