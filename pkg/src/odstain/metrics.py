"""Pathology-relevance and image-quality metrics over fake/real IHC pairs.

Differences are always fake minus real, so a perfect generator scores 0 and
under-staining shows up negative.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from odstain.core import LossWeights, PipelineConfig, as_rgb, load_png, rgb_to_grayscale
from odstain.errors import (
    EmptyReport,
    ImageTooSmall,
    InvalidParameter,
    LengthMismatch,
    MissingFile,
    OdstainError,
    PairingMismatch,
    ShapeMismatch,
    Undefined,
)
from odstain.fod import gray_od
from odstain.mlpa import mlpa_total
from odstain.stainsep import DEFAULT_STAIN_MATRIX, dab_image, stain_matrix_from_values

PSNR_SATURATION = 100.0
# Table-style IOD columns are shown in units of 1e7
IOD_DISPLAY_SCALE = 1e-7

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DATA_RANGE = 255.0


def iod_miod(img, m=DEFAULT_STAIN_MATRIX, i0=255.0, pos_tau=0.15):
    """Integrated and mean integrated OD of the DAB signal.

    Returns ``(iod, miod, positive_count)``; positives are pixels whose plain
    grayscale OD of the DAB rendering exceeds ``pos_tau``.
    """
    if not pos_tau >= 0.0:
        raise InvalidParameter(f"pos_tau must be >= 0, got {pos_tau}")
    od = gray_od(rgb_to_grayscale(dab_image(img, m, i0)), i0)
    positive = od[od > pos_tau]
    count = int(positive.size)
    if count == 0:
        return 0.0, 0.0, 0
    iod = math.fsum(positive)
    return iod, iod / count, count


def pearson_r(xs, ys) -> float:
    x = np.asarray(xs, dtype=np.float64).ravel()
    y = np.asarray(ys, dtype=np.float64).ravel()
    if x.size != y.size:
        raise LengthMismatch(f"sequences differ in length: {x.size} vs {y.size}")
    if x.size < 2:
        raise LengthMismatch("Pearson correlation needs at least 2 samples")
    dx = x - math.fsum(x) / x.size
    dy = y - math.fsum(y) / y.size
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx == 0.0 or syy == 0.0:
        raise Undefined("Pearson correlation is undefined for a constant sequence")
    r = math.fsum(dx * dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def _same_shape(a, b):
    a = as_rgb(a)
    b = as_rgb(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"images differ in shape: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """PSNR in dB over all pixels and channels; identical images give 100."""
    a, b = _same_shape(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_SATURATION
    return 10.0 * math.log10(DATA_RANGE**2 / mse)


def _gaussian_window():
    x = np.arange(SSIM_WINDOW, dtype=np.float64) - SSIM_WINDOW // 2
    g = np.exp(-(x * x) / (2.0 * SSIM_SIGMA**2))
    return g / g.sum()


_WINDOW = _gaussian_window()


def _smooth(plane):
    out = ndimage.correlate1d(plane, _WINDOW, axis=0, mode="reflect")
    return ndimage.correlate1d(out, _WINDOW, axis=1, mode="reflect")


def ssim_map(x, y) -> np.ndarray:
    """Local SSIM of two grayscale planes (Gaussian window, symmetric borders)."""
    c1 = (SSIM_K1 * DATA_RANGE) ** 2
    c2 = (SSIM_K2 * DATA_RANGE) ** 2
    mx, my = _smooth(x), _smooth(y)
    sxx = _smooth(x * x) - mx * mx
    syy = _smooth(y * y) - my * my
    sxy = _smooth(x * y) - mx * my
    num = (2.0 * mx * my + c1) * (2.0 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(a, b) -> float:
    """Mean SSIM on the BT.601 grayscale planes."""
    a, b = _same_shape(a, b)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ImageTooSmall(f"SSIM needs both sides >= {SSIM_WINDOW}, got {a.shape[:2]}")
    s = ssim_map(rgb_to_grayscale(a), rgb_to_grayscale(b))
    return math.fsum(s.ravel()) / s.size


@dataclass(frozen=True)
class PairMetrics:
    name: str
    iod_fake: float
    iod_real: float
    miod_fake: float
    miod_real: float
    positive_fake: int
    positive_real: int
    psnr: float
    ssim: float


@dataclass(frozen=True)
class DatasetReport:
    n_pairs: int
    mean_miod_diff: float
    mean_iod_diff: float
    pearson_r: float | None
    mean_psnr: float
    mean_ssim: float
    pairs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["iod_scale"] = IOD_DISPLAY_SCALE
        return d


def _stain_matrix(cfg):
    if cfg.stain_matrix is None:
        return DEFAULT_STAIN_MATRIX
    return stain_matrix_from_values(cfg.stain_matrix)


def evaluate_pair(name, fake, real, cfg: PipelineConfig | None = None) -> PairMetrics:
    cfg = cfg or PipelineConfig()
    m = _stain_matrix(cfg)
    fake, real = _same_shape(fake, real)
    iod_f, miod_f, n_f = iod_miod(fake, m, cfg.i0, cfg.pos_tau)
    iod_r, miod_r, n_r = iod_miod(real, m, cfg.i0, cfg.pos_tau)
    return PairMetrics(
        name, iod_f, iod_r, miod_f, miod_r, n_f, n_r, psnr(fake, real), ssim(fake, real)
    )


def _png_names(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingFile(f"no such directory: {directory}")
    return {p.name for p in directory.iterdir() if p.is_file() and p.suffix.lower() == ".png"}


def pair_names(fake_dir, real_dir) -> list:
    """Shared PNG names in lexicographic order; any unmatched name is an error."""
    fake = _png_names(fake_dir)
    real = _png_names(real_dir)
    if fake - real:
        raise PairingMismatch(min(fake - real), "real")
    if real - fake:
        raise PairingMismatch(min(real - fake), "fake")
    if not fake:
        raise EmptyReport(f"no PNG images found in {fake_dir}")
    return sorted(fake)


def _fmean(values):
    return math.fsum(values) / len(values)


def summarize(pairs) -> DatasetReport:
    if not pairs:
        raise EmptyReport("cannot summarise an empty set of pairs")
    try:
        r = pearson_r([p.iod_fake for p in pairs], [p.iod_real for p in pairs])
    except (Undefined, LengthMismatch):
        r = None
    return DatasetReport(
        n_pairs=len(pairs),
        mean_miod_diff=_fmean([p.miod_fake - p.miod_real for p in pairs]),
        mean_iod_diff=_fmean([p.iod_fake - p.iod_real for p in pairs]),
        pearson_r=r,
        mean_psnr=_fmean([p.psnr for p in pairs]),
        mean_ssim=_fmean([p.ssim for p in pairs]),
        pairs=list(pairs),
    )


def evaluate_dataset(fake_dir, real_dir, cfg: PipelineConfig | None = None, jobs=1) -> DatasetReport:
    cfg = cfg or PipelineConfig()
    names = pair_names(fake_dir, real_dir)
    fake_dir, real_dir = Path(fake_dir), Path(real_dir)

    def one(name):
        try:
            return evaluate_pair(name, load_png(fake_dir / name), load_png(real_dir / name), cfg)
        except OdstainError as exc:
            exc.args = (f"{name}: {exc}",)
            raise

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            pairs = list(pool.map(one, names))
    else:
        pairs = [one(n) for n in names]
    return summarize(pairs)


def cumulative_iod_curve(report: DatasetReport) -> list:
    """Rows ``(index, cum_iod_fake, cum_iod_real)``, index counting from 1."""
    if not report.pairs:
        raise EmptyReport("report has no pairs")
    rows = []
    cf = cr = 0.0
    for i, p in enumerate(report.pairs, start=1):
        cf += p.iod_fake
        cr += p.iod_real
        rows.append((i, cf, cr))
    return rows


def combine_losses(mlpa, ctpc, ssim_val, w=None) -> float:
    """``lambda_m * mlpa + lambda_c * ctpc + lambda_s * (1 - ssim)``."""
    w = w or LossWeights()
    if ctpc < 0.0:
        raise InvalidParameter(f"ctpc must be >= 0, got {ctpc}")
    if ssim_val > 1.0:
        raise InvalidParameter(f"ssim must be <= 1, got {ssim_val}")
    return w.lambda_m * mlpa + w.lambda_c * ctpc + w.lambda_s * (1.0 - ssim_val)


def pathology_loss(o_f, o_r, ctpc, ssim_val, w=None, cfg: PipelineConfig | None = None) -> float:
    cfg = cfg or PipelineConfig()
    w = w or cfg.weights
    return combine_losses(mlpa_total(o_f, o_r, cfg).total, ctpc, ssim_val, w)


# --- serialisation -------------------------------------------------------

PAIR_COLUMNS = [
    "name",
    "iod_fake",
    "iod_real",
    "miod_fake",
    "miod_real",
    "positive_fake",
    "positive_real",
    "psnr",
    "ssim",
]


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def report_json(report: DatasetReport, config: dict | None = None) -> str:
    d = report.to_dict()
    if config is not None:
        d["config"] = config
    return dumps_json(d)


def _cell(v):
    return repr(v) if isinstance(v, float) else str(v)


def report_csv(report: DatasetReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PAIR_COLUMNS)
    for p in report.pairs:
        writer.writerow([_cell(getattr(p, c)) for c in PAIR_COLUMNS])
    return buf.getvalue()


def curve_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "cum_iod_fake", "cum_iod_real"])
    for i, cf, cr in rows:
        writer.writerow([i, repr(cf), repr(cr)])
    return buf.getvalue()
