"""Image/tensor I/O, grayscale conversion and pipeline configuration.

Images are plain ``uint8`` arrays of shape (H, W, 3). Scalar fields are
``float64`` arrays of shape (H, W); tensors are (H, W, D) channel-last.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from numpy.lib import format as npy_format
from PIL import Image, UnidentifiedImageError

from odstain.errors import (
    InvalidAlpha,
    InvalidI0,
    InvalidParameter,
    IoFailure,
    MalformedHeader,
    MalformedImage,
    MissingFile,
    UnsupportedDtype,
    UnsupportedOrder,
)

# ITU-R BT.601 luma
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_NPY_DTYPE = np.dtype("<f4")


def as_rgb(img) -> np.ndarray:
    """Validate and return ``img`` as a contiguous (H, W, 3) uint8 array."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise MalformedImage(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer) or arr.min() < 0 or arr.max() > 255:
            raise MalformedImage(f"image values must be 8-bit integers, got {arr.dtype}")
        arr = arr.astype(np.uint8)
    return np.ascontiguousarray(arr)


def load_png(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}")
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise MalformedImage(f"{path}: not a PNG file ({im.format})")
            if im.mode not in {"L", "LA", "RGB", "RGBA", "P"}:
                # '1', 'I;16', 'I' and friends are not 8-bit per channel
                raise MalformedImage(f"{path}: unsupported PNG mode {im.mode!r} (need 8-bit)")
            im.load()
            if im.mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
            if im.mode in {"L", "LA"}:
                gray = np.asarray(im.getchannel(0), dtype=np.uint8)
                data = np.repeat(gray[:, :, None], 3, axis=2)
            else:
                data = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except MalformedImage:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise MalformedImage(f"{path}: cannot decode PNG ({exc})") from exc
    return np.ascontiguousarray(data)


def save_png(img, path) -> None:
    arr = as_rgb(img)
    try:
        Image.fromarray(arr, mode="RGB").save(Path(path), format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_npy(path) -> np.ndarray:
    """Read a 2-D or 3-D little-endian float32 C-order NPY v1.0 file.

    Returns the array exactly as stored (float32). Anything else is rejected
    with a typed error rather than coerced.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}")
    with open(path, "rb") as fh:
        try:
            version = npy_format.read_magic(fh)
        except ValueError as exc:
            raise MalformedHeader(f"{path}: {exc}") from exc
        if version != (1, 0):
            raise MalformedHeader(f"{path}: NPY version {version} not supported, need 1.0")
        try:
            shape, fortran_order, dtype = npy_format.read_array_header_1_0(fh)
        except ValueError as exc:
            raise MalformedHeader(f"{path}: {exc}") from exc
        if dtype != _NPY_DTYPE or dtype.byteorder == ">":
            raise UnsupportedDtype(f"{path}: dtype {dtype.str!r} is not '<f4'")
        if fortran_order:
            raise UnsupportedOrder(f"{path}: Fortran-order arrays are not supported")
        if len(shape) not in (2, 3) or any(s < 1 for s in shape):
            raise MalformedHeader(f"{path}: shape {shape} must be 2-D or 3-D and non-empty")
        count = math.prod(shape)
        payload = fh.read()
    if len(payload) != count * 4:
        raise MalformedHeader(
            f"{path}: payload has {len(payload)} bytes, header promises {count * 4}"
        )
    return np.frombuffer(payload, dtype=_NPY_DTYPE).reshape(shape).copy()


def save_npy(t, path) -> None:
    arr = np.asarray(t)
    if arr.ndim not in (2, 3) or arr.size == 0:
        raise MalformedHeader(f"can only store 2-D or 3-D tensors, got shape {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype=_NPY_DTYPE)
    try:
        with open(path, "wb") as fh:
            npy_format.write_array(fh, arr, version=(1, 0), allow_pickle=False)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def rgb_to_grayscale(img) -> np.ndarray:
    arr = as_rgb(img).astype(np.float64)
    r, g, b = LUMA_WEIGHTS
    return r * arr[..., 0] + g * arr[..., 1] + b * arr[..., 2]


def check_i0(i0) -> float:
    i0 = float(i0)
    if not (i0 > 0.0 and math.isfinite(i0)):
        raise InvalidI0(f"incident intensity must be positive, got {i0}")
    return i0


@dataclass(frozen=True)
class LossWeights:
    lambda_m: float = 1.0
    lambda_c: float = 2.5
    lambda_s: float = 0.05
    lambda_g: float = 10.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise InvalidParameter(f"{f.name} must be a finite value >= 0, got {v}")


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = 1.8
    beta: float = 0.2
    n_h: int = 20
    n_b: int = 16
    mask_tau: float = 0.5
    pos_tau: float = 0.15
    i0: float = 255.0
    weights: LossWeights = field(default_factory=LossWeights)
    # 9 numbers, row-major (hematoxylin, DAB, residual); None -> default H-DAB set
    stain_matrix: tuple | None = None
    # admit alpha <= 1 (e.g. the alpha = 1.0 ablation point)
    force_alpha: bool = False

    def __post_init__(self):
        if not math.isfinite(self.alpha) or self.alpha <= 0.0:
            raise InvalidAlpha(f"alpha must be a positive number, got {self.alpha}")
        if self.alpha <= 1.0 and not self.force_alpha:
            raise InvalidAlpha(f"alpha must be > 1, got {self.alpha} (use force to override)")
        if not 0.0 <= self.beta < 1.0:
            raise InvalidParameter(f"beta must lie in [0, 1), got {self.beta}")
        if int(self.n_h) != self.n_h or self.n_h < 1:
            raise InvalidParameter(f"n_h must be an integer >= 1, got {self.n_h}")
        side = math.isqrt(int(self.n_b)) if self.n_b >= 1 else 0
        if int(self.n_b) != self.n_b or self.n_b < 1 or side * side != self.n_b:
            raise InvalidParameter(f"n_b must be a perfect square >= 1, got {self.n_b}")
        if self.mask_tau < 0.0 or self.pos_tau < 0.0:
            raise InvalidParameter("thresholds mask_tau and pos_tau must be >= 0")
        check_i0(self.i0)
        if self.stain_matrix is not None:
            vals = tuple(float(v) for v in self.stain_matrix)
            if len(vals) != 9:
                raise InvalidParameter(f"stain_matrix needs 9 numbers, got {len(vals)}")
            object.__setattr__(self, "stain_matrix", vals)
        object.__setattr__(self, "n_h", int(self.n_h))
        object.__setattr__(self, "n_b", int(self.n_b))

    def to_dict(self) -> dict:
        """Flat mapping, the same layout the config file uses."""
        d = asdict(self)
        d.update(d.pop("weights"))
        d["stain_matrix"] = list(self.stain_matrix) if self.stain_matrix else None
        return d

    @classmethod
    def from_mapping(cls, mapping) -> "PipelineConfig":
        weight_keys = {f.name for f in fields(LossWeights)}
        own_keys = {f.name for f in fields(cls)} - {"weights"}
        unknown = set(mapping) - weight_keys - own_keys
        if unknown:
            raise InvalidParameter(f"unknown config keys: {', '.join(sorted(unknown))}")
        weights = LossWeights(**{k: float(mapping[k]) for k in weight_keys if k in mapping})
        kwargs = {k: mapping[k] for k in own_keys if k in mapping and mapping[k] is not None}
        return cls(weights=weights, **kwargs)

    def replace(self, **overrides) -> "PipelineConfig":
        """Copy with flat overrides applied; ``None`` values are ignored."""
        d = self.to_dict()
        d.update({k: v for k, v in overrides.items() if v is not None})
        return PipelineConfig.from_mapping(d)


CONFIG_ENV = "ODSTAIN_CONFIG"


def load_config(path=None) -> PipelineConfig:
    """Load a flat JSON config; falls back to $ODSTAIN_CONFIG, then defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidParameter(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InvalidParameter(f"{path}: config must be a JSON object")
    return PipelineConfig.from_mapping(data)
