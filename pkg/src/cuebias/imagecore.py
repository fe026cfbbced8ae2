"""Raster types, PNG I/O, resizing and Gaussian filtering.

Images are plain ``float64`` numpy arrays of shape ``(H, W, C)`` with
``C in (1, 3)`` and a nominal range of [0, 1]. Label masks are ``uint8``
arrays of shape ``(H, W)`` holding class IDs, with 255 reserved for
"ignore".
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from .errors import (
    DimensionMismatchError,
    ImageIOError,
    MissingFileError,
    NotPNGError,
    UnsupportedBitDepthError,
    UnsupportedColorTypeError,
    ValidationError,
)

IGNORE = 255

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_COLOR_TYPES = {0: "grayscale", 2: "rgb", 3: "palette", 4: "grayscale+alpha", 6: "rgba"}


def as_image(img: np.ndarray) -> np.ndarray:
    """Validate and normalise an image to ``float64`` with shape (H, W, C)."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValidationError(f"expected an (H, W, 1|3) image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValidationError("image is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("image contains non-finite samples")
    return arr


def as_label(label: np.ndarray, num_classes: int | None = None) -> np.ndarray:
    arr = np.asarray(label)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValidationError(f"expected an (H, W) label mask, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > IGNORE):
        raise ValidationError("label IDs must lie in [0, 255]")
    arr = arr.astype(np.uint8)
    if num_classes is not None:
        bad = (arr >= num_classes) & (arr != IGNORE)
        if bad.any():
            raise ValidationError(f"label IDs must be < {num_classes} or {IGNORE}")
    return arr


def check_same_size(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatchError(f"size mismatch: {a.shape[:2]} vs {b.shape[:2]}")


# --------------------------------------------------------------------------
# PNG I/O


def _png_header(path: Path) -> tuple[int, int]:
    """Return (bit_depth, color_type) from the IHDR chunk."""
    with open(path, "rb") as fh:
        head = fh.read(33)
    if len(head) < 33 or head[:8] != _PNG_SIGNATURE or head[12:16] != b"IHDR":
        raise NotPNGError(f"{path}: not a PNG file")
    bit_depth, color_type = struct.unpack(">BB", head[24:26])
    return bit_depth, color_type


def _read_png_bytes(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"{path}: no such file")
    bit_depth, color_type = _png_header(path)
    if color_type not in (0, 2):
        name = _COLOR_TYPES.get(color_type, str(color_type))
        raise UnsupportedColorTypeError(f"{path}: unsupported color type ({name})")
    if bit_depth != 8:
        raise UnsupportedBitDepthError(f"{path}: unsupported bit depth ({bit_depth})")
    with Image.open(path) as im:
        data = np.array(im)
    if data.dtype != np.uint8:
        raise UnsupportedBitDepthError(f"{path}: unsupported bit depth")
    return data


def load_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit grayscale or RGB PNG; byte ``v`` maps to ``v / 255``."""
    data = _read_png_bytes(path)
    if data.ndim == 2:
        data = data[:, :, None]
    return data.astype(np.float64) / 255.0


def load_label(path: str | Path) -> np.ndarray:
    """Load an 8-bit single-channel PNG of raw class IDs."""
    data = _read_png_bytes(path)
    if data.ndim != 2:
        raise UnsupportedColorTypeError(f"{path}: label masks must be single-channel")
    return data


def load_png(path: str | Path, kind: str = "image") -> np.ndarray:
    if kind == "image":
        return load_image(path)
    if kind == "label":
        return load_label(path)
    raise ValidationError(f"unknown PNG kind {kind!r}")


def quantize(img: np.ndarray) -> np.ndarray:
    """Map [0, 1] samples to bytes with round-half-up."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValidationError("image samples must lie in [0, 1] before quantization")
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def save_image(img: np.ndarray, path: str | Path) -> None:
    data = quantize(as_image(img))
    if data.shape[2] == 1:
        data = data[:, :, 0]
    _write_png(data, path)


def save_label(label: np.ndarray, path: str | Path) -> None:
    _write_png(as_label(label), path)


def save_png(arr: np.ndarray, path: str | Path) -> None:
    """Save an image (float) or label mask (integer) as an 8-bit PNG."""
    if np.issubdtype(np.asarray(arr).dtype, np.integer):
        save_label(arr, path)
    else:
        save_image(arr, path)


def _write_png(data: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(data).save(path, format="PNG")
    except OSError as exc:
        raise ImageIOError(f"{path}: cannot write ({exc})") from exc


# --------------------------------------------------------------------------
# Resampling


def _linear_taps(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize with half-pixel-centre alignment and edge clamping."""
    if out_w < 1 or out_h < 1:
        raise ValidationError("target dimensions must be >= 1")
    img = as_image(img)
    h, w, _ = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    y0, y1, wy = _linear_taps(h, out_h)
    x0, x1, wx = _linear_taps(w, out_w)
    wy = wy[:, None, None]
    rows = img[y0] * (1.0 - wy) + img[y1] * wy
    wx = wx[None, :, None]
    out = rows[:, x0] * (1.0 - wx) + rows[:, x1] * wx
    # convex weights can overshoot by an ulp
    return np.clip(out, img.min(), img.max())


def resize_nearest(label: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Nearest-neighbour resize for label masks (same centre convention)."""
    if out_w < 1 or out_h < 1:
        raise ValidationError("target dimensions must be >= 1")
    label = np.asarray(label)
    h, w = label.shape[:2]
    ys = np.minimum(np.floor((np.arange(out_h) + 0.5) * h / out_h).astype(np.intp), h - 1)
    xs = np.minimum(np.floor((np.arange(out_w) + 0.5) * w / out_w).astype(np.intp), w - 1)
    return label[ys][:, xs]


# --------------------------------------------------------------------------
# Gaussian filtering


@dataclass(frozen=True)
class GaussianSpec:
    sigma: float
    truncate: float = 4.0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not self.truncate > 0:
            raise ValidationError(f"truncate must be positive, got {self.truncate}")

    @property
    def radius(self) -> int:
        return int(math.ceil(self.truncate * self.sigma))


def gaussian_kernel1d(sigma: float, radius: int) -> np.ndarray:
    """Sampled 1-D Gaussian on ``[-radius, radius]``, normalised to sum 1."""
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def separable_filter(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Correlate every channel with ``kernel`` along rows then columns.

    Borders use half-sample symmetric extension (``d c b a | a b c d``),
    which keeps the channel sum of any image unchanged.
    """
    out = correlate1d(img, kernel, axis=0, mode="reflect")
    return correlate1d(out, kernel, axis=1, mode="reflect")


def gaussian_blur(img: np.ndarray, spec: GaussianSpec | float) -> np.ndarray:
    if not isinstance(spec, GaussianSpec):
        spec = GaussianSpec(float(spec))
    img = as_image(img)
    return separable_filter(img, gaussian_kernel1d(spec.sigma, spec.radius))
