"""Channel-wise image corruptions for robustness evaluation.

Five families (contrast, uniform noise, low-pass, high-pass, phase noise)
plus an optional sixth (uniform noise on a contrast-reduced image). Each
``apply_*`` function clips its result to [0, 1] unless ``clip=False``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import fft

from .errors import ValidationError
from .imagecore import GaussianSpec, as_image, gaussian_blur
from .rng import SeedStream, derive_seed

CITYSCAPES_MEANS = (0.2945, 0.3334, 0.2949)
REDUCED_CONTRAST = 0.3

CONTRAST_LEVELS = (0.01, 0.03, 0.05, 0.1, 0.15, 0.3, 0.5, 1.0)
NOISE_LEVELS = (0.0, 0.03, 0.05, 0.1, 0.2, 0.35, 0.6, 0.9)
LOW_PASS_LEVELS = (1.0, 3.0, 7.0, 10.0, 15.0, 40.0)
HIGH_PASS_LEVELS = (0.4, 0.45, 0.55, 0.7, 1.0, 1.5, 3.0)
PHASE_LEVELS = (0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0)

GRID = {
    "contrast": CONTRAST_LEVELS,
    "uniform-noise": NOISE_LEVELS,
    "low-pass": LOW_PASS_LEVELS,
    "high-pass": HIGH_PASS_LEVELS,
    "phase-noise": PHASE_LEVELS,
    "noise-on-reduced-contrast": NOISE_LEVELS,
}
DEFAULT_FAMILIES = ("contrast", "uniform-noise", "low-pass", "high-pass", "phase-noise")
FAMILIES = DEFAULT_FAMILIES + ("noise-on-reduced-contrast",)
STOCHASTIC = {"uniform-noise": "noise", "noise-on-reduced-contrast": "noise", "phase-noise": "phase"}


@dataclass(frozen=True)
class CorruptionSpec:
    family: str
    level: float

    def __post_init__(self) -> None:
        if self.family not in GRID:
            raise ValidationError(f"unknown corruption family {self.family!r}")

    @property
    def level_name(self) -> str:
        return format(self.level, "g")

    def check_grid(self) -> None:
        if self.level not in GRID[self.family]:
            raise ValidationError(
                f"level {self.level:g} is not in the {self.family} grid "
                f"{list(GRID[self.family])}; pass a custom level explicitly to override"
            )

    def to_dict(self) -> dict:
        return {"family": self.family, "level": self.level}


def corruption_grid(reduced_contrast: bool = False) -> list[CorruptionSpec]:
    """All (family, level) pairs: 36 by default, 44 with the optional family."""
    families = FAMILIES if reduced_contrast else DEFAULT_FAMILIES
    return [CorruptionSpec(f, lvl) for f in families for lvl in GRID[f]]


def _finish(out: np.ndarray, clip: bool) -> np.ndarray:
    return np.clip(out, 0.0, 1.0) if clip else out


def apply_contrast(img: np.ndarray, c: float, clip: bool = True) -> np.ndarray:
    """Scale contrast towards mid-grey: ``(1 - c) / 2 + c * I``."""
    if not 0.0 <= c <= 1.0:
        raise ValidationError(f"contrast factor must lie in [0, 1], got {c}")
    img = as_image(img)
    return _finish((1.0 - c) / 2.0 + c * img, clip)


def apply_uniform_noise(img: np.ndarray, eta: float, stream: SeedStream,
                        clip: bool = True) -> np.ndarray:
    if eta < 0:
        raise ValidationError(f"noise amplitude must be >= 0, got {eta}")
    img = as_image(img)
    if eta == 0:
        return _finish(img.copy(), clip)
    noise = eta * (2.0 * stream.uniforms(img.shape) - 1.0)
    return _finish(img + noise, clip)


def apply_low_pass(img: np.ndarray, sigma: float, clip: bool = True) -> np.ndarray:
    return _finish(gaussian_blur(img, GaussianSpec(sigma, 4.0)), clip)


def apply_high_pass(img: np.ndarray, sigma: float,
                    means: Sequence[float] = CITYSCAPES_MEANS,
                    clip: bool = True) -> np.ndarray:
    """Subtract the blurred image and re-centre each channel on ``means``."""
    img = as_image(img)
    means = np.asarray(means, dtype=np.float64)
    if means.shape != (img.shape[2],):
        if img.shape[2] == 1 and means.size == 3:
            means = means.mean(keepdims=True)
        else:
            raise ValidationError("need one dataset mean per channel")
    if np.any((means < 0) | (means > 1)):
        raise ValidationError("dataset means must lie in [0, 1]")
    hp = img - gaussian_blur(img, GaussianSpec(sigma, 4.0))
    hp += means - hp.mean(axis=(0, 1))
    return _finish(hp, clip)


def hermitian_phase_field(stream: SeedStream, height: int, width: int,
                          width_deg: float) -> np.ndarray:
    """Random phase field with ``phi(-k) = -phi(k)`` (indices mod shape).

    One uniform draw per bin in row-major order; only the canonical member
    of each conjugate pair keeps its draw. Self-conjugate bins (DC and the
    Nyquist bins) stay at zero.
    """
    draws = stream.uniforms((height, width))
    half = np.deg2rad(width_deg)
    phi = half * (2.0 * draws - 1.0)
    idx = np.arange(height * width).reshape(height, width)
    conj = ((-np.arange(height)[:, None]) % height) * width + (-np.arange(width)[None, :]) % width
    field = np.zeros(height * width)
    canon = (idx < conj).ravel()
    field[idx.ravel()[canon]] = phi.ravel()[canon]
    field[conj.ravel()[canon]] = -phi.ravel()[canon]
    return field.reshape(height, width)


def apply_phase_noise(img: np.ndarray, w: float, stream: SeedStream,
                      clip: bool = True) -> np.ndarray:
    """Perturb Fourier phases of every channel by an independent field in [-w, w] degrees."""
    if not 0.0 <= w <= 180.0:
        raise ValidationError(f"phase width must lie in [0, 180] degrees, got {w}")
    img = as_image(img)
    h, wd, nc = img.shape
    out = np.empty_like(img)
    for ch in range(nc):
        field = hermitian_phase_field(stream, h, wd, w)
        spec = fft.fft2(img[:, :, ch]) * np.exp(1j * field)
        out[:, :, ch] = fft.ifft2(spec).real
    return _finish(out, clip)


def corruption_stream(global_seed: int, content_id: str, spec: CorruptionSpec) -> SeedStream:
    purpose = STOCHASTIC.get(spec.family, "noise")
    return derive_seed(global_seed, f"{content_id}|{spec.family}|{spec.level_name}", purpose)


def apply_corruption(img: np.ndarray, spec: CorruptionSpec, stream: SeedStream | None = None,
                     means: Sequence[float] = CITYSCAPES_MEANS,
                     reduced_contrast: float = REDUCED_CONTRAST,
                     clip: bool = True) -> np.ndarray:
    if spec.family in STOCHASTIC and stream is None:
        raise ValidationError(f"{spec.family} needs a seed stream")
    if spec.family == "contrast":
        return apply_contrast(img, spec.level, clip)
    if spec.family == "uniform-noise":
        return apply_uniform_noise(img, spec.level, stream, clip)
    if spec.family == "noise-on-reduced-contrast":
        low = apply_contrast(img, reduced_contrast, clip=False)
        return apply_uniform_noise(low, spec.level, stream, clip)
    if spec.family == "low-pass":
        return apply_low_pass(img, spec.level, clip)
    if spec.family == "high-pass":
        return apply_high_pass(img, spec.level, means, clip)
    return apply_phase_noise(img, spec.level, stream, clip)
