"""Voronoi-cell style transfer.

The built-in stylizer is AdaIN with an identity encoder: each channel of
the content image is standardised and re-scaled to the style image's
channel mean and standard deviation. Layers rendered elsewhere (e.g. by a
neural AdaIN decoder) can be plugged in through the ``prerendered`` mode.
Stylized layers are computed over the full image and then copied into the
selected Voronoi cells.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, MissingFileError, ValidationError
from .imagecore import as_image, load_image, resize_bilinear
from .rng import SeedStream, derive_seed, image_key
from .voronoi import VoronoiPartition, assign_cells, sample_sites, select_stylized

STD_FLOOR = 1e-6


@dataclass(frozen=True)
class ChannelStats:
    mean: np.ndarray
    std: np.ndarray


def channel_stats(img: np.ndarray) -> ChannelStats:
    """Population mean and standard deviation per channel (float64)."""
    img = as_image(img)
    flat = img.reshape(-1, img.shape[2])
    mean = flat.mean(axis=0)
    std = np.sqrt(((flat - mean) ** 2).mean(axis=0))
    # flat channels get exact moments instead of summation round-off
    lo, hi = flat.min(axis=0), flat.max(axis=0)
    flat_ch = lo == hi
    mean[flat_ch] = lo[flat_ch]
    std[flat_ch] = 0.0
    return ChannelStats(mean, std)


def adain_pixel(content: np.ndarray, style_stats: ChannelStats,
                content_stats: ChannelStats | None = None, clip: bool = True) -> np.ndarray:
    """``sigma_s * (x - mu_c) / max(sigma_c, eps) + mu_s`` per channel."""
    content = as_image(content)
    cs = content_stats or channel_stats(content)
    s_mean = np.asarray(style_stats.mean, dtype=np.float64)
    s_std = np.asarray(style_stats.std, dtype=np.float64)
    nc = content.shape[2]
    if s_mean.shape == (1,):
        s_mean, s_std = np.repeat(s_mean, nc), np.repeat(s_std, nc)
    elif s_mean.shape != (nc,):
        raise DimensionMismatchError("style statistics do not match the content channels")
    out = s_std * (content - cs.mean) / np.maximum(cs.std, STD_FLOOR) + s_mean
    return np.clip(out, 0.0, 1.0) if clip else out


@functools.lru_cache(maxsize=4096)
def _style_stats_from_file(path: str) -> ChannelStats:
    return channel_stats(load_image(path))


@dataclass
class StyleSource:
    """Where stylized layers come from.

    ``builtin``: ``styles`` maps style ID to a style image path.
    ``prerendered``: layers are read from ``prerendered_dir/<content_id>/<style_id>.png``.
    """

    mode: str = "builtin"
    styles: dict[str, Path] = field(default_factory=dict)
    prerendered_dir: Path | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("builtin", "prerendered"):
            raise ValidationError(f"unknown style mode {self.mode!r}")
        if self.mode == "prerendered" and self.prerendered_dir is None:
            raise ValidationError("prerendered mode needs a layer directory")

    @classmethod
    def from_directory(cls, style_dir: str | Path, mode: str = "builtin",
                       prerendered_dir: str | Path | None = None) -> StyleSource:
        style_dir = Path(style_dir)
        paths = sorted(style_dir.rglob("*.png")) if style_dir.is_dir() else []
        styles = {p.relative_to(style_dir).with_suffix("").as_posix(): p for p in paths}
        return cls(mode, styles, Path(prerendered_dir) if prerendered_dir else None)

    @classmethod
    def prerendered(cls, layer_dir: str | Path) -> StyleSource:
        layer_dir = Path(layer_dir)
        ids = sorted({p.stem for p in layer_dir.glob("**/*.png")})
        return cls("prerendered", {i: layer_dir for i in ids}, layer_dir)

    @property
    def style_ids(self) -> list[str]:
        return sorted(self.styles)

    def stats(self, style_id: str) -> ChannelStats:
        if style_id not in self.styles:
            raise MissingFileError(f"unknown style {style_id!r}")
        return _style_stats_from_file(str(self.styles[style_id]))


def make_layer(content: np.ndarray, source: StyleSource, style_id: str,
               content_id: str | None = None, content_stats: ChannelStats | None = None,
               clip: bool = True) -> np.ndarray:
    """Full-image stylized layer for one style."""
    content = as_image(content)
    if source.mode == "builtin":
        return adain_pixel(content, source.stats(style_id), content_stats, clip)
    if content_id is None:
        raise ValidationError("prerendered layers are keyed by content id")
    path = Path(source.prerendered_dir) / content_id / f"{style_id}.png"
    if not path.is_file():
        raise MissingFileError(f"{path}: prerendered layer not found")
    layer = load_image(path)
    if layer.shape[:2] != content.shape[:2]:
        raise DimensionMismatchError(
            f"{path}: layer is {layer.shape[1]}x{layer.shape[0]}, "
            f"content is {content.shape[1]}x{content.shape[0]}")
    if layer.shape[2] != content.shape[2]:
        raise DimensionMismatchError(f"{path}: channel count differs from content")
    return layer


def composite(content: np.ndarray, layers: Sequence[np.ndarray | None],
              partition: VoronoiPartition, flags: Sequence[bool]) -> np.ndarray:
    """Copy ``layers[i]`` into cell ``i`` wherever ``flags[i]``; keep content elsewhere.

    Layers of unflagged cells may be ``None``.
    """
    content = as_image(content)
    if len(layers) != partition.n or len(flags) != partition.n:
        raise ValidationError(f"expected {partition.n} layers and flags, "
                              f"got {len(layers)} and {len(flags)}")
    if partition.assignment.shape != content.shape[:2]:
        raise DimensionMismatchError("partition does not match the content size")
    out = content.copy()
    for i, (layer, flag) in enumerate(zip(layers, flags)):
        if not flag:
            continue
        if layer is None or np.shape(layer) != content.shape:
            raise DimensionMismatchError(f"layer {i} does not match the content")
        mask = partition.assignment == i
        out[mask] = layer[mask]
    return out


# --------------------------------------------------------------------------
# Per-image augmentation


@dataclass(frozen=True)
class AugmentConfig:
    seed: int = 0
    n: int = 16
    p: float = 1.0
    resize_up: tuple[int, int] | None = None
    resize_down: tuple[int, int] | None = None
    style_mode: str = "builtin"

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError("p must lie in [0, 1]")
        for size in (self.resize_up, self.resize_down):
            if size is not None and (len(size) != 2 or min(size) < 1):
                raise ValidationError("resize targets must be [width, height] with both >= 1")


@dataclass
class AugmentationRecord:
    content_id: str
    seed: int
    n: int
    p: float
    sites: list[tuple[int, int]]
    styles: list[str]
    stylized: list[bool]
    output_path: str = ""

    def to_dict(self) -> dict:
        return {
            "content_id": self.content_id,
            "seed": self.seed,
            "n": self.n,
            "p": self.p,
            "sites": [[x, y] for x, y in self.sites],
            "styles": list(self.styles),
            "stylized": list(self.stylized),
            "output_path": self.output_path,
        }

    @classmethod
    def from_dict(cls, d: dict) -> AugmentationRecord:
        return cls(d["content_id"], int(d["seed"]), int(d["n"]), float(d["p"]),
                   [(int(x), int(y)) for x, y in d["sites"]], list(d["styles"]),
                   [bool(f) for f in d["stylized"]], d.get("output_path", ""))


def draw_styles(stream: SeedStream, pool: Sequence[str], n: int) -> list[str]:
    """Distinct styles per cell when the pool allows, otherwise with replacement."""
    if not pool:
        raise ValidationError("style pool is empty")
    if len(pool) >= n:
        return [pool[i] for i in stream.sample_without_replacement(len(pool), n)]
    return [pool[stream.below(len(pool))] for _ in range(n)]


def _work_size(content: np.ndarray, config: AugmentConfig) -> tuple[int, int]:
    if config.resize_up is not None:
        return tuple(config.resize_up)  # type: ignore[return-value]
    return content.shape[1], content.shape[0]


def _stylize_cells(work: np.ndarray, partition: VoronoiPartition, record: AugmentationRecord,
                   source: StyleSource) -> np.ndarray:
    """Same result as ``composite`` over full builtin layers.

    AdaIN is a per-pixel map once the full-image statistics are fixed, so it
    is only evaluated on the pixels of the selected cells.
    """
    if len(record.stylized) != partition.n or len(record.styles) != partition.n:
        raise ValidationError(f"expected {partition.n} styles and flags, "
                              f"got {len(record.styles)} and {len(record.stylized)}")
    out = work.copy()
    if not any(record.stylized):
        return out
    cstats = channel_stats(work)
    cell = partition.assignment.ravel()
    order = np.argsort(cell, kind="stable")
    bounds = np.searchsorted(cell[order], np.arange(partition.n + 1))
    flat_in = work.reshape(-1, work.shape[2])
    flat_out = out.reshape(-1, work.shape[2])
    for i, (sid, flag) in enumerate(zip(record.styles, record.stylized)):
        if flag:
            idx = order[bounds[i]:bounds[i + 1]]
            pixels = flat_in[idx][None]
            flat_out[idx] = adain_pixel(pixels, source.stats(sid), cstats)[0]
    return out


def render(content: np.ndarray, record: AugmentationRecord, source: StyleSource,
           config: AugmentConfig) -> np.ndarray:
    """Rebuild the augmented image from a record; no random draws happen here."""
    content = as_image(content)
    orig_w, orig_h = content.shape[1], content.shape[0]
    work = content
    if config.resize_up is not None:
        work = resize_bilinear(content, *config.resize_up)
    partition = assign_cells(record.sites, work.shape[1], work.shape[0])
    if source.mode == "builtin":
        out = _stylize_cells(work, partition, record, source)
    else:
        layers: list[np.ndarray | None] = [None] * partition.n
        for i, (sid, flag) in enumerate(zip(record.styles, record.stylized)):
            if flag:
                layers[i] = make_layer(work, source, sid, record.content_id)
        out = composite(work, layers, partition, record.stylized)
    if config.resize_down is not None:
        out = resize_bilinear(out, *config.resize_down)
    elif config.resize_up is not None:
        out = resize_bilinear(out, orig_w, orig_h)
    return np.clip(out, 0.0, 1.0)


def augment_image(content: np.ndarray, content_id: str, config: AugmentConfig,
                  source: StyleSource) -> tuple[np.ndarray, AugmentationRecord]:
    content = as_image(content)
    width, height = _work_size(content, config)
    sites = sample_sites(derive_seed(config.seed, content_id, "sites"), config.n, width, height)
    flags = select_stylized(derive_seed(config.seed, content_id, "flags"), config.n, config.p)
    styles = draw_styles(derive_seed(config.seed, content_id, "styles"), source.style_ids, config.n)
    record = AugmentationRecord(content_id, image_key(config.seed, content_id), config.n,
                                config.p, sites, styles, flags)
    return render(content, record, source, config), record


# (n, p) configurations of the training-set study: full-image stylization,
# Voronoi cell counts at p = 1 and partial stylization at n = 16.
AUGMENTATION_GRID = (
    (1, 1.0), (4, 1.0), (8, 1.0), (16, 1.0), (32, 1.0),
    (16, 0.25), (16, 0.5), (16, 0.75),
)
