"""Voronoi patch shuffling of image/label pairs.

Every cell ``i`` of a k-cell partition is refilled from a window translated
by ``site[perm[i]] - site[i]``; reads that fall outside the image are
clamped to the border. Images and labels share one source map, so they
stay aligned pixel for pixel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .imagecore import as_image, as_label, check_same_size
from .rng import SeedStream
from .voronoi import Site, assign_cells, sample_sites


@dataclass(frozen=True)
class ShufflePlan:
    sites: tuple[Site, ...]
    permutation: tuple[int, ...]
    src_y: np.ndarray
    src_x: np.ndarray


def plan_shuffle(width: int, height: int, k: int, stream: SeedStream,
                 permutation: Sequence[int] | None = None) -> ShufflePlan:
    """Draw sites then a cell permutation from ``stream`` and build the source map."""
    if not 1 <= k <= width * height:
        raise ValidationError(f"patch count must lie in [1, {width * height}], got {k}")
    sites = sample_sites(stream, k, width, height)
    if permutation is None:
        permutation = stream.permutation(k)
    elif sorted(permutation) != list(range(k)):
        raise ValidationError("permutation must reorder range(k)")
    return plan_from_sites(sites, permutation, width, height)


def plan_from_sites(sites: Sequence[Site], permutation: Sequence[int],
                    width: int, height: int) -> ShufflePlan:
    part = assign_cells(sites, width, height)
    pts = np.asarray(part.sites, dtype=np.int64)
    perm = np.asarray(permutation, dtype=np.int64)
    shift = pts[perm] - pts  # (k, 2) as (dx, dy)
    cell = part.assignment
    ys, xs = np.mgrid[0:height, 0:width]
    src_x = np.clip(xs + shift[cell, 0], 0, width - 1)
    src_y = np.clip(ys + shift[cell, 1], 0, height - 1)
    return ShufflePlan(part.sites, tuple(int(p) for p in perm), src_y, src_x)


def apply_plan(plan: ShufflePlan, img: np.ndarray, label: np.ndarray | None = None):
    img = as_image(img)
    out_img = img[plan.src_y, plan.src_x]
    if label is None:
        return out_img
    return out_img, as_label(label)[plan.src_y, plan.src_x]


def shuffle_voronoi(img: np.ndarray, label: np.ndarray, k: int, stream: SeedStream,
                    permutation: Sequence[int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    img = as_image(img)
    label = as_label(label)
    check_same_size(img, label)
    plan = plan_shuffle(img.shape[1], img.shape[0], k, stream, permutation)
    return apply_plan(plan, img, label)
