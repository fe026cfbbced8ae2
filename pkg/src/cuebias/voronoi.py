"""Voronoi site sampling, grid rasterisation and per-cell Bernoulli flags."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .rng import SeedStream

Site = tuple[int, int]  # (x, y) = (column, row)


@dataclass(frozen=True)
class VoronoiPartition:
    sites: tuple[Site, ...]
    assignment: np.ndarray  # (H, W) int32 cell indices

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def width(self) -> int:
        return self.assignment.shape[1]

    @property
    def height(self) -> int:
        return self.assignment.shape[0]


def sample_sites(stream: SeedStream, n: int, width: int, height: int) -> list[Site]:
    """Draw ``n`` distinct integer pixel sites uniformly over the grid.

    Each draw is a uniform pixel index; indices already taken are rejected
    and redrawn.
    """
    total = width * height
    if width < 1 or height < 1:
        raise ValidationError("grid must be non-empty")
    if not 1 <= n <= total:
        raise ValidationError(f"cannot place {n} distinct sites on a {width}x{height} grid")
    taken: set[int] = set()
    sites: list[Site] = []
    while len(sites) < n:
        idx = stream.below(total)
        if idx in taken:
            continue
        taken.add(idx)
        sites.append((idx % width, idx // width))
    return sites


def assign_cells(sites: Sequence[Site], width: int, height: int) -> VoronoiPartition:
    """Label every pixel with its nearest site (squared Euclidean distance).

    Equidistant pixels go to the lowest site index: a later site only wins
    where it is strictly closer.
    """
    sites = tuple((int(x), int(y)) for x, y in sites)
    if not sites:
        raise ValidationError("at least one site is required")
    if len(set(sites)) != len(sites):
        raise ValidationError("duplicate sites")
    for x, y in sites:
        if not (0 <= x < width and 0 <= y < height):
            raise ValidationError(f"site {(x, y)} outside the {width}x{height} grid")

    cols = np.arange(width, dtype=np.int64)
    rows = np.arange(height, dtype=np.int64)
    best = np.full((height, width), np.iinfo(np.int64).max, dtype=np.int64)
    assignment = np.zeros((height, width), dtype=np.int32)
    for i, (x, y) in enumerate(sites):
        d2 = ((rows - y) ** 2)[:, None] + ((cols - x) ** 2)[None, :]
        closer = d2 < best
        best[closer] = d2[closer]
        assignment[closer] = i
    assignment.flags.writeable = False
    return VoronoiPartition(sites, assignment)


def select_stylized(stream: SeedStream, n: int, p: float) -> list[bool]:
    """Independent Bernoulli(p) flag per cell; the count is not forced."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"stylization proportion must lie in [0, 1], got {p}")
    return [stream.uniform() < p for _ in range(n)]
