"""Matplotlib figures written next to the JSON score output."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .corrupt import GRID  # noqa: E402

_STYLE = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

_AXIS_LABELS = {
    "contrast": "contrast factor c",
    "uniform-noise": "noise width η",
    "noise-on-reduced-contrast": "noise width η",
    "low-pass": "σ [px]",
    "high-pass": "σ [px]",
    "phase-noise": "phase width w [°]",
}


def _levels_for(family: str, n: int) -> Sequence[float]:
    grid = GRID.get(family)
    if grid is not None and len(grid) == n:
        return grid
    return list(range(n))


def plot_robustness(per_family: Mapping[str, Sequence[float]], miou_original: float,
                    path: str | Path, title: str | None = None) -> Path:
    """One panel per corruption family: mIoU against severity level."""
    path = Path(path)
    families = list(per_family)
    ncols = min(3, len(families))
    nrows = int(np.ceil(len(families) / ncols))
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(nrows, ncols, figsize=(3.0 * ncols, 2.4 * nrows), squeeze=False)
        for ax, fam in zip(axes.flat, families):
            vals = list(per_family[fam])
            lv = _levels_for(fam, len(vals))
            ax.plot(range(len(vals)), vals, marker="o", lw=1.2)
            ax.axhline(miou_original, color="0.5", ls="--", lw=0.8, label="original")
            ax.set_xticks(range(len(vals)))
            ax.set_xticklabels([format(v, "g") for v in lv], rotation=45)
            ax.set_xlabel(_AXIS_LABELS.get(fam, "level"))
            ax.set_ylabel("mIoU [%]")
            ax.set_title(fam)
            ax.set_ylim(bottom=0)
        for ax in list(axes.flat)[len(families):]:
            ax.set_visible(False)
        axes.flat[0].legend(frameon=False)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return path


def plot_corruption_strip(rows: Sequence[tuple[str, Sequence[tuple[float, np.ndarray]]]],
                          path: str | Path) -> Path:
    """Grid of corrupted versions of one image: a row per family, columns by level."""
    path = Path(path)
    ncols = max(len(cells) for _, cells in rows)
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(len(rows), ncols, figsize=(1.4 * ncols, 1.5 * len(rows)),
                                 squeeze=False)
        for r, (family, cells) in enumerate(rows):
            for c in range(ncols):
                ax = axes[r, c]
                ax.set_xticks([])
                ax.set_yticks([])
                if c >= len(cells):
                    ax.set_visible(False)
                    continue
                level, img = cells[c]
                ax.imshow(img if img.shape[2] == 3 else img[:, :, 0], cmap="gray",
                          vmin=0.0, vmax=1.0)
                ax.set_title(format(level, "g"), fontsize=7)
                if c == 0:
                    ax.set_ylabel(family, fontsize=7)
        fig.tight_layout()
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return path
