from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from cuebias.imagecore import save_image, save_label


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def byte_image(rng: np.random.Generator, h: int, w: int, c: int = 3) -> np.ndarray:
    """Random image whose samples are exact multiples of 1/255."""
    return rng.integers(0, 256, size=(h, w, c)).astype(np.float64) / 255.0


def smooth_image(rng: np.random.Generator, h: int, w: int, c: int = 3) -> np.ndarray:
    """Blocky image with a few flat regions and mild noise, quantized to bytes."""
    yy, xx = np.mgrid[0:h, 0:w]
    out = np.empty((h, w, c))
    for ch in range(c):
        cx, cy = rng.uniform(0, w), rng.uniform(0, h)
        r = rng.uniform(0.2, 0.5) * min(h, w)
        base = rng.uniform(0.1, 0.4) + rng.uniform(0.3, 0.5) * ((xx - cx) ** 2 + (yy - cy) ** 2 < r * r)
        out[:, :, ch] = base + 0.03 * rng.standard_normal((h, w))
    return np.round(np.clip(out, 0, 1) * 255) / 255


def write_dataset(root: Path, images: dict[str, np.ndarray]) -> Path:
    for cid, img in images.items():
        save_image(img, root / f"{cid}.png")
    return root


def write_labels(root: Path, labels: dict[str, np.ndarray]) -> Path:
    for cid, lab in labels.items():
        save_label(lab, root / f"{cid}.png")
    return root


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def pytest_terminal_summary(terminalreporter):
    from ._acceptance import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
