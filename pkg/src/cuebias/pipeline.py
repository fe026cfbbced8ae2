"""Dataset ingestion, manifests and the per-image batch runners.

Work items are independent functions of (config, content id), so they may
run in any order on any number of worker processes. Manifest lines are
sorted by content id before writing, which makes the output tree and the
manifest byte-identical for every worker count.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .corrupt import (
    CITYSCAPES_MEANS,
    REDUCED_CONTRAST,
    CorruptionSpec,
    apply_corruption,
    corruption_stream,
)
from .eed import EEDPreset, eed_run
from .errors import ImageIOError, MissingFileError, ValidationError
from .imagecore import load_image, load_label, save_image, save_label
from .rng import derive_seed, image_key
from .shuffle import apply_plan, plan_shuffle
from .stylize import AugmentConfig, StyleSource, augment_image

MANIFEST_NAME = "manifest.jsonl"
WORKERS_ENV = "CUEBIAS_WORKERS"


def list_images(root: str | Path) -> list[tuple[str, Path]]:
    """``(content_id, path)`` for every PNG under ``root``, sorted by id.

    The content id is the path relative to ``root`` without its suffix.
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingFileError(f"{root}: not a directory")
    items = [(p.relative_to(root).with_suffix("").as_posix(), p)
             for p in root.rglob("*.png") if p.is_file()]
    return sorted(items)


def resolve_workers(requested: int | None, config_value: int | None = None) -> int:
    """Flag beats environment beats config; default 1."""
    if requested is not None:
        workers = requested
    elif os.environ.get(WORKERS_ENV):
        try:
            workers = int(os.environ[WORKERS_ENV])
        except ValueError as exc:
            raise ValidationError(f"{WORKERS_ENV} must be an integer") from exc
    elif config_value is not None:
        workers = int(config_value)
    else:
        workers = 1
    if workers < 1:
        raise ValidationError("worker count must be >= 1")
    return workers


def run_tasks(fn: Callable, tasks: Sequence, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def write_manifest(out_dir: str | Path, rows: Iterable[dict]) -> Path:
    """JSON lines, sorted by ``content_id`` (then output path), LF endings."""
    out_dir = Path(out_dir)
    rows = sorted(rows, key=lambda r: (r["content_id"], r.get("output_path", "")))
    path = out_dir / MANIFEST_NAME
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False, separators=(", ", ": ")) + "\n")
    except OSError as exc:
        raise ImageIOError(f"{path}: cannot write manifest ({exc})") from exc
    return path


def read_manifest(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# --------------------------------------------------------------------------
# stylize


@dataclass(frozen=True)
class _StylizeTask:
    content_id: str
    path: str
    out_dir: str
    config: AugmentConfig
    source: StyleSource


def _stylize_one(task: _StylizeTask) -> dict:
    content = load_image(task.path)
    out, record = augment_image(content, task.content_id, task.config, task.source)
    rel = f"{task.content_id}.png"
    save_image(out, Path(task.out_dir) / rel)
    record.output_path = rel
    return record.to_dict()


def stylize_dataset(config: AugmentConfig, content_dir: str | Path, source: StyleSource,
                    out_dir: str | Path, workers: int = 1) -> list[dict]:
    if not source.style_ids:
        raise ValidationError("style pool is empty")
    tasks = [_StylizeTask(cid, str(p), str(out_dir), config, source)
             for cid, p in list_images(content_dir)]
    rows = run_tasks(_stylize_one, tasks, workers)
    write_manifest(out_dir, rows)
    return sorted(rows, key=lambda r: r["content_id"])


# --------------------------------------------------------------------------
# eed


@dataclass(frozen=True)
class _EEDTask:
    content_id: str
    path: str
    out_dir: str
    preset: EEDPreset


def _eed_one(task: _EEDTask) -> dict:
    out = eed_run(load_image(task.path), task.preset)
    rel = f"{task.content_id}.png"
    save_image(out, Path(task.out_dir) / rel)
    return {"content_id": task.content_id, **asdict(task.preset), "output_path": rel}


def eed_dataset(preset: EEDPreset, in_dir: str | Path, out_dir: str | Path,
                workers: int = 1) -> list[dict]:
    tasks = [_EEDTask(cid, str(p), str(out_dir), preset) for cid, p in list_images(in_dir)]
    rows = run_tasks(_eed_one, tasks, workers)
    write_manifest(out_dir, rows)
    return rows


# --------------------------------------------------------------------------
# shuffle


@dataclass(frozen=True)
class _ShuffleTask:
    content_id: str
    image_path: str
    label_path: str
    out_dir: str
    k: int
    seed: int


def _shuffle_one(task: _ShuffleTask) -> dict:
    img = load_image(task.image_path)
    label = load_label(task.label_path)
    if img.shape[:2] != label.shape:
        raise ValidationError(f"{task.content_id}: image and label sizes differ")
    stream = derive_seed(task.seed, task.content_id, "shuffle")
    plan = plan_shuffle(img.shape[1], img.shape[0], task.k, stream)
    out_img, out_label = apply_plan(plan, img, label)
    img_rel = f"images/{task.content_id}.png"
    label_rel = f"labels/{task.content_id}.png"
    save_image(out_img, Path(task.out_dir) / img_rel)
    save_label(out_label, Path(task.out_dir) / label_rel)
    return {
        "content_id": task.content_id,
        "seed": image_key(task.seed, task.content_id),
        "k": task.k,
        "sites": [[x, y] for x, y in plan.sites],
        "permutation": list(plan.permutation),
        "output_path": img_rel,
        "label_path": label_rel,
    }


def shuffle_dataset(k: int, seed: int, image_dir: str | Path, label_dir: str | Path,
                    out_dir: str | Path, workers: int = 1) -> list[dict]:
    label_dir = Path(label_dir)
    tasks = []
    for cid, path in list_images(image_dir):
        label_path = label_dir / f"{cid}.png"
        if not label_path.is_file():
            raise MissingFileError(f"{label_path}: no label for {cid}")
        tasks.append(_ShuffleTask(cid, str(path), str(label_path), str(out_dir), k, seed))
    rows = run_tasks(_shuffle_one, tasks, workers)
    write_manifest(out_dir, rows)
    return rows


# --------------------------------------------------------------------------
# corrupt


@dataclass(frozen=True)
class _CorruptTask:
    content_id: str
    path: str
    out_dir: str
    specs: tuple[CorruptionSpec, ...]
    seed: int
    means: tuple[float, ...]
    reduced_contrast: float


def _corrupt_one(task: _CorruptTask) -> list[dict]:
    img = load_image(task.path)
    rows = []
    for spec in task.specs:
        stream = corruption_stream(task.seed, task.content_id, spec)
        out = apply_corruption(img, spec, stream, task.means, task.reduced_contrast)
        rel = f"{spec.family}/{spec.level_name}/{task.content_id}.png"
        save_image(out, Path(task.out_dir) / rel)
        rows.append({"content_id": task.content_id, "family": spec.family,
                     "level": spec.level, "output_path": rel})
    return rows


def corrupt_dataset(specs: Sequence[CorruptionSpec], seed: int, in_dir: str | Path,
                    out_dir: str | Path, means: Sequence[float] = CITYSCAPES_MEANS,
                    reduced_contrast: float = REDUCED_CONTRAST,
                    workers: int = 1) -> list[dict]:
    tasks = [_CorruptTask(cid, str(p), str(out_dir), tuple(specs), seed,
                          tuple(means), reduced_contrast)
             for cid, p in list_images(in_dir)]
    rows = [row for chunk in run_tasks(_corrupt_one, tasks, workers) for row in chunk]
    write_manifest(out_dir, rows)
    return rows
