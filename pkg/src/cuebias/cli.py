"""``cuebias`` command line.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 validation error.
Every dataset subcommand accepts ``--config FILE`` (flat JSON); flags given
on the command line override keys from the file.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Any, Sequence

import click

from . import __version__
from .corrupt import (
    CITYSCAPES_MEANS,
    FAMILIES,
    REDUCED_CONTRAST,
    CorruptionSpec,
    apply_corruption,
    corruption_grid,
    corruption_stream,
)
from .eed import PRESETS
from .errors import EXIT_IO, EXIT_OK, EXIT_USAGE, CuebiasError, ValidationError
from .imagecore import load_image, load_label
from .metrics import (
    CDSB_CONSTANTS,
    ConfusionMatrix,
    RobustnessTable,
    acc_rel,
    cdsb,
    miou,
    pixel_accuracy,
    robustness_score,
)
from .pipeline import (
    corrupt_dataset,
    eed_dataset,
    list_images,
    resolve_workers,
    shuffle_dataset,
    stylize_dataset,
)
from .stylize import AUGMENTATION_GRID, AugmentConfig, StyleSource


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise click.FileError(path, "not found") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def _merge(config: dict[str, Any], **flags: Any) -> dict[str, Any]:
    merged = dict(config)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def _require(opts: dict[str, Any], *keys: str) -> None:
    missing = [k for k in keys if opts.get(k) in (None, "")]
    if missing:
        names = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise click.UsageError(f"missing required option(s): {names}")


def _size(value: Any) -> tuple[int, int] | None:
    if value is None:
        return None
    w, h = value
    return int(w), int(h)


def _emit(payload: Any, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    click.echo(text)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="cuebias")
def cli() -> None:
    """Voronoi style-transfer augmentation, cue-decomposition datasets,
    corruption suite and segmentation scores."""


# --------------------------------------------------------------------------


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--content", type=click.Path(file_okay=False), help="Directory of content PNGs.")
@click.option("--styles", type=click.Path(file_okay=False), help="Directory of style PNGs.")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1))
@click.option("--n", "n", type=int, help="Voronoi cells per image.")
@click.option("--p", "p", type=float, help="Probability that a cell is stylized.")
@click.option("--resize-up", nargs=2, type=int, default=None, metavar="W H")
@click.option("--resize-down", nargs=2, type=int, default=None, metavar="W H")
@click.option("--style-mode", type=click.Choice(["builtin", "prerendered"]))
@click.option("--prerendered", type=click.Path(file_okay=False),
              help="Layer directory laid out as <content_id>/<style_id>.png.")
@click.option("--workers", type=int)
def stylize(config_path, content, styles, out, seed, n, p, resize_up, resize_down,
            style_mode, prerendered, workers) -> None:
    """Stylize a random subset of Voronoi cells of every content image."""
    opts = _merge(_load_config(config_path), content=content, styles=styles, out=out,
                  seed=seed, n=n, p=p, resize_up=resize_up or None,
                  resize_down=resize_down or None, style_mode=style_mode,
                  prerendered=prerendered)
    _require(opts, "content", "out")
    mode = opts.get("style_mode", "builtin")
    if mode == "prerendered":
        _require(opts, "prerendered")
        source = (StyleSource.from_directory(opts["styles"], mode, opts["prerendered"])
                  if opts.get("styles") else StyleSource.prerendered(opts["prerendered"]))
    else:
        _require(opts, "styles")
        source = StyleSource.from_directory(opts["styles"])
    config = AugmentConfig(
        seed=int(opts.get("seed", 0)), n=int(opts.get("n", 16)), p=float(opts.get("p", 1.0)),
        resize_up=_size(opts.get("resize_up")), resize_down=_size(opts.get("resize_down")),
        style_mode=mode,
    )
    nworkers = resolve_workers(workers, opts.get("workers"))
    rows = stylize_dataset(config, opts["content"], source, opts["out"], nworkers)
    click.echo(f"stylized {len(rows)} images -> {opts['out']}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--input", "input_dir", type=click.Path(file_okay=False))
@click.option("--out", type=click.Path(file_okay=False))
@click.option("--preset", type=click.Choice(sorted(PRESETS)))
@click.option("--kappa", type=float)
@click.option("--kernel-size", type=int)
@click.option("--sigma", type=float)
@click.option("--steps", type=int)
@click.option("--tau", type=float)
@click.option("--workers", type=int)
def eed(config_path, input_dir, out, preset, kappa, kernel_size, sigma, steps, tau,
        workers) -> None:
    """Edge-enhancing diffusion of every image (texture-reduced dataset)."""
    opts = _merge(_load_config(config_path), input=input_dir, out=out, preset=preset,
                  kappa=kappa, kernel_size=kernel_size, sigma=sigma, steps=steps, tau=tau)
    _require(opts, "input", "out")
    name = opts.get("preset", "eed-mild")
    if name not in PRESETS:
        raise click.UsageError(f"unknown preset {name!r}")
    chosen = PRESETS[name].with_overrides(
        kappa=opts.get("kappa"), kernel_size=opts.get("kernel_size"), sigma=opts.get("sigma"),
        steps=opts.get("steps"), tau=opts.get("tau"))
    nworkers = resolve_workers(workers, opts.get("workers"))
    rows = eed_dataset(chosen, opts["input"], opts["out"], nworkers)
    click.echo(f"diffused {len(rows)} images ({name}) -> {opts['out']}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--images", type=click.Path(file_okay=False))
@click.option("--labels", type=click.Path(file_okay=False))
@click.option("--out", type=click.Path(file_okay=False))
@click.option("--patches", "k", type=int, help="Voronoi patch count k.")
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1))
@click.option("--workers", type=int)
def shuffle(config_path, images, labels, out, k, seed, workers) -> None:
    """Voronoi patch shuffling of image/label pairs (shape-reduced dataset)."""
    opts = _merge(_load_config(config_path), images=images, labels=labels, out=out,
                  patches=k, seed=seed)
    _require(opts, "images", "labels", "out")
    nworkers = resolve_workers(workers, opts.get("workers"))
    rows = shuffle_dataset(int(opts.get("patches", 128)), int(opts.get("seed", 0)),
                           opts["images"], opts["labels"], opts["out"], nworkers)
    click.echo(f"shuffled {len(rows)} pairs -> {opts['out']}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--input", "input_dir", type=click.Path(file_okay=False))
@click.option("--out", type=click.Path(file_okay=False))
@click.option("--family", type=click.Choice(FAMILIES))
@click.option("--level", type=float)
@click.option("--grid", is_flag=True, default=None, help="Apply every family and level.")
@click.option("--reduced-contrast", is_flag=True, default=None,
              help="Include uniform noise on contrast-reduced images.")
@click.option("--reduced-contrast-level", type=float)
@click.option("--custom-level", is_flag=True, default=None,
              help="Allow a level outside the family's grid.")
@click.option("--means", nargs=3, type=float, default=None, metavar="R G B",
              help="Dataset channel means for high-pass re-centring.")
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1))
@click.option("--preview", type=click.Path(dir_okay=False),
              help="Also render a PNG grid of the corruptions of the first image.")
@click.option("--workers", type=int)
def corrupt(config_path, input_dir, out, family, level, grid, reduced_contrast,
            reduced_contrast_level, custom_level, means, seed, preview, workers) -> None:
    """Apply corruptions; outputs land in OUT/<family>/<level>/<image>.png."""
    opts = _merge(_load_config(config_path), input=input_dir, out=out, family=family,
                  level=level, grid=grid, reduced_contrast=reduced_contrast,
                  reduced_contrast_level=reduced_contrast_level, custom_level=custom_level,
                  means=means or None, seed=seed, preview=preview)
    _require(opts, "input", "out")
    if opts.get("grid"):
        specs = corruption_grid(bool(opts.get("reduced_contrast")))
    else:
        _require(opts, "family", "level")
        spec = CorruptionSpec(opts["family"], float(opts["level"]))
        if not opts.get("custom_level"):
            spec.check_grid()
        specs = [spec]
    dataset_means = tuple(opts.get("means") or CITYSCAPES_MEANS)
    low = float(opts.get("reduced_contrast_level", REDUCED_CONTRAST))
    gseed = int(opts.get("seed", 0))
    nworkers = resolve_workers(workers, opts.get("workers"))
    rows = corrupt_dataset(specs, gseed, opts["input"], opts["out"], dataset_means, low, nworkers)
    click.echo(f"wrote {len(rows)} corrupted images -> {opts['out']}")
    if opts.get("preview"):
        from .report import plot_corruption_strip

        cid, path = list_images(opts["input"])[0]
        img = load_image(path)
        by_family: dict[str, list] = {}
        for spec in specs:
            out_img = apply_corruption(img, spec, corruption_stream(gseed, cid, spec),
                                       dataset_means, low)
            by_family.setdefault(spec.family, []).append((spec.level, out_img))
        plot_corruption_strip(list(by_family.items()), opts["preview"])
        click.echo(f"preview -> {opts['preview']}")


@cli.command()
@click.option("--reduced-contrast", is_flag=True, help="Include the optional sixth family.")
@click.option("--augmentations", is_flag=True, help="List the (n, p) stylization configurations.")
@click.option("--json", "json_out", type=click.Path(dir_okay=False))
def grid(reduced_contrast, augmentations, json_out) -> None:
    """Print the corruption grid (or the augmentation configurations) as JSON."""
    if augmentations:
        payload = [{"n": n, "p": p} for n, p in AUGMENTATION_GRID]
    else:
        payload = [s.to_dict() for s in corruption_grid(reduced_contrast)]
    _emit(payload, json_out)


# --------------------------------------------------------------------------
# score


@cli.group()
def score() -> None:
    """Segmentation scores from prediction masks or published numbers."""


def _paired_masks(pred_dir: str, gt_dir: str) -> list[tuple[str, Path, Path]]:
    gt = dict(list_images(gt_dir))
    pairs = []
    for cid, path in list_images(pred_dir):
        if cid not in gt:
            raise ValidationError(f"no ground truth for prediction {cid!r}")
        pairs.append((cid, path, gt[cid]))
    if not pairs:
        raise ValidationError(f"{pred_dir}: no prediction masks found")
    return pairs


def _confusion(pred_dir: str, gt_dir: str, classes: int) -> ConfusionMatrix:
    cm = ConfusionMatrix(classes)
    for _, p, g in _paired_masks(pred_dir, gt_dir):
        cm.update(load_label(p), load_label(g))
    return cm


@score.command("miou")
@click.option("--pred", required=True, type=click.Path(file_okay=False))
@click.option("--gt", required=True, type=click.Path(file_okay=False))
@click.option("--classes", required=True, type=click.IntRange(1, 255))
@click.option("--json", "json_out", type=click.Path(dir_okay=False))
def score_miou(pred, gt, classes, json_out) -> None:
    """mIoU, pixel accuracy and per-class IoU over a directory of masks."""
    cm = _confusion(pred, gt, classes)
    ious = cm.class_iou()
    _emit({
        "miou": miou(cm),
        "pixel_accuracy": pixel_accuracy(cm),
        "class_iou": [None if v != v else float(v * 100.0) for v in ious],
        "pixels": int(cm.counts.sum()),
    }, json_out)


@score.command("cdsb")
@click.option("--shape-miou", required=True, type=float, help="mIoU on the EED dataset.")
@click.option("--texture-miou", required=True, type=float, help="mIoU on the shuffled dataset.")
@click.option("--S", "S", type=float)
@click.option("--T", "T", type=float)
@click.option("--dataset", type=click.Choice(sorted(CDSB_CONSTANTS)))
@click.option("--json", "json_out", type=click.Path(dir_okay=False))
def score_cdsb(shape_miou, texture_miou, S, T, dataset, json_out) -> None:
    """Cue-decomposition shape bias."""
    if dataset:
        dS, dT = CDSB_CONSTANTS[dataset]
        S = dS if S is None else S
        T = dT if T is None else T
    if S is None or T is None:
        raise click.UsageError("give --S and --T, or --dataset")
    _emit({"cdsb": cdsb(shape_miou, texture_miou, S, T), "shape_miou": shape_miou,
           "texture_miou": texture_miou, "S": S, "T": T}, json_out)


@score.command("robustness")
@click.option("--table", required=True, type=click.Path(dir_okay=False),
              help='JSON: {"families": {name: [mIoU per level]}, "original": x} '
                   "or a bare family mapping.")
@click.option("--original", type=float, help="mIoU on the original images.")
@click.option("--figure", type=click.Path(dir_okay=False), help="Write per-family curves (PNG).")
@click.option("--json", "json_out", type=click.Path(dir_okay=False))
def score_robustness(table, original, figure, json_out) -> None:
    """Robustness Score over a corruption table."""
    try:
        payload = json.loads(Path(table).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{table}: invalid JSON ({exc})") from exc
    tbl = RobustnessTable.from_json(payload, original)
    result = {
        "robustness_score": robustness_score(tbl),
        "original": tbl.miou_original,
        "family_means": {k: sum(v) / len(v) for k, v in tbl.per_family.items()},
    }
    if figure:
        from .report import plot_robustness

        plot_robustness(tbl.per_family, tbl.miou_original, figure)
        result["figure"] = str(figure)
    _emit(result, json_out)


@score.command("accrel")
@click.option("--attacked", required=True, type=click.Path(file_okay=False))
@click.option("--clean", required=True, type=click.Path(file_okay=False))
@click.option("--gt", required=True, type=click.Path(file_okay=False))
@click.option("--classes", type=click.IntRange(1, 255),
              help="Class count (default: inferred from the masks).")
@click.option("--json", "json_out", type=click.Path(dir_okay=False))
def score_accrel(attacked, clean, gt, classes, json_out) -> None:
    """Relative pixel accuracy under attack."""
    if classes is None:
        classes = _infer_classes([attacked, clean, gt])
    acc_aa = pixel_accuracy(_confusion(attacked, gt, classes))
    acc_cs = pixel_accuracy(_confusion(clean, gt, classes))
    _emit({"acc_rel": acc_rel(acc_aa, acc_cs), "acc_attacked": acc_aa, "acc_clean": acc_cs},
          json_out)


def _infer_classes(dirs: Sequence[str]) -> int:
    top = 0
    for d in dirs:
        for _, path in list_images(d):
            ids = load_label(path)
            ids = ids[ids != 255]
            if ids.size:
                top = max(top, int(ids.max()))
    return top + 1


# --------------------------------------------------------------------------


def main(argv: Sequence[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        rv = cli.main(args=args, prog_name="cuebias", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.FileError as exc:
        exc.show()
        return EXIT_IO
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE if isinstance(exc, click.UsageError) else exc.exit_code
    except CuebiasError as exc:
        click.echo(f"error [{exc.code}]: {exc}", err=True)
        return exc.exit_code
    except OSError as exc:
        click.echo(f"error [io]: {exc}", err=True)
        return EXIT_IO
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
