"""Acceptance suite: one test group per criterion, each reporting PASS/FAIL.

Run with ``pytest tests/test_acceptance.py -v``; the per-criterion summary is
printed at the end of the session.
"""

from __future__ import annotations

import os
import time

import numpy as np
import pytest
from PIL import Image

from cuebias.cli import main
from cuebias.corrupt import (
    CITYSCAPES_MEANS,
    GRID,
    CorruptionSpec,
    apply_high_pass,
    apply_phase_noise,
    corruption_grid,
    corruption_stream,
    hermitian_phase_field,
)
from cuebias.eed import (
    EED_MILD,
    EED_STRONG,
    TensorField,
    diffusion_tensor,
    eed_iterate,
    eed_step,
    structure_tensor,
)
from cuebias.errors import ValidationError
from cuebias.imagecore import save_image
from cuebias.metrics import (
    CDSB_CONSTANTS,
    RobustnessTable,
    acc_rel,
    cdsb,
    confusion_accumulate,
    miou,
    pixel_accuracy,
    robustness_score,
)
from cuebias.pipeline import MANIFEST_NAME, corrupt_dataset
from cuebias.rng import SeedStream, derive_seed
from cuebias.shuffle import apply_plan, plan_shuffle, shuffle_voronoi
from cuebias.stylize import StyleSource, adain_pixel, channel_stats, make_layer
from cuebias.voronoi import assign_cells, sample_sites

from ._acceptance import criterion
from .conftest import byte_image, smooth_image, tree_bytes, write_dataset
from .test_metrics import brute_force_scores, random_pair


# --------------------------------------------------------------------------
# 1


@pytest.mark.parametrize("row,shape,texture,published", [
    ("DeepLabV3+ original", 19.90, 29.83, 0.48),
    ("SegFormer EED strong", 50.59, 14.74, 0.83),
    ("DeepLabV3+ Voronoi 16", 41.42, 15.90, 0.79),
])
def test_c1_cdsb_regression(row, shape, texture, published):
    with criterion(1, row) as notes:
        S, T = CDSB_CONSTANTS["cityscapes"]
        assert (S, T) == (25.99, 36.43)
        got = cdsb(shape, texture, S, T)
        notes.append(f"{got:.4f} vs {published}")
        assert abs(got - published) <= 0.005


# --------------------------------------------------------------------------
# 2


def test_c2_grid_levels():
    with criterion(2, "grid lists") as notes:
        grid = corruption_grid()
        per_family = {}
        for spec in grid:
            per_family.setdefault(spec.family, []).append(spec.level)
        assert per_family == {
            "contrast": [0.01, 0.03, 0.05, 0.1, 0.15, 0.3, 0.5, 1.0],
            "uniform-noise": [0.0, 0.03, 0.05, 0.1, 0.2, 0.35, 0.6, 0.9],
            "low-pass": [1, 3, 7, 10, 15, 40],
            "high-pass": [0.4, 0.45, 0.55, 0.7, 1, 1.5, 3],
            "phase-noise": [0, 30, 60, 90, 120, 150, 180],
        }
        full = corruption_grid(reduced_contrast=True)
        notes.append(f"{len(grid)} default, {len(full)} with the optional family")
        assert len(grid) == 36 and len(full) == 44
        assert [s.level for s in full if s.family == "noise-on-reduced-contrast"] == \
            list(GRID["uniform-noise"])


def test_c2_identity_levels_roundtrip(tmp_path):
    with criterion(2, "identity byte roundtrip") as notes:
        rng = np.random.default_rng(2)
        images = {f"img{i:02d}": byte_image(rng, int(rng.integers(16, 48)),
                                            int(rng.integers(16, 48))) for i in range(10)}
        src = write_dataset(tmp_path / "in", images)
        identity = [CorruptionSpec("contrast", 1.0), CorruptionSpec("uniform-noise", 0.0),
                    CorruptionSpec("phase-noise", 0.0)]
        rows = corrupt_dataset(identity, 123, src, tmp_path / "out")
        assert len(rows) == 30
        for row in rows:
            a = np.asarray(Image.open(tmp_path / "out" / row["output_path"]))
            b = np.asarray(Image.open(src / f"{row['content_id']}.png"))
            assert np.array_equal(a, b), row["output_path"]
        notes.append("30 outputs identical")


# --------------------------------------------------------------------------
# 3


def test_c3_phase_noise_spectra():
    with criterion(3, "amplitude and realness") as notes:
        rng = np.random.default_rng(3)
        worst_amp = worst_imag = 0.0
        for i in range(20):
            img = rng.random((64, 64, 3))
            for w in GRID["phase-noise"]:
                spec = CorruptionSpec("phase-noise", w)
                out = apply_phase_noise(img, w, corruption_stream(9, f"img{i}", spec), clip=False)
                assert out.dtype == np.float64 and np.isrealobj(out)
                stream = corruption_stream(9, f"img{i}", spec)
                for ch in range(3):
                    fin = np.fft.fft2(img[:, :, ch])
                    fout = np.fft.fft2(out[:, :, ch])
                    rel = np.abs(np.abs(fout) - np.abs(fin)) / np.abs(fin)
                    worst_amp = max(worst_amp, float(rel.max()))
                    # the complex inverse before taking the real part
                    phi = hermitian_phase_field(stream, 64, 64, w)
                    full = np.fft.ifft2(fin * np.exp(1j * phi))
                    worst_imag = max(worst_imag, float(np.abs(full.imag).max()))
                    assert np.abs(full.real - out[:, :, ch]).max() < 1e-12
        notes.append(f"max relative amplitude error {worst_amp:.1e}, "
                     f"max imaginary residue {worst_imag:.1e}")
        assert worst_amp < 1e-6
        assert worst_imag < 1e-12


# --------------------------------------------------------------------------
# 4


def test_c4_high_pass_recentring():
    with criterion(4, "pre-clip channel means") as notes:
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(20):
            img = rng.random((int(rng.integers(16, 96)), int(rng.integers(16, 96)), 3))
            for sigma in GRID["high-pass"]:
                out = apply_high_pass(img, sigma, CITYSCAPES_MEANS, clip=False)
                worst = max(worst, float(np.abs(out.mean(axis=(0, 1)) - CITYSCAPES_MEANS).max()))
        notes.append(f"max deviation {worst:.1e}")
        assert worst < 1e-9


# --------------------------------------------------------------------------
# 5


def test_c5_moment_matching():
    with criterion(5, "moments of 50 pairs") as notes:
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(50):
            h, w = (int(v) for v in rng.integers(16, 80, size=2))
            content = np.clip(rng.uniform(0.1, 0.9, 3) + rng.uniform(0.02, 0.3, 3)
                              * rng.standard_normal((h, w, 3)), 0, 1)
            style = np.clip(rng.uniform(0.1, 0.9, 3) + rng.uniform(0.02, 0.3, 3)
                            * rng.standard_normal((24, 24, 3)), 0, 1)
            target = channel_stats(style)
            assert (channel_stats(content).std > 1e-6).all()
            got = channel_stats(adain_pixel(content, target, clip=False))
            worst = max(worst, float(np.abs(got.mean - target.mean).max()),
                        float(np.abs(got.std - target.std).max()))
        notes.append(f"max moment error {worst:.1e}")
        assert worst < 1e-4


def test_c5_fixed_point(tmp_path):
    with criterion(5, "style equals content") as notes:
        rng = np.random.default_rng(55)
        worst = 0.0
        for i in range(10):
            content = byte_image(rng, 20 + i, 30)
            save_image(content, tmp_path / "styles" / f"self{i}.png")
            src = StyleSource.from_directory(tmp_path / "styles")
            layer = make_layer(content, src, f"self{i}", clip=False)
            worst = max(worst, float(np.abs(layer - content).max()))
        notes.append(f"max deviation {worst:.1e}")
        assert worst < 1e-6


# --------------------------------------------------------------------------
# 6


def test_c6_voronoi_oracle():
    with criterion(6, "100 instances") as notes:
        rng = np.random.default_rng(6)
        ys, xs = np.mgrid[0:64, 0:64]
        ties = 0
        for _ in range(100):
            n = int(rng.integers(1, 65))
            sites = sample_sites(SeedStream(int(rng.integers(2**63))), n, 64, 64)
            d2 = np.stack([(xs - x) ** 2 + (ys - y) ** 2 for x, y in sites])
            oracle = d2.argmin(axis=0)  # first minimum = lowest index
            ties += int(((d2 == d2.min(axis=0)).sum(axis=0) > 1).sum())
            assert np.array_equal(assign_cells(sites, 64, 64).assignment, oracle)
        notes.append(f"{ties} tie pixels checked")
        assert ties > 0


# --------------------------------------------------------------------------
# 7


def _step(u, preset):
    D = diffusion_tensor(structure_tensor(u, preset.sigma, preset.kernel_size), preset.kappa)
    return eed_step(u, D, preset.tau)


def test_c7_constant_image_full_preset():
    with criterion(7, "constant image, full mild preset") as notes:
        img = np.full((24, 24, 3), 0.4)
        out = eed_iterate(img, EED_MILD)
        dev = float(np.abs(out - img).max())
        notes.append(f"{EED_MILD.steps} steps, deviation {dev:.1e}")
        assert dev < 1e-9


def test_c7_extremum_principle():
    with criterion(7, "extremum principle") as notes:
        rng = np.random.default_rng(71)
        for preset in (EED_MILD, EED_STRONG):
            for _ in range(4):
                u = rng.random((32, 32, 3))
                lo, hi = u.min(), u.max()
                for _ in range(150):
                    u = _step(u, preset)
                    assert u.min() >= lo - 1e-9 and u.max() <= hi + 1e-9
        notes.append("8 images x 150 steps")


def test_c7_mean_conservation():
    with criterion(7, "mean conservation") as notes:
        rng = np.random.default_rng(72)
        worst = 0.0
        for preset in (EED_MILD, EED_STRONG):
            img = rng.random((64, 64, 3))
            out = eed_iterate(img, preset, steps=100)
            worst = max(worst, float(np.abs(out.mean(axis=(0, 1)) - img.mean(axis=(0, 1))).max()))
        notes.append(f"drift over 100 steps {worst:.1e}")
        assert worst < 1e-6


def test_c7_isotropic_limit():
    with criterion(7, "isotropic limit vs heat stepper") as notes:
        rng = np.random.default_rng(73)
        identity = TensorField(np.ones((40, 30)), np.zeros((40, 30)), np.ones((40, 30)))
        u = rng.random((40, 30, 3))
        worst = 0.0
        for _ in range(50):
            p = np.pad(u, ((1, 1), (1, 1), (0, 0)), mode="edge")
            heat = u + 0.2 * (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4 * u)
            got = eed_step(u, identity, 0.2)
            worst = max(worst, float(np.abs(got - heat).max()))
            u = heat
        notes.append(f"max per-step difference {worst:.1e}")
        assert worst < 1e-10


def test_c7_preset_edge_contrast():
    with criterion(7, "mild vs strong edge contrast") as notes:
        img = np.zeros((32, 32, 1))
        img[:, 16:] = 1.0
        mild = eed_iterate(img, EED_MILD, steps=500)
        strong = eed_iterate(img, EED_STRONG, steps=500)
        cm = float((mild[:, 16] - mild[:, 15]).mean())
        cs = float((strong[:, 16] - strong[:, 15]).mean())
        notes.append(f"mild {cm:.4f}, strong {cs:.4f}")
        assert cm > cs


@pytest.mark.slow
def test_c7_full_mild_preset_runtime():
    with criterion(7, "full mild preset on 128x128") as notes:
        img = smooth_image(np.random.default_rng(74), 128, 128)
        start = time.perf_counter()
        out = eed_iterate(img, EED_MILD)
        elapsed = time.perf_counter() - start
        notes.append(f"{EED_MILD.steps} steps in {elapsed:.1f}s on {os.cpu_count()} core(s)")
        assert out.min() >= img.min() - 1e-9 and out.max() <= img.max() + 1e-9
        assert elapsed < 120.0


# --------------------------------------------------------------------------
# 8


def test_c8_shuffle_alignment():
    with criterion(8, "50 fixtures x k in {4, 64, 128}") as notes:
        rng = np.random.default_rng(8)
        checked = 0
        for f in range(50):
            h, w = (int(v) for v in rng.integers(24, 65, size=2))
            ys, xs = np.mgrid[0:h, 0:w]
            texture = rng.random((h, w))
            img = np.stack([xs / (w - 1), ys / (h - 1), texture], axis=2)
            label = rng.integers(0, 19, size=(h, w)).astype(np.uint8)
            label[rng.random((h, w)) < 0.1] = 255
            for k in (4, 64, 128):
                stream = derive_seed(f, f"fixture{f}", "shuffle")
                plan = plan_shuffle(w, h, k, stream)
                oi, ol = apply_plan(plan, img, label)
                sx = np.rint(oi[:, :, 0] * (w - 1)).astype(int)
                sy = np.rint(oi[:, :, 1] * (h - 1)).astype(int)
                assert np.array_equal(sx, plan.src_x) and np.array_equal(sy, plan.src_y)
                assert np.array_equal(oi[:, :, 2], texture[sy, sx])
                assert np.array_equal(ol, label[sy, sx])
                checked += h * w
            oi, ol = shuffle_voronoi(img, label, 1, SeedStream(f))
            assert np.array_equal(oi, img) and np.array_equal(ol, label)
        notes.append(f"{checked} output pixels traced")


# --------------------------------------------------------------------------
# 9


def test_c9_metric_oracle():
    with criterion(9, "1000 random mask pairs") as notes:
        rng = np.random.default_rng(9)
        compared = 0
        for _ in range(1000):
            c = int(rng.integers(1, 8))
            pred, gt = random_pair(rng, c)
            m, acc = brute_force_scores(pred, gt, c)
            cm = confusion_accumulate(pred, gt, c)
            if acc is None:
                with pytest.raises(ValidationError):
                    miou(cm)
                continue
            assert miou(cm) == m and pixel_accuracy(cm) == acc
            compared += 1
        notes.append(f"{compared} pairs with evaluable pixels, exact equality")


def test_c9_score_arithmetic():
    with criterion(9, "robustness and relative accuracy examples"):
        assert robustness_score(RobustnessTable({"A": [60.0, 40.0], "B": [30.0]}, 80.0)) == 0.5
        assert robustness_score(RobustnessTable({"A": [55.0, 55.0], "B": [55.0]}, 55.0)) == 1.0
        assert robustness_score(RobustnessTable({"A": [0.0], "B": [0.0, 0.0]}, 55.0)) == 0.0
        assert acc_rel(30.0, 60.0) == 0.5
        assert acc_rel(42.0, 42.0) == 1.0
        with pytest.raises(ValidationError):
            acc_rel(30.0, 0.0)


# --------------------------------------------------------------------------
# 10


@pytest.fixture(scope="module")
def throughput_fixture(tmp_path_factory):
    root = tmp_path_factory.mktemp("throughput")
    rng = np.random.default_rng(10)
    for i in range(100):
        coarse = rng.random((64, 64, 3))
        img = np.kron(coarse, np.ones((8, 8, 1))) + 0.04 * rng.standard_normal((512, 512, 3))
        save_image(np.clip(img, 0, 1), root / "content" / f"frame{i:03d}.png")
    for i in range(32):
        style = rng.uniform(0.1, 0.9, 3) + 0.2 * rng.standard_normal((96, 96, 3))
        save_image(np.clip(style, 0, 1), root / "styles" / f"painting{i:02d}.png")
    return root


@pytest.mark.slow
def test_c10_determinism_and_throughput(throughput_fixture, capsys):
    root = throughput_fixture
    with criterion(10, "100 images at 512x512, workers 1 vs 2") as notes:
        timings = []
        for workers in (1, 2):
            start = time.perf_counter()
            code = main(["stylize", "--content", str(root / "content"),
                         "--styles", str(root / "styles"), "--out", str(root / f"out{workers}"),
                         "--n", "16", "--p", "0.5", "--seed", "2024",
                         "--workers", str(workers)])
            timings.append(time.perf_counter() - start)
            assert code == 0, capsys.readouterr().err
        a, b = tree_bytes(root / "out1"), tree_bytes(root / "out2")
        notes.append(f"runs {timings[0]:.1f}s and {timings[1]:.1f}s on "
                     f"{os.cpu_count()} core(s); {len(a)} files")
        assert len(a) == 101 and MANIFEST_NAME in a
        assert a == b
        assert max(timings) < 60.0
