import os

import numpy as np
import pytest
from PIL import Image

from sphereshadow.autodiff import check_gradients, reduce_sum
from sphereshadow.data import (
    DatasetManifest,
    ImageLoadError,
    ManifestEntry,
    ManifestError,
    NoValidWindowError,
    ShadowGenerator,
    ShadowSample,
    crop_pair,
    has_valid_windows,
    load_image,
    load_mask,
    make_sample,
    penumbra_ramp,
    pseudo_infrared,
    pseudo_shadow,
    quantize,
    read_manifest,
    render_sample,
    save_image,
    synth_dataset,
    window_fractions,
    write_manifest,
)


def _write_png(path, arr, mode=None):
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode=mode).save(path)


class TestImageIO:
    def test_white_png_is_ones(self, tmp_path):
        p = tmp_path / "w.png"
        _write_png(p, np.full((2, 2, 3), 255))
        np.testing.assert_array_equal(load_image(str(p)), np.ones((3, 2, 2)))

    def test_grayscale_mask_binarised(self, tmp_path):
        p = tmp_path / "m.png"
        _write_png(p, [[0, 255], [255, 0]])
        np.testing.assert_array_equal(load_mask(str(p)), [[[0.0, 1.0], [1.0, 0.0]]])

    def test_mask_threshold_is_half(self, tmp_path):
        p = tmp_path / "m.png"
        _write_png(p, [[127, 128]])
        np.testing.assert_array_equal(load_mask(str(p))[0, 0], [0.0, 1.0])

    def test_round_trip(self, tmp_path):
        x = quantize(np.random.default_rng(0).random((3, 5, 7)))
        p = tmp_path / "x.png"
        save_image(str(p), x)
        assert load_image(str(p)).tobytes() == x.tobytes()

    def test_missing(self, tmp_path):
        with pytest.raises(ImageLoadError):
            load_image(str(tmp_path / "nope.png"))

    def test_undecodable(self, tmp_path):
        p = tmp_path / "bad.png"
        p.write_bytes(b"not a png")
        with pytest.raises(ImageLoadError):
            load_image(str(p))

    def test_mask_size_mismatch(self, tmp_path):
        p = tmp_path / "m.png"
        _write_png(p, np.zeros((3, 3)))
        with pytest.raises(ImageLoadError):
            load_mask(str(p), (3, 4, 4))


def _coverage_oracle(mask, top, left, size):
    total = 0.0
    for i in range(top, top + size):
        for j in range(left, left + size):
            total += mask[i, j]
    return total / (size * size)


class TestCropPair:
    def test_all_shadow_mask(self):
        img = np.zeros((3, 16, 16))
        with pytest.raises(NoValidWindowError, match="shadow-free"):
            crop_pair(img, np.ones((16, 16)), 8, np.random.default_rng(0))

    def test_left_half_mask(self):
        mask = np.zeros((32, 32))
        mask[:, :16] = 1.0
        img = np.random.default_rng(1).random((3, 32, 32))
        s, f, ((st, sl), (ft, fl)) = crop_pair(img, mask, 8, np.random.default_rng(2))
        assert _coverage_oracle(mask, st, sl, 8) >= 0.7
        assert _coverage_oracle(mask, ft, fl, 8) <= 0.02
        assert sl + 8 <= 16 + 8 * 0.3 and fl >= 16
        np.testing.assert_array_equal(s, img[:, st : st + 8, sl : sl + 8])
        np.testing.assert_array_equal(f, img[:, ft : ft + 8, fl : fl + 8])

    def test_same_seed_same_coords(self):
        mask = np.zeros((32, 32))
        mask[8:24, 4:20] = 1.0
        img = np.zeros((3, 32, 32))
        a = crop_pair(img, mask, 8, np.random.default_rng(3))[2]
        b = crop_pair(img, mask, 8, np.random.default_rng(3))[2]
        assert a == b

    def test_patch_too_big(self):
        with pytest.raises(NoValidWindowError):
            crop_pair(np.zeros((3, 8, 8)), np.zeros((8, 8)), 9, np.random.default_rng(0))

    def test_window_fractions_oracle(self):
        mask = (np.random.default_rng(4).random((12, 10)) > 0.6).astype(float)
        hi, lo = window_fractions(mask, 4, 0.5, 0.3)
        covs = [_coverage_oracle(mask, i, j, 4) for i in range(9) for j in range(7)]
        assert hi == pytest.approx(np.mean([c >= 0.5 for c in covs]))
        assert lo == pytest.approx(np.mean([c <= 0.3 for c in covs]))

    def test_samples_satisfy_invariants_over_random_masks(self):
        rng = np.random.default_rng(5)
        yy, xx = np.mgrid[0:32, 0:32]
        built = 0
        for _ in range(500):
            cy, cx = rng.uniform(0, 32, 2)
            a, b = rng.uniform(4, 20, 2)
            mask = (((yy - cy) / a) ** 2 + ((xx - cx) / b) ** 2 <= 1).astype(float)
            img = rng.random((3, 32, 32))
            if not has_valid_windows(mask, 8):
                continue
            try:
                sample = make_sample(img, mask, 8, rng)
            except NoValidWindowError:
                continue
            built += 1
            (st, sl), (ft, fl) = sample.patch_coords
            for top, left in sample.patch_coords:
                assert 0 <= top <= 24 and 0 <= left <= 24
            assert _coverage_oracle(mask, st, sl, 8) >= 0.7
            assert _coverage_oracle(mask, ft, fl, 8) <= 0.02
        assert built > 200

    def test_sample_rejects_bad_coords(self):
        img = np.zeros((3, 16, 16))
        mask = np.zeros((1, 16, 16))
        mask[:, :8, :8] = 1
        with pytest.raises(ValueError):
            ShadowSample(img, mask, img[:1], img[:, :8, :8], img[:, :8, :8], ((0, 0), (0, 0)))
        with pytest.raises(ValueError):
            ShadowSample(img, mask, img[:1], img[:, :8, :8], img[:, :8, :8], ((0, 0), (9, 9)))


class TestProxies:
    def test_black_infrared(self):
        np.testing.assert_array_equal(pseudo_infrared(np.zeros((3, 8, 8))), np.zeros((1, 8, 8)))

    def test_red_infrared(self):
        red = np.zeros((3, 8, 8))
        red[0] = 1.0
        np.testing.assert_allclose(pseudo_infrared(red), 0.299**0.6, atol=1e-15)
        assert 0.299**0.6 == pytest.approx(0.4846, abs=1e-4)

    def test_infrared_range_and_purity(self):
        x = np.random.default_rng(6).random((3, 12, 12))
        out = pseudo_infrared(x)
        assert out.shape == (1, 12, 12)
        assert out.min() >= 0 and out.max() <= 1
        assert out.tobytes() == pseudo_infrared(x).tobytes()

    def test_penumbra_ramp(self):
        r = penumbra_ramp(12)
        assert r[0, 5] == 0.0 and r[5, 5] == 1.0
        np.testing.assert_allclose(r[:5, 6], [0, 0.25, 0.5, 0.75, 1.0])

    def test_interior_darkens_to_gamma(self):
        out = pseudo_shadow(np.ones((3, 16, 16)), np.full(3, 50.0)).data
        np.testing.assert_allclose(out[:, 4:-4, 4:-4], 0.9, atol=1e-12)
        np.testing.assert_array_equal(out[:, 0, :], 1.0)

    def test_never_brightens(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            patch = rng.random((3, 16, 16))
            assert np.all(pseudo_shadow(patch, rng.standard_normal(3) * 5).data <= patch)

    def test_gamma_gradient(self):
        rng = np.random.default_rng(8)
        patch = rng.random((2, 3, 8, 8))
        probe = rng.standard_normal((2, 3, 8, 8))
        res = check_gradients(lambda g: reduce_sum(pseudo_shadow(patch, g) * probe), [rng.standard_normal(3)])
        assert res.passed(1e-6), res.max_rel_error

    def test_generator_initial_gamma(self):
        np.testing.assert_array_equal(ShadowGenerator().gamma, 0.5)


class TestManifest:
    def test_round_trip(self, tmp_path):
        m = synth_dataset(str(tmp_path / "d"), 3, 32, seed=1, test_count=0)
        back = read_manifest(m.path)
        assert back.entries == m.entries and back.seed == 1 and back.split == "train"
        back.validate()

    def test_relative_paths(self, tmp_path):
        m = synth_dataset(str(tmp_path / "d"), 2, 32, seed=1, test_count=0)
        text = open(m.path).read()
        assert str(tmp_path) not in text
        assert "images/0000.png\tmasks/0000.png" in text

    def test_bad_split(self):
        with pytest.raises(ManifestError):
            DatasetManifest([], split="val")

    def test_missing_file_fails_validation(self, tmp_path):
        path = tmp_path / "m.txt"
        write_manifest(str(path), DatasetManifest([ManifestEntry(str(tmp_path / "a.png"), str(tmp_path / "b.png"))]))
        with pytest.raises(ImageLoadError):
            read_manifest(str(path)).validate()

    def test_column_count(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("only-one-column\n")
        with pytest.raises(ManifestError):
            read_manifest(str(path))

    def test_infrared_column(self, tmp_path):
        d = tmp_path / "d"
        m = synth_dataset(str(d), 1, 32, seed=2, test_count=0)
        ir_path = d / "ir.png"
        save_image(str(ir_path), np.full((1, 32, 32), 0.25))
        e = m.entries[0]
        path = d / "with_ir.txt"
        write_manifest(str(path), DatasetManifest([ManifestEntry(e.image, e.mask, str(ir_path))]))
        img, mask, ir, gt = read_manifest(str(path)).load(0)
        assert ir.shape == (1, 32, 32) and gt is not None


class TestSynth:
    def test_count(self, tmp_path):
        m = synth_dataset(str(tmp_path), 10, 32, seed=0)
        assert len(m) == 10
        for sub in ("images", "masks", "gt"):
            assert len(os.listdir(tmp_path / sub)) == 10
        assert len(read_manifest(str(tmp_path / "train.txt"))) == 9
        assert read_manifest(str(tmp_path / "test.txt")).split == "test"

    def test_shadow_darker_inside_mask(self, tmp_path):
        m = synth_dataset(str(tmp_path), 10, 32, seed=1)
        for i in range(len(m)):
            img, mask, _, _ = m.load(i)
            assert img[:, mask[0] > 0].mean() < img[:, mask[0] == 0].mean()

    def test_bit_identical_reruns(self, tmp_path):
        synth_dataset(str(tmp_path / "a"), 4, 32, seed=5)
        synth_dataset(str(tmp_path / "b"), 4, 32, seed=5)
        for sub in ("images", "masks", "gt"):
            for name in os.listdir(tmp_path / "a" / sub):
                assert (tmp_path / "a" / sub / name).read_bytes() == (tmp_path / "b" / sub / name).read_bytes()

    def test_recomposition(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            s = render_sample(rng, 64, 32)
            np.testing.assert_allclose(s["gt"] * s["field"], s["shadow"], atol=0.5 / 255 + 1e-12)
            inside = s["mask"][0] > 0
            assert s["field"][0][inside].max() < 1.0
            assert s["field"].min() >= 0.3 - 1e-12

    def test_crops_always_available(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            hi, lo = window_fractions(render_sample(rng, 64, 32)["mask"], 32)
            assert min(hi, lo) >= 0.02
