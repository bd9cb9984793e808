import math

import numpy as np
import pytest

from sphereshadow.losses import SSIM_C1, SSIM_C2
from sphereshadow.metrics import (
    EmptyRegionError,
    EvalReport,
    entropy,
    image_metrics,
    psnr_region,
    region_mask,
    reports_csv,
    reports_table,
    rmse_region,
    ssim_image,
)


def rmse_loop(pred, gt, mask, region):
    total, n = 0.0, 0
    C, H, W = pred.shape
    for i in range(H):
        for j in range(W):
            inside = mask[i, j] > 0.5
            if region == "shadow" and not inside or region == "nonshadow" and inside:
                continue
            for c in range(C):
                d = pred[c, i, j] - gt[c, i, j]
                total += d * d
                n += 1
    return math.sqrt(total / n) * 255


def _pair(rng, shape=(3, 16, 16)):
    gt = rng.random(shape)
    pred = np.clip(gt + 0.1 * rng.standard_normal(shape), 0, 1)
    mask = np.zeros(shape[1:])
    mask[3:10, 2:12] = 1
    return pred, gt, mask


class TestRMSE:
    def test_identical(self):
        x = np.random.default_rng(0).random((3, 8, 8))
        assert rmse_region(x, x) == 0.0

    def test_constant_offset(self):
        gt = np.full((3, 8, 8), 0.4)
        assert rmse_region(gt + 0.1, gt) == pytest.approx(25.5, abs=1e-12)

    @pytest.mark.parametrize("region", ["shadow", "nonshadow", "all"])
    def test_loop_oracle(self, region):
        pred, gt, mask = _pair(np.random.default_rng(1))
        assert rmse_region(pred, gt, mask, region) == pytest.approx(rmse_loop(pred, gt, mask, region), rel=1e-12)

    def test_all_is_coverage_weighted(self):
        pred, gt, mask = _pair(np.random.default_rng(2))
        frac = mask.mean()
        s = rmse_region(pred, gt, mask, "shadow")
        n = rmse_region(pred, gt, mask, "nonshadow")
        combined = math.sqrt(frac * s * s + (1 - frac) * n * n)
        assert rmse_region(pred, gt, mask, "all") == pytest.approx(combined, rel=1e-12)

    def test_empty_region(self):
        x = np.zeros((3, 4, 4))
        with pytest.raises(EmptyRegionError):
            rmse_region(x, x, np.zeros((4, 4)), "shadow")

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rmse_region(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))

    def test_region_needs_mask(self):
        with pytest.raises(ValueError):
            region_mask(None, "shadow", (4, 4))


class TestPSNR:
    def test_twenty_db(self):
        gt = np.full((3, 8, 8), 0.4)
        assert psnr_region(gt + 0.1, gt) == pytest.approx(20.0, abs=1e-10)

    def test_identical_is_inf(self):
        x = np.ones((1, 4, 4))
        assert psnr_region(x, x) == math.inf

    def test_monotone(self):
        rng = np.random.default_rng(3)
        gt = rng.random((3, 8, 8))
        pairs = [(rmse_region(p, gt), psnr_region(p, gt)) for p in (np.clip(gt + s * rng.standard_normal(gt.shape), 0, 1) for s in (0.01, 0.05, 0.2))]
        pairs.sort()
        assert [p for _, p in pairs] == sorted((p for _, p in pairs), reverse=True)


class TestSSIM:
    def test_self(self):
        x = np.random.default_rng(4).random((3, 20, 20))
        assert ssim_image(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_checkerboard_anticorrelated(self):
        board = (np.indices((16, 16)).sum(axis=0) % 2).astype(float)[None]
        assert ssim_image(board, 1 - board) < 0.0

    def test_constant_pair_matches_closed_form(self):
        a, b = np.full((1, 8, 8), 0.2), np.full((1, 8, 8), 0.8)
        want = (2 * 0.2 * 0.8 + SSIM_C1) * SSIM_C2 / ((0.2**2 + 0.8**2 + SSIM_C1) * SSIM_C2)
        assert ssim_image(a, b) == pytest.approx(want, abs=1e-12)

    def test_symmetric(self):
        pred, gt, mask = _pair(np.random.default_rng(5))
        for region in ("shadow", "nonshadow", "all"):
            assert ssim_image(pred, gt, mask, region) == pytest.approx(ssim_image(gt, pred, mask, region), abs=1e-15)

    def test_window_loop_oracle_at_interior_pixel(self):
        rng = np.random.default_rng(6)
        a, b = rng.random((1, 15, 15)), rng.random((1, 15, 15))
        g = np.exp(-((np.arange(11) - 5.0) ** 2) / (2 * 1.5**2))
        w = np.outer(g, g) / np.outer(g, g).sum()
        mask = np.zeros((15, 15))
        mask[7, 7] = 1
        pa, pb = a[0, 2:13, 2:13], b[0, 2:13, 2:13]
        ma, mb = (w * pa).sum(), (w * pb).sum()
        va, vb = (w * pa * pa).sum() - ma * ma, (w * pb * pb).sum() - mb * mb
        cov = (w * pa * pb).sum() - ma * mb
        want = (2 * ma * mb + SSIM_C1) * (2 * cov + SSIM_C2) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
        assert ssim_image(a, b, mask, "shadow") == pytest.approx(want, abs=1e-12)

    def test_range(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            v = ssim_image(rng.random((3, 12, 12)), rng.random((3, 12, 12)))
            assert -1.0 <= v <= 1.0


class TestEntropy:
    def test_constant(self):
        assert entropy(np.full((3, 8, 8), 0.3)) == 0.0

    def test_uniform_256_levels(self):
        img = (np.arange(256, dtype=float) / 255).reshape(1, 16, 16)
        assert entropy(img) == 8.0

    def test_fair_coin(self):
        img = np.zeros((1, 4, 4))
        img[:, :2] = 1.0
        assert entropy(img) == 1.0

    def test_grey_rgb_uses_luminance(self):
        img = np.repeat((np.arange(256, dtype=float) / 255).reshape(1, 16, 16), 3, axis=0)
        assert entropy(img) == pytest.approx(8.0, abs=1e-12)


class TestReport:
    def _images(self, seed, n=6):
        rng = np.random.default_rng(seed)
        out = [_pair(rng) for _ in range(n)]
        return [p for p, _, _ in out], [g for _, g, _ in out], [m for _, _, m in out]

    def test_permutation_invariant(self):
        preds, gts, masks = self._images(8)
        a = EvalReport.from_images("m", preds, gts, masks)
        order = [3, 0, 5, 1, 4, 2]
        b = EvalReport.from_images("m", [preds[i] for i in order], [gts[i] for i in order], [masks[i] for i in order])
        assert a.values == b.values and a.entropy == b.entropy

    def test_values_are_means(self):
        preds, gts, masks = self._images(9)
        rep = EvalReport.from_images("m", preds, gts, masks)
        want = np.mean([rmse_region(p, g, m, "shadow") for p, g, m in zip(preds, gts, masks)])
        assert rep.values["rmse_shadow"] == pytest.approx(want, rel=1e-14)
        assert rep.count == 6

    def test_identical_flagged(self):
        x = np.random.default_rng(10).random((3, 8, 8))
        m = np.zeros((8, 8))
        m[:4] = 1
        rep = EvalReport.from_images("copy", [x], [x], [m])
        assert rep.values["psnr_all"] == math.inf
        assert "identical" in reports_csv([rep])

    def test_empty_region_is_nan(self):
        x = np.zeros((3, 4, 4))
        vals = image_metrics(x, x + 0.1, np.zeros((4, 4)))
        assert math.isnan(vals["rmse_shadow"]) and vals["rmse_all"] == pytest.approx(25.5)

    def test_csv_and_table(self):
        preds, gts, masks = self._images(11, 2)
        reports = [EvalReport.from_images("model", preds, gts, masks), EvalReport.from_images("identity", gts, gts, masks)]
        lines = reports_csv(reports).splitlines()
        assert lines[0].split(",")[:3] == ["method", "images", "rmse_shadow"]
        assert lines[0].endswith("entropy") and len(lines) == 3
        table = reports_table(reports)
        assert "identity" in table and "window centre" in table

    def test_entropy_only(self):
        rep = EvalReport.from_images("m", [np.zeros((3, 4, 4))])
        assert not rep.full_reference
        assert rep.columns() == ["method", "images", "entropy"]
