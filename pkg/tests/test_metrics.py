import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from kspacebench.core import ValidationError
from kspacebench.metrics import (ImageMetrics, MetricsReport, contrast, image_metrics,
                                 ms_ssim, ms_ssim_scales, mse, psnr, snr_rf, ssim,
                                 ssim_map, ssimf)
from kspacebench.phantom import MaskPair, brain_phantom_spec, generate_phantom

from oracles import brute_ssim_map, loop_mse


@pytest.fixture(scope="module")
def clean():
    img, masks = generate_phantom(brain_phantom_spec(64, seed=2))
    return np.abs(img), masks


def test_psnr_identity_is_capped(clean):
    img, _ = clean
    assert psnr(img, img) == 300.0


def test_psnr_known_value():
    ref = np.zeros((16, 16))
    test = np.full((16, 16), 0.1)
    npt.assert_allclose(psnr(test, ref), 20.0, atol=1e-12)


def test_mse_matches_loop(rng):
    a, b = rng.random((20, 24)), rng.random((20, 24))
    npt.assert_allclose(mse(a, b), loop_mse(a, b), rtol=1e-12)
    npt.assert_allclose(psnr(a, b), 10 * math.log10(1 / loop_mse(a, b)), rtol=1e-12)


def test_shape_mismatch_raises(rng):
    with pytest.raises(ValidationError):
        psnr(rng.random((16, 16)), rng.random((16, 17)))
    with pytest.raises(ValidationError):
        ssim(rng.random((16, 16)), rng.random((17, 16)))


def test_ssim_map_matches_brute_force(rng):
    a = rng.random((16, 16))
    b = np.clip(a + 0.2 * rng.standard_normal((16, 16)), 0, 1)
    npt.assert_allclose(ssim_map(a, b), brute_ssim_map(a, b), atol=1e-10)
    c = rng.random((12, 19))
    d = rng.random((12, 19))
    npt.assert_allclose(ssim_map(c, d), brute_ssim_map(c, d), atol=1e-10)


def test_ssim_identity_and_inversion():
    x = np.zeros((32, 32))
    x[8:24, 8:24] = 1.0
    assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)
    assert ssim(1.0 - x, x) < 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ssim_symmetric_and_bounded(seed):
    r = np.random.default_rng(seed)
    a, b = r.random((16, 16)), r.random((16, 16))
    s = ssim_map(a, b)
    npt.assert_allclose(s, ssim_map(b, a), atol=1e-12)
    assert np.all(s <= 1.0 + 1e-12) and np.all(s >= -1.0 - 1e-12)


def test_ssimf_ignores_far_background(clean, rng):
    img, masks = clean
    near = ndimage.binary_dilation(masks.foreground, iterations=6)
    test = img.copy()
    far = ~near
    test[far] = rng.random(np.count_nonzero(far))
    base_ssim = ssim(img, img)
    assert ssim(test, img) < base_ssim - 0.05
    assert abs(ssimf(test, img, masks) - ssimf(img, img, masks)) < 0.005


def test_ssimf_full_mask_equals_mean_ssim(rng):
    a, b = rng.random((24, 24)), rng.random((24, 24))
    full = MaskPair.full((24, 24))
    npt.assert_allclose(ssimf(a, b, full), ssim(a, b), atol=1e-15)


def test_ms_ssim_basic(rng):
    a = rng.random((64, 64))
    b = np.clip(a + 0.1 * rng.standard_normal((64, 64)), 0, 1)
    assert ms_ssim(a, a) == pytest.approx(1.0, abs=1e-9)
    npt.assert_allclose(ms_ssim(a, b), ms_ssim(b, a), atol=1e-12)
    npt.assert_allclose(ms_ssim(a, b, scales=1), max(ssim(a, b), 0.0), atol=1e-10)
    assert 0 < ms_ssim(a, b) < 1


def test_ms_ssim_scale_count():
    assert ms_ssim_scales((256, 256)) == 5
    assert ms_ssim_scales((64, 64)) == 3
    assert ms_ssim_scales((11, 40)) == 1
    with pytest.raises(ValidationError):
        ms_ssim_scales((10, 10))


def test_snr_reference_free(rng):
    fg = np.zeros((64, 64), bool)
    fg[16:48, 16:48] = True
    masks = MaskPair(fg)
    noise = rng.standard_normal((64, 64))
    noise = (noise - noise[~fg].mean()) / noise[~fg].std(ddof=1) * 0.1
    img = np.where(fg, 0.5, 0.0) + np.where(fg, 0.0, noise)
    npt.assert_allclose(snr_rf(img, masks), 5.0, rtol=1e-12)
    npt.assert_allclose(snr_rf(3.0 * img, masks), 5.0, rtol=1e-12)
    with pytest.raises(ValidationError):
        snr_rf(np.where(fg, 0.5, 0.0), masks)


def test_contrast_cases():
    fg = np.zeros((16, 16), bool)
    fg[4:12, 4:12] = True
    masks = MaskPair(fg)
    img = np.zeros((16, 16))
    img[4:12, 4:8] = 0.0
    img[4:12, 8:12] = 1.0
    n = 64
    npt.assert_allclose(contrast(img, masks), 0.5 * math.sqrt(n / (n - 1)), rtol=1e-12)
    npt.assert_allclose(contrast(img + 0.3, masks), contrast(img, masks), rtol=1e-12)
    assert contrast(np.where(fg, 0.7, 0.0), masks) < 1e-15


def test_metrics_degrade_monotonically(clean):
    img, masks = clean
    r = np.random.default_rng(99)
    noise = r.standard_normal(img.shape)
    prev = None
    for sigma in (0.01, 0.03, 0.1, 0.3):
        test = np.clip(img + sigma * noise, 0, 1)
        cur = (psnr(test, img), ssimf(test, img, masks), ms_ssim(test, img))
        if prev is not None:
            assert all(c < p for c, p in zip(cur, prev))
        prev = cur


def test_report_csv_roundtrip_and_aggregates():
    rows = [ImageMetrics(f"img{i}", 0.9 - 0.01 * i, 30.0 + i, 0.95, 10.0 + i, 0.2)
            for i in range(5)]
    rows.append(ImageMetrics("flat", 0.5, 20.0, 0.9, math.nan, 0.1))
    rep = MetricsReport(rows)
    back = MetricsReport.from_csv(rep.to_csv())
    assert [r.image_id for r in back.rows] == [r.image_id for r in rows]
    for name in ("ssimf", "psnr_db", "ms_ssim", "contrast"):
        npt.assert_array_equal(back.values(name), rep.values(name))
    snr = [10.0, 11.0, 12.0, 13.0, 14.0]
    npt.assert_allclose(rep.mean("snr"), np.mean(snr))
    npt.assert_allclose(rep.std("snr"), np.std(snr, ddof=1))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "image_id,ssimf,psnr_db,ms_ssim,snr,contrast"
    assert lines[-2].startswith("mean,") and lines[-1].startswith("std,")


def test_image_metrics_flat_background_gives_nan_snr(clean):
    img, masks = clean
    m = image_metrics("a", img, img, masks)
    assert math.isnan(m.snr)
    assert m.psnr_db == 300.0 and m.ssimf == pytest.approx(1.0)
