"""Reference-based (PSNR, SSIM, SSIMf, MS-SSIM) and reference-free (SNR,
contrast) image quality metrics on normalized magnitude images."""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import ValidationError, as_real_image

PSNR_CAP = 300.0
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class SsimParams:
    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    def __post_init__(self):
        if self.window_size % 2 != 1 or self.window_size < 1:
            raise ValidationError("SSIM window size must be odd")

    def window(self):
        """1D Gaussian taps summing to one (the 2D window is their outer product)."""
        r = self.window_size // 2
        t = np.exp(-0.5 * (np.arange(-r, r + 1) / self.sigma) ** 2)
        return t / t.sum()


def _pair(test, ref):
    t = as_real_image(test, "test image")
    r = as_real_image(ref, "reference image")
    if t.shape != r.shape:
        raise ValidationError(f"dimension mismatch {t.shape} vs {r.shape}")
    return t, r


def mse(test, ref):
    t, r = _pair(test, ref)
    return float(np.mean((t - r) ** 2))


def psnr(test, ref):
    """PSNR in dB for images with peak value 1; capped at 300 dB."""
    err = mse(test, ref)
    if err == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / err))


def _filter(x, taps):
    # 'reflect' in scipy is the symmetric (edge-duplicating) extension
    y = ndimage.correlate1d(x, taps, axis=0, mode="reflect")
    return ndimage.correlate1d(y, taps, axis=1, mode="reflect")


def _ssim_terms(t, r, params):
    taps = params.window()
    mu_t = _filter(t, taps)
    mu_r = _filter(r, taps)
    var_t = _filter(t * t, taps) - mu_t * mu_t
    var_r = _filter(r * r, taps) - mu_r * mu_r
    cov = _filter(t * r, taps) - mu_t * mu_r
    c1 = (params.k1 * params.data_range) ** 2
    c2 = (params.k2 * params.data_range) ** 2
    lum = (2 * mu_t * mu_r + c1) / (mu_t * mu_t + mu_r * mu_r + c1)
    cs = (2 * cov + c2) / (var_t + var_r + c2)
    return lum, cs


def ssim_map(test, ref, params=SsimParams()):
    t, r = _pair(test, ref)
    if min(t.shape) < params.window_size:
        raise ValidationError(
            f"images must be at least {params.window_size} pixels per side, got {t.shape}")
    lum, cs = _ssim_terms(t, r, params)
    return lum * cs


def ssim(test, ref, params=SsimParams()):
    return float(np.mean(ssim_map(test, ref, params)))


def ssimf(test, ref, masks, params=SsimParams()):
    """Mean of the SSIM map over the subject (foreground) pixels."""
    fg = np.asarray(masks.foreground, dtype=bool)
    if not fg.any():
        raise ValidationError("empty foreground")
    smap = ssim_map(test, ref, params)
    if fg.shape != smap.shape:
        raise ValidationError("mask shape does not match the images")
    return float(np.mean(smap[fg]))


def ms_ssim_scales(shape, window_size=11, max_scales=len(MS_SSIM_WEIGHTS)):
    n = min(shape)
    scales = 0
    while scales < max_scales and n >= window_size:
        scales += 1
        n //= 2
    if scales == 0:
        raise ValidationError(f"images too small for MS-SSIM: {shape}")
    return scales


def _downsample(x):
    h, w = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
    x = x[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def ms_ssim(test, ref, params=SsimParams(), scales=None):
    """Multi-scale SSIM with the standard five-level weights.

    Fewer levels are used when the images are too small for five (the
    coarsest level must still fit one window); the weights in use are then
    renormalized to sum to one. Contrast-structure terms are floored at 0.
    """
    t, r = _pair(test, ref)
    feasible = ms_ssim_scales(t.shape, params.window_size)
    scales = feasible if scales is None else scales
    if not 1 <= scales <= feasible:
        raise ValidationError(f"{scales} scales not feasible for shape {t.shape}")
    w = np.array(MS_SSIM_WEIGHTS[:scales])
    w = w / w.sum()
    result = 1.0
    for level in range(scales):
        lum, cs = _ssim_terms(t, r, params)
        if level == scales - 1:
            term = float(np.mean(lum * cs))
        else:
            term = float(np.mean(cs))
            t, r = _downsample(t), _downsample(r)
        result *= max(term, 0.0) ** w[level]
    return float(result)


def snr_rf(img, masks):
    """Mean subject signal over the (unbiased) background standard deviation."""
    x = as_real_image(img)
    fg, bg = masks.foreground, masks.background
    if not fg.any() or not bg.any():
        raise ValidationError("SNR needs non-empty foreground and background")
    if np.count_nonzero(bg) < 2:
        raise ValidationError("noiseless background, SNR undefined")
    sd = float(np.std(x[bg], ddof=1))
    if sd == 0:
        raise ValidationError("noiseless background, SNR undefined")
    return float(np.mean(x[fg])) / sd


def contrast(img, masks):
    """Standard deviation (N-1) of the tissue signal."""
    x = as_real_image(img)
    vals = x[masks.foreground]
    if vals.size < 2:
        raise ValidationError("contrast needs at least two foreground pixels")
    return float(np.std(vals, ddof=1))


METRIC_NAMES = ("ssimf", "psnr_db", "ms_ssim", "snr", "contrast")


@dataclass(frozen=True)
class ImageMetrics:
    image_id: str
    ssimf: float
    psnr_db: float
    ms_ssim: float
    snr: float
    contrast: float


def _fmt(v):
    return repr(float(v))


@dataclass
class MetricsReport:
    """Per-image metric rows plus mean/std aggregates."""

    rows: list = field(default_factory=list)

    def values(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)

    # NaN entries (undefined SNR) are left out of the aggregates
    def mean(self, name):
        v = self.values(name)
        v = v[~np.isnan(v)]
        return float(np.mean(v)) if v.size else math.nan

    def std(self, name):
        v = self.values(name)
        v = v[~np.isnan(v)]
        return float(np.std(v, ddof=1)) if v.size > 1 else math.nan

    def aggregate(self):
        return {n: (self.mean(n), self.std(n)) for n in METRIC_NAMES}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("image_id",) + METRIC_NAMES)
        for r in self.rows:
            w.writerow([r.image_id] + [_fmt(getattr(r, n)) for n in METRIC_NAMES])
        w.writerow(["mean"] + [_fmt(self.mean(n)) for n in METRIC_NAMES])
        w.writerow(["std"] + [_fmt(self.std(n)) for n in METRIC_NAMES])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        reader = csv.DictReader(io.StringIO(text))
        rows = []
        for rec in reader:
            if rec["image_id"] in ("mean", "std"):
                continue
            rows.append(ImageMetrics(rec["image_id"],
                                     *(float(rec[n]) for n in METRIC_NAMES)))
        return cls(rows)


def image_metrics(image_id, test, ref, masks, params=SsimParams()):
    """Score one normalized magnitude image against its reference.

    SNR is reported as NaN when the background of ``test`` is exactly flat.
    """
    try:
        snr = snr_rf(test, masks)
    except ValidationError:
        snr = math.nan
    return ImageMetrics(
        image_id=str(image_id),
        ssimf=ssimf(test, ref, masks, params),
        psnr_db=psnr(test, ref),
        ms_ssim=ms_ssim(test, ref, params),
        snr=snr,
        contrast=contrast(test, masks),
    )

