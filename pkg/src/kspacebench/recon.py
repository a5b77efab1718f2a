"""Reconstruction: zero-filled baseline and a k-space/image cascade with
data consistency, iterable as a POCS scheme."""

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError, as_complex_image, fft2c, ifft2c, normalize01
from .metrics import MetricsReport, image_metrics
from .sampling import apply_mask, data_consistency

TV_EPS = 1e-6
TV_STEP = 0.1
MAX_ITERATIONS = 500
DIVERGENCE_FACTOR = 1e6


class ReconDivergenceError(RuntimeError):
    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class KStage(str, enum.Enum):
    ZERO_FILL = "zero_fill"
    HERMITIAN_FILL = "hermitian_fill"


class IStage(str, enum.Enum):
    NONE = "none"
    TV = "tv"
    REAL_POSITIVITY = "real_positivity"


@dataclass(frozen=True)
class CascadeConfig:
    k_stage: KStage = KStage.HERMITIAN_FILL
    i_stage: IStage = IStage.TV
    tv_lambda: float = 0.05
    tv_steps: int = 10
    iterations: int = 20
    record_diagnostics: bool = False

    def __post_init__(self):
        object.__setattr__(self, "k_stage", KStage(self.k_stage))
        object.__setattr__(self, "i_stage", IStage(self.i_stage))
        if self.tv_lambda < 0:
            raise ValidationError("TV weight must be non-negative")
        if self.tv_steps < 1:
            raise ValidationError("TV steps must be at least 1")
        if not 1 <= self.iterations <= MAX_ITERATIONS:
            raise ValidationError(f"iterations must lie in [1, {MAX_ITERATIONS}]")


@dataclass
class ReconResult:
    image: np.ndarray
    final_k: np.ndarray
    dc_residual: list = field(default_factory=list)
    image_change: list = field(default_factory=list)

    def diagnostics_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("iteration", "dc_residual", "image_change"))
            for i, (r, c) in enumerate(zip(self.dc_residual, self.image_change), 1):
                w.writerow((i, repr(r), repr(c)))


def zero_filled(k_acq, mask):
    return ifft2c(apply_mask(k_acq, mask))


def hermitian_partner_rows(num_lines):
    """Row index of the point reflection of each row through DC."""
    return (2 * (num_lines // 2) - np.arange(num_lines)) % num_lines


def hermitian_fill(k, mask):
    """Fill dropped rows from their conjugate-symmetric kept partner rows.

    Exact for real-valued images: X[-u, -v] = conj(X[u, v]) about DC.
    Rows whose partner was also dropped are left unchanged.
    """
    k = as_complex_image(k, "k-space")
    H, W = k.shape
    if H != len(mask):
        raise ValidationError(f"k-space has {H} rows, mask has {len(mask)} lines")
    rows = hermitian_partner_rows(H)
    cols = hermitian_partner_rows(W)
    keep = mask.keep
    fill = ~keep & keep[rows]
    out = k.copy()
    out[fill] = np.conj(k[rows[fill]][:, cols])
    return out


def _grad(m):
    gx = np.zeros_like(m)
    gy = np.zeros_like(m)
    gx[:, :-1] = m[:, 1:] - m[:, :-1]
    gy[:-1, :] = m[1:, :] - m[:-1, :]
    return gx, gy


def _div(px, py):
    # negative adjoint of _grad
    d = np.zeros_like(px)
    d[:, :-1] += px[:, :-1]
    d[:, 1:] -= px[:, :-1]
    d[:-1, :] += py[:-1, :]
    d[1:, :] -= py[:-1, :]
    return d


def tv_objective(m, m0, lam, eps=TV_EPS):
    gx, gy = _grad(m)
    return 0.5 * float(np.sum((m - m0) ** 2)) + lam * float(np.sum(np.sqrt(gx**2 + gy**2 + eps**2)))


def tv_denoise(img, lam, steps, return_objective=False):
    """Smoothed-TV denoising of the magnitude of ``img``, phase preserved.

    Gradient descent on ``0.5 ||m - |img|||^2 + lam * TV_eps(m)`` starting
    from step 0.1; a step that would raise the objective is halved until
    it does not, so the objective never increases. Magnitudes are kept
    non-negative.
    """
    x = as_complex_image(img)
    if lam < 0 or steps < 1:
        raise ValidationError("need lam >= 0 and steps >= 1")
    if lam == 0:
        return (x.copy(), [0.0] * (steps + 1)) if return_objective else x.copy()
    m0 = np.abs(x)
    phase = np.exp(1j * np.angle(x))
    m = m0.copy()
    obj = tv_objective(m, m0, lam)
    history = [obj]
    for _ in range(steps):
        gx, gy = _grad(m)
        norm = np.sqrt(gx**2 + gy**2 + TV_EPS**2)
        g = (m - m0) - lam * _div(gx / norm, gy / norm)
        step = TV_STEP
        while True:
            cand = np.maximum(m - step * g, 0.0)
            cand_obj = tv_objective(cand, m0, lam)
            if cand_obj <= obj:
                m, obj = cand, cand_obj
                break
            step *= 0.5
            if step < 1e-12:
                break
        history.append(obj)
    out = m * phase
    return (out, history) if return_objective else out


def _k_stage(cfg, k, mask):
    if cfg.k_stage is KStage.HERMITIAN_FILL:
        return hermitian_fill(k, mask)
    return k


def _i_stage(cfg, x):
    if cfg.i_stage is IStage.TV:
        return tv_denoise(x, cfg.tv_lambda, cfg.tv_steps)
    if cfg.i_stage is IStage.REAL_POSITIVITY:
        return np.maximum(x.real, 0.0).astype(np.complex128)
    return x


def cascade_run(k_acq, mask, cfg=CascadeConfig()):
    """Run the k-space stage / data consistency / image stage cascade.

    One iteration: k-space stage, insert acquired lines, inverse FFT, image
    stage, forward FFT. The acquired lines are inserted once more before
    the final inverse transform, so kept lines of ``final_k`` equal the
    acquired ones exactly.
    """
    k_acq = apply_mask(as_complex_image(k_acq, "k-space"), mask)
    keep = mask.keep
    k = k_acq
    x_prev = ifft2c(k_acq)
    scale = max(float(np.linalg.norm(x_prev)), np.finfo(float).tiny)
    result = ReconResult(x_prev, k_acq)
    for it in range(cfg.iterations):
        k = data_consistency(_k_stage(cfg, k, mask), k_acq, mask)
        x = _i_stage(cfg, ifft2c(k))
        k = fft2c(x)
        change = float(np.linalg.norm(x - x_prev))
        result.dc_residual.append(float(np.linalg.norm(k[keep] - k_acq[keep])))
        result.image_change.append(change)
        if not math.isfinite(change) or change > DIVERGENCE_FACTOR * scale:
            raise ReconDivergenceError(
                f"cascade diverged at iteration {it + 1}: image change {change:.3g}",
                list(zip(result.dc_residual, result.image_change)))
        x_prev = x
    result.final_k = data_consistency(k, k_acq, mask)
    result.image = ifft2c(result.final_k)
    if not cfg.record_diagnostics:
        result.dc_residual, result.image_change = [], []
    return result


def reference_image(x):
    """Normalized magnitude used for scoring."""
    return normalize01(np.abs(np.asarray(x)))


def evaluate_external(recon_images, refs, masks, ids=None):
    """Score a batch of reconstructions against references.

    Both sides are reduced to normalized magnitude images before scoring,
    so externally produced reconstructions go through the same pipeline as
    the built-in ones.
    """
    recon_images, refs, masks = list(recon_images), list(refs), list(masks)
    if not (len(recon_images) == len(refs) == len(masks)):
        raise ValidationError(
            f"batch size mismatch: {len(recon_images)} images, {len(refs)} refs, {len(masks)} masks")
    ids = [str(i) for i in range(len(refs))] if ids is None else list(ids)
    rows = [image_metrics(i, reference_image(x), reference_image(r), m)
            for i, x, r, m in zip(ids, recon_images, refs, masks)]
    return MetricsReport(rows)
