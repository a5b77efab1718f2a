"""Simulate degraded under-sampled Cartesian MR k-space, reconstruct it with
data-consistent cascades and score the results."""

from .core import ValidationError, fft2c, ifft2c, magnitude, normalize01
from .phantom import MaskPair, PhantomSpec, brain_phantom_spec, estimate_foreground, \
    generate_phantom
from .sampling import MaskSpec, SamplingMask, Strategy, apply_mask, data_consistency, \
    line_budget, make_mask
from .artifacts import MotionEvent, acquisition_order, add_gaussian_noise, calibrate_sigma, \
    simulate_motion
from .metrics import MetricsReport, ms_ssim, psnr, snr_rf, ssim_map, ssimf, contrast
from .recon import CascadeConfig, cascade_run, evaluate_external, hermitian_fill, \
    tv_denoise, zero_filled

__version__ = "0.1.0"

__all__ = [
    "ValidationError",
    "fft2c",
    "ifft2c",
    "magnitude",
    "normalize01",
    "MaskPair",
    "PhantomSpec",
    "brain_phantom_spec",
    "estimate_foreground",
    "generate_phantom",
    "MaskSpec",
    "SamplingMask",
    "Strategy",
    "apply_mask",
    "data_consistency",
    "line_budget",
    "make_mask",
    "MotionEvent",
    "acquisition_order",
    "add_gaussian_noise",
    "calibrate_sigma",
    "simulate_motion",
    "MetricsReport",
    "ms_ssim",
    "psnr",
    "snr_rf",
    "ssim_map",
    "ssimf",
    "contrast",
    "CascadeConfig",
    "cascade_run",
    "evaluate_external",
    "hermitian_fill",
    "tv_denoise",
    "zero_filled",
]
