"""Centered unitary 2D Fourier transforms and small array helpers.

Images and k-spaces are plain ``numpy`` complex128 arrays of shape
``(H, W)``. Rows are phase-encode lines. k-space is stored DC-centered,
the zero frequency sitting at index ``(H // 2, W // 2)``.
"""

import numpy as np

MIN_SIZE = 8


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


def as_complex_image(x, name="image"):
    """Validate ``x`` as a finite 2D complex grid and return it as complex128."""
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.shape[0] < MIN_SIZE or arr.shape[1] < MIN_SIZE:
        raise ValidationError(
            f"{name} must be at least {MIN_SIZE}x{MIN_SIZE}, got {arr.shape}")
    arr = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite samples")
    return arr


def as_real_image(x, name="image"):
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2D, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        raise ValidationError(f"{name} must be real-valued")
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite samples")
    return arr


def fft2c(image):
    """Unitary 2D DFT of an image, returning DC-centered k-space.

    Parameters
    ----------
    image : array_like, shape (H, W)
        Complex (or real) image samples.

    Returns
    -------
    numpy.ndarray
        complex128 k-space with the DC sample at ``(H // 2, W // 2)``.
    """
    x = as_complex_image(image)
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(x), norm="ortho"))


def ifft2c(kspace):
    """Inverse of :func:`fft2c`."""
    k = as_complex_image(kspace, "k-space")
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(k), norm="ortho"))


def magnitude(x):
    return np.abs(as_complex_image(x))


def normalize01(x):
    """Min-max scale a real image to [0, 1]; constant images map to zeros."""
    arr = np.asarray(x, dtype=np.float64)
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def centered_frequencies(n):
    """Integer frequency index of each position of a DC-centered axis of length ``n``."""
    return np.arange(n) - n // 2
