"""Synthetic brain-like ellipse phantoms and subject/background masks."""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import ValidationError, as_real_image

MAX_TEXTURE = 0.05


@dataclass(frozen=True)
class Ellipse:
    """One additive ellipse in normalized [-1, 1] coordinates.

    ``cx``/``cy`` are the center along the width/height axes, ``a``/``b``
    the semi-axes along the same axes before rotation, ``rotation`` is in
    degrees and ``intensity`` is added inside the ellipse.
    """

    cx: float
    cy: float
    a: float
    b: float
    rotation: float = 0.0
    intensity: float = 1.0


@dataclass(frozen=True)
class PhantomSpec:
    height: int
    width: int
    ellipses: tuple = ()
    seed: int = 0
    texture: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "ellipses", tuple(
            e if isinstance(e, Ellipse) else Ellipse(**e) for e in self.ellipses))


@dataclass(frozen=True)
class MaskPair:
    foreground: np.ndarray
    background: np.ndarray = field(default=None)

    def __post_init__(self):
        fg = np.asarray(self.foreground, dtype=bool)
        bg = ~fg if self.background is None else np.asarray(self.background, dtype=bool)
        if fg.shape != bg.shape:
            raise ValidationError("foreground and background shapes differ")
        if np.any(fg & bg) or not np.all(fg | bg):
            raise ValidationError("foreground/background must partition the grid")
        if not fg.any():
            raise ValidationError("foreground is empty")
        if not bg.any():
            raise ValidationError("background is empty")
        object.__setattr__(self, "foreground", fg)
        object.__setattr__(self, "background", bg)

    @classmethod
    def full(cls, shape):
        """All-foreground pair; only usable where the background is not needed."""
        pair = object.__new__(cls)
        object.__setattr__(pair, "foreground", np.ones(shape, dtype=bool))
        object.__setattr__(pair, "background", np.zeros(shape, dtype=bool))
        return pair


def _grid(height, width):
    # pixel centers in [-1, 1]
    y = (np.arange(height) + 0.5) / height * 2.0 - 1.0
    x = (np.arange(width) + 0.5) / width * 2.0 - 1.0
    return np.meshgrid(x, y)


def ellipse_mask(e, height, width):
    X, Y = _grid(height, width)
    t = np.deg2rad(e.rotation)
    xr = (X - e.cx) * np.cos(t) + (Y - e.cy) * np.sin(t)
    yr = -(X - e.cx) * np.sin(t) + (Y - e.cy) * np.cos(t)
    return (xr / e.a) ** 2 + (yr / e.b) ** 2 <= 1.0


def _texture_field(height, width, seed):
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((height, width))
    smooth = ndimage.gaussian_filter(white, sigma=max(height, width) / 32.0, mode="wrap")
    return smooth / np.abs(smooth).max()


def generate_phantom(spec):
    """Render a phantom.

    Returns
    -------
    image : numpy.ndarray
        complex128 image with zero imaginary part, max intensity 1.
    masks : MaskPair
        Foreground is the union of all ellipse supports.
    """
    if not spec.ellipses:
        raise ValidationError("phantom spec needs at least one ellipse")
    if spec.height < 8 or spec.width < 8:
        raise ValidationError("phantom must be at least 8x8")
    if not 0.0 <= spec.texture <= MAX_TEXTURE:
        raise ValidationError(f"texture amplitude must lie in [0, {MAX_TEXTURE}]")
    img = np.zeros((spec.height, spec.width))
    fg = np.zeros((spec.height, spec.width), dtype=bool)
    for e in spec.ellipses:
        if not (-1.0 <= e.cx <= 1.0 and -1.0 <= e.cy <= 1.0):
            raise ValidationError(f"ellipse center outside [-1, 1]: {e}")
        if e.a <= 0 or e.b <= 0:
            raise ValidationError(f"ellipse semi-axes must be positive: {e}")
        inside = ellipse_mask(e, spec.height, spec.width)
        img[inside] += e.intensity
        fg |= inside
    if img.min() < -1e-12:
        raise ValidationError("ellipse intensities sum to negative values")
    img = np.maximum(img, 0.0)
    peak = img.max()
    if peak <= 0:
        raise ValidationError("phantom has no positive intensity")
    img /= peak
    if spec.texture > 0:
        img = img + spec.texture * _texture_field(spec.height, spec.width, spec.seed) * fg
        img = np.maximum(img, 0.0)
        img /= img.max()
    return img.astype(np.complex128), MaskPair(fg)


DEFAULT_BRAIN = (
    Ellipse(0.0, 0.0, 0.72, 0.88, 0.0, 0.6),  # head outline / tissue
    Ellipse(-0.2, -0.1, 0.12, 0.30, 20.0, -0.3),  # dark ventricle-like structure
    Ellipse(0.15, 0.35, 0.30, 0.18, -10.0, 0.15),  # brighter region
    Ellipse(0.35, -0.35, 0.10, 0.09, 0.0, 0.4),  # tumor
)


def brain_phantom_spec(size=256, seed=None, texture=0.02):
    """Default brain-like spec; with ``seed`` the geometry is jittered.

    ``seed=None`` returns the fixed default layout without texture.
    """
    if seed is None:
        return PhantomSpec(size, size, DEFAULT_BRAIN, seed=0, texture=0.0)
    rng = np.random.default_rng(seed)
    u = lambda s: rng.uniform(-s, s)  # noqa: E731
    head, vent, region, tumor = DEFAULT_BRAIN
    head = Ellipse(u(0.03), u(0.03), head.a + u(0.05), head.b + u(0.05), u(8.0),
                   head.intensity * (1 + u(0.1)))
    vent = Ellipse(vent.cx + u(0.05), vent.cy + u(0.05), vent.a * (1 + u(0.2)),
                   vent.b * (1 + u(0.2)), vent.rotation + u(10.0), vent.intensity * (1 + u(0.2)))
    region = Ellipse(region.cx + u(0.05), region.cy + u(0.05), region.a * (1 + u(0.2)),
                     region.b * (1 + u(0.2)), region.rotation + u(10.0), region.intensity)
    # tumor somewhere in the lower-right quadrant of the brain
    tumor = Ellipse(tumor.cx + u(0.1), tumor.cy + u(0.1), tumor.a * (1 + u(0.3)),
                    tumor.b * (1 + u(0.3)), u(90.0), tumor.intensity * (1 + u(0.2)))
    return PhantomSpec(size, size, (head, vent, region, tumor),
                       seed=int(rng.integers(2**63)), texture=texture)


def otsu_threshold(values, nbins=256):
    """Threshold maximizing the between-class variance of a histogram."""
    hist, edges = np.histogram(values, bins=nbins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    w0 = np.cumsum(hist).astype(np.float64)
    w1 = w0[-1] - w0
    s0 = np.cumsum(hist * centers)
    m0 = s0 / np.where(w0 > 0, w0, 1)
    m1 = (s0[-1] - s0) / np.where(w1 > 0, w1, 1)
    between = w0 * w1 * (m0 - m1) ** 2
    # split after bin i means threshold at its upper edge
    return edges[1:][np.argmax(between[:-1])]


def estimate_foreground(img):
    """Estimate the subject mask of a normalized magnitude image.

    Global Otsu threshold (256 bins), 3x3 closing, largest connected
    component, then interior holes filled so that dark structures inside
    the subject count as subject.
    """
    x = as_real_image(img)
    if x.max() == x.min():
        raise ValidationError("no subject detected")
    fg = x > otsu_threshold(x.ravel())
    # edge padding keeps the closing from eroding the image border
    fg = ndimage.binary_closing(np.pad(fg, 1, mode="edge"),
                                structure=np.ones((3, 3), bool))[1:-1, 1:-1]
    labels, n = ndimage.label(fg)
    if n == 0:
        raise ValidationError("no subject detected")
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, n + 1))
    fg = labels == (1 + int(np.argmax(sizes)))
    fg = ndimage.binary_fill_holes(fg)
    if fg.all():
        raise ValidationError("no background detected; subject fills the image")
    return MaskPair(fg)


def dice(a, b):
    a = np.asarray(a, bool)
    b = np.asarray(b, bool)
    return 2.0 * np.count_nonzero(a & b) / (np.count_nonzero(a) + np.count_nonzero(b))
