"""k-space degradations: complex Gaussian noise and rigid step motion."""

import enum
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import ValidationError, as_complex_image, centered_frequencies, fft2c, ifft2c
from .metrics import snr_rf

CALIBRATION_SEEDS = 8
MAX_BISECTIONS = 60


class CalibrationError(RuntimeError):
    def __init__(self, message, bracket):
        super().__init__(f"{message}; bracketing interval [{bracket[0]:.6g}, {bracket[1]:.6g}]")
        self.bracket = bracket


def add_gaussian_noise(k, sigma, seed):
    """Add i.i.d. N(0, sigma^2) noise to the real and imaginary parts of ``k``."""
    if sigma < 0:
        raise ValidationError(f"noise sigma must be non-negative, got {sigma}")
    k = as_complex_image(k, "k-space")
    if sigma == 0:
        return k.copy()
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((2,) + k.shape)
    return k + sigma * (noise[0] + 1j * noise[1])


def calibration_seeds(seed, n=CALIBRATION_SEEDS):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n, dtype=np.uint64)]


def noisy_snr(k, masks, sigma, seeds):
    """Mean magnitude-image SNR of ``k`` after adding noise with each seed."""
    vals = [snr_rf(np.abs(ifft2c(add_gaussian_noise(k, sigma, s))), masks) for s in seeds]
    return float(np.mean(vals))


def calibrate_sigma(k, masks, target_factor, seed=0, rel_tol=1e-3):
    """Find the noise sigma that scales the image SNR by ``target_factor``.

    The SNR after noise is averaged over eight fixed noise seeds derived
    from ``seed``; sigma is bisected on ``[0, rms(|k|)]``.

    Raises
    ------
    CalibrationError
        If the target is not bracketed or 60 bisections do not reach 2%
        relative agreement.
    """
    if not 0 < target_factor <= 1:
        raise ValidationError(f"target_factor must lie in (0, 1], got {target_factor}")
    k = as_complex_image(k, "k-space")
    base = snr_rf(np.abs(ifft2c(k)), masks)
    target = target_factor * base
    if target_factor == 1:
        return 0.0
    seeds = calibration_seeds(seed)
    lo, hi = 0.0, float(np.sqrt(np.mean(np.abs(k) ** 2)))
    if noisy_snr(k, masks, hi, seeds) > target:
        raise CalibrationError("target SNR not reachable within sigma <= rms(|k|)", (lo, hi))
    best = None
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        snr = noisy_snr(k, masks, mid, seeds)
        err = abs(snr - target) / target
        if best is None or err < best[1]:
            best = (mid, err)
        if err < rel_tol:
            return mid
        if snr > target:
            lo = mid
        else:
            hi = mid
    if best[1] <= 0.02:
        return best[0]
    raise CalibrationError("noise calibration did not converge", (lo, hi))


class OrderKind(str, enum.Enum):
    LINEAR = "linear"
    CENTRIC = "centric"


@dataclass(frozen=True)
class AcquisitionOrder:
    kind: OrderKind
    permutation: np.ndarray  # line index -> acquisition time index

    @property
    def sequence(self):
        """Line indices in the order they are acquired."""
        return np.argsort(self.permutation)


def acquisition_order(num_lines, kind=OrderKind.LINEAR):
    kind = OrderKind(kind)
    if num_lines < 1:
        raise ValidationError("num_lines must be positive")
    if kind is OrderKind.LINEAR:
        seq = np.arange(num_lines)
    else:
        c = num_lines // 2
        seq = [c]
        step = 1
        while len(seq) < num_lines:
            for cand in (c - step, c + step):
                if 0 <= cand < num_lines:
                    seq.append(cand)
            step += 1
        seq = np.array(seq)
    perm = np.empty(num_lines, dtype=np.int64)
    perm[seq] = np.arange(num_lines)
    return AcquisitionOrder(kind, perm)


@dataclass(frozen=True)
class MotionEvent:
    """Rigid pose change at ``onset`` (fraction of the acquisition time).

    ``rotation`` in degrees about the image center, ``shift`` as (dx, dy)
    pixels along width/height. Transient events revert at the next onset.
    """

    onset: float
    rotation: float = 0.0
    shift: tuple = (0.0, 0.0)
    transient: bool = False

    def __post_init__(self):
        object.__setattr__(self, "shift", tuple(float(s) for s in self.shift))


def validate_events(events, shape):
    H, W = shape
    prev = None
    for ev in events:
        if not 0.0 <= ev.onset < 1.0:
            raise ValidationError(f"motion onset must lie in [0, 1): {ev}")
        if prev is not None and ev.onset <= prev:
            raise ValidationError("motion events must be sorted by strictly increasing onset")
        if abs(ev.rotation) > 45:
            raise ValidationError(f"rotation beyond 45 degrees: {ev}")
        if len(ev.shift) != 2 or abs(ev.shift[0]) > 0.25 * W or abs(ev.shift[1]) > 0.25 * H:
            raise ValidationError(f"shift beyond a quarter of the image: {ev}")
        prev = ev.onset


def motion_states(events):
    """Pose (rotation degrees, dx, dy) active on each segment of the timeline.

    Poses accumulate. A transient event holds only until the next onset,
    where the pose falls back to the accumulated non-transient one.
    Returns ``(starts, poses)``; segment ``i`` starts at ``starts[i]`` and
    the first segment (identity pose) starts at 0.
    """
    starts = [0.0]
    poses = [(0.0, 0.0, 0.0)]
    settled = (0.0, 0.0, 0.0)
    for ev in events:
        pose = _compose(settled, ev)
        if not ev.transient:
            settled = pose
        if ev.onset == 0.0:
            poses[0] = pose
        else:
            starts.append(ev.onset)
            poses.append(pose)
    return starts, poses


def _compose(pose, ev):
    # x -> R_ev (R x + t) + d_ev, rotations about the same center
    angle, dx, dy = pose
    t = np.deg2rad(ev.rotation)
    c, s = np.cos(t), np.sin(t)
    ndx = c * dx - s * dy + ev.shift[0]
    ndy = s * dx + c * dy + ev.shift[1]
    return (angle + ev.rotation, float(ndx), float(ndy))


def rotate_image(img, degrees):
    """Bilinear rotation about the geometric image center, zero fill outside."""
    if degrees == 0:
        return img.copy()
    H, W = img.shape
    t = np.deg2rad(degrees)
    c, s = np.cos(t), np.sin(t)
    center = np.array([(H - 1) / 2.0, (W - 1) / 2.0])
    # output (row, col) samples input at R^-1 (out - center) + center; (x, y) = (col, row)
    inv = np.array([[c, -s], [s, c]])
    offset = center - inv @ center
    warp = lambda a: ndimage.affine_transform(  # noqa: E731
        a, inv, offset=offset, order=1, mode="constant", cval=0.0)
    return warp(img.real) + 1j * warp(img.imag)


def shift_phase_ramp(shape, dx, dy):
    H, W = shape
    ky = centered_frequencies(H)[:, None]
    kx = centered_frequencies(W)[None, :]
    return np.exp(-2j * np.pi * (kx * dx / W + ky * dy / H))


def transformed_kspace(img, pose):
    angle, dx, dy = pose
    k = fft2c(rotate_image(img, angle) if angle != 0 else img)
    if dx != 0 or dy != 0:
        k = k * shift_phase_ramp(img.shape, dx, dy)
    return k


def simulate_motion(img, events, order=None):
    """Composite k-space of an object that moves during the acquisition.

    Each line is taken from the k-space of the pose that is active when the
    line is acquired (step motion, no intra-line motion). Translations are
    exact phase ramps; rotations are bilinear image resampling.
    """
    img = as_complex_image(img)
    H = img.shape[0]
    events = list(events)
    validate_events(events, img.shape)
    if order is None:
        order = acquisition_order(H)
    if len(order.permutation) != H:
        raise ValidationError("acquisition order does not match the image height")
    if not events:
        return fft2c(img)
    starts, poses = motion_states(events)
    times = order.permutation / H
    segment = np.searchsorted(np.asarray(starts), times, side="right") - 1
    out = np.empty(img.shape, dtype=np.complex128)
    for s in np.unique(segment):
        rows = segment == s
        out[rows] = transformed_kspace(img, poses[s])[rows]
    return out


def motion_state_images(img, events):
    """Image-domain object at every motion state, for visual checks."""
    img = as_complex_image(img)
    validate_events(list(events), img.shape)
    _, poses = motion_states(list(events))
    return [ifft2c(transformed_kspace(img, p)) for p in poses]
