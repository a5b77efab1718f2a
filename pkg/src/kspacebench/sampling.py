"""Cartesian phase-encode under-sampling masks and data consistency.

A mask selects whole rows of a DC-centered k-space. Every strategy keeps a
contiguous block of central (ACS) lines and then spends the remaining line
budget outside it.
"""

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import ValidationError

# acceleration -> ACS fraction pairing used for the standard experiment matrix
DEFAULT_ACS_FRACTIONS = {2: 0.25, 5: 0.10, 10: 0.04}


class Strategy(str, enum.Enum):
    GRADIENT = "gradient"
    RANDOM = "random"
    UNIFORM = "uniform"


def _exact(value):
    # decimal literal -> exact rational, so 0.1 * 256 rounds as written
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(repr(float(value)))


def round_half_up(value):
    return math.floor(_exact(value) + Fraction(1, 2))


def line_budget(num_lines, acceleration, acs_fraction):
    """Return ``(budget, acs_count)`` for ``num_lines`` phase-encode lines.

    >>> line_budget(256, 5, 0.10)
    (51, 26)
    """
    if num_lines < 1:
        raise ValidationError("num_lines must be positive")
    if not _exact(acceleration) > 1:
        raise ValidationError(f"acceleration must exceed 1, got {acceleration}")
    if not 0 < _exact(acs_fraction) < 1:
        raise ValidationError(f"acs_fraction must lie in (0, 1), got {acs_fraction}")
    budget = round_half_up(Fraction(num_lines) / _exact(acceleration))
    acs = round_half_up(_exact(acs_fraction) * num_lines)
    if acs > budget:
        raise ValidationError(
            f"ACS block ({acs} lines) exceeds the line budget ({budget}) "
            f"for H={num_lines}, R={acceleration}, acs={acs_fraction}")
    return budget, acs


@dataclass(frozen=True)
class MaskSpec:
    strategy: Strategy
    acceleration: float
    acs_fraction: float
    num_lines: int
    seed: int = 0
    gradient_alpha: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        line_budget(self.num_lines, self.acceleration, self.acs_fraction)


@dataclass(frozen=True)
class SamplingMask:
    keep: np.ndarray
    spec: MaskSpec = None

    def __post_init__(self):
        keep = np.asarray(self.keep, dtype=bool)
        if keep.ndim != 1:
            raise ValidationError("mask must be a 1D line vector")
        keep.setflags(write=False)
        object.__setattr__(self, "keep", keep)

    def __len__(self):
        return self.keep.size

    @property
    def count(self):
        return int(np.count_nonzero(self.keep))

    @classmethod
    def full(cls, num_lines):
        return cls(np.ones(num_lines, dtype=bool))


def acs_slice(num_lines, acs_count):
    start = num_lines // 2 - acs_count // 2
    return slice(start, start + acs_count)


def make_mask(spec):
    """Build the line mask described by ``spec``.

    The Uniform strategy ignores the seed. If the ACS block already uses
    the whole budget, the ACS-only mask is returned.
    """
    H = spec.num_lines
    budget, acs = line_budget(H, spec.acceleration, spec.acs_fraction)
    keep = np.zeros(H, dtype=bool)
    keep[acs_slice(H, acs)] = True
    outside = np.flatnonzero(~keep)
    n_extra = budget - acs
    if n_extra > 0:
        if spec.strategy is Strategy.UNIFORM:
            j = np.arange(n_extra)
            chosen = outside[(j * outside.size) // n_extra]
        else:
            rng = np.random.default_rng(spec.seed)
            if spec.strategy is Strategy.RANDOM:
                chosen = rng.choice(outside, size=n_extra, replace=False)
            else:
                d = np.abs(outside - H // 2) / (H / 2.0)
                w = np.clip(1.0 - d, 0.0, None) ** spec.gradient_alpha
                if np.count_nonzero(w) < n_extra:
                    w = w + 1e-12
                chosen = rng.choice(outside, size=n_extra, replace=False, p=w / w.sum())
        keep[chosen] = True
    return SamplingMask(keep, spec)


def _check_rows(k, mask, name="k-space"):
    k = np.asarray(k)
    if k.ndim != 2 or k.shape[0] != len(mask):
        raise ValidationError(
            f"{name} has {k.shape[0] if k.ndim == 2 else k.shape} rows, mask has {len(mask)} lines")
    return k


def apply_mask(k, mask):
    """Zero the rows of ``k`` whose line is not kept."""
    k = _check_rows(k, mask)
    out = np.array(k, dtype=np.complex128, copy=True)
    out[~mask.keep] = 0
    return out


def data_consistency(predicted, acquired, mask):
    """Replace kept rows of ``predicted`` with the acquired rows."""
    predicted = _check_rows(predicted, mask, "predicted k-space")
    acquired = _check_rows(acquired, mask, "acquired k-space")
    if predicted.shape != acquired.shape:
        raise ValidationError(f"shape mismatch {predicted.shape} vs {acquired.shape}")
    out = np.array(predicted, dtype=np.complex128, copy=True)
    out[mask.keep] = acquired[mask.keep]
    return out


def save_mask(mask, path):
    with open(path, "w") as fh:
        fh.write("".join("1\n" if v else "0\n" for v in mask.keep))


def load_mask(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    bad = [ln for ln in lines if ln not in ("0", "1")]
    if bad:
        raise ValidationError(f"{path}: mask lines must be 0 or 1, got {bad[0]!r}")
    return SamplingMask(np.array([ln == "1" for ln in lines], dtype=bool))
