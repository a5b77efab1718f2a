"""Slow, independent reference implementations used only by the tests.

Nothing here calls numpy.fft, scipy.ndimage or the package under test.
"""

import cmath
import math
import struct

import numpy as np


def centered_dft_matrix(n, inverse=False):
    c = n // 2
    sign = 1.0 if inverse else -1.0
    m = np.empty((n, n), dtype=np.complex128)
    for u in range(n):
        for j in range(n):
            m[u, j] = cmath.exp(sign * 2j * math.pi * (u - c) * (j - c) / n) / math.sqrt(n)
    return m


def direct_dft2c(x, inverse=False):
    """Centered unitary 2D DFT by explicit summation (matrix form)."""
    h, w = x.shape
    return centered_dft_matrix(h, inverse) @ x @ centered_dft_matrix(w, inverse).T


def loop_mse(a, b):
    total = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            d = float(a[i, j]) - float(b[i, j])
            total += d * d
    return total / a.size


def gaussian_window_2d(size=11, sigma=1.5):
    r = size // 2
    g = [math.exp(-((i - r) ** 2) / (2 * sigma * sigma)) for i in range(size)]
    s = sum(g)
    g = [v / s for v in g]
    return np.array([[gi * gj for gj in g] for gi in g])


def brute_ssim_map(x, y, size=11, sigma=1.5, k1=0.01, k2=0.03, L=1.0):
    """Per-pixel windowed SSIM with symmetric (edge-repeating) padding."""
    r = size // 2
    w = gaussian_window_2d(size, sigma)
    xp = np.pad(x, r, mode="symmetric")
    yp = np.pad(y, r, mode="symmetric")
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    out = np.empty(x.shape)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            px = xp[i:i + size, j:j + size]
            py = yp[i:i + size, j:j + size]
            mx = float(np.sum(w * px))
            my = float(np.sum(w * py))
            vx = float(np.sum(w * (px - mx) ** 2))
            vy = float(np.sum(w * (py - my) ** 2))
            cxy = float(np.sum(w * (px - mx) * (py - my)))
            out[i, j] = ((2 * mx * my + c1) * (2 * cxy + c2)) / (
                (mx * mx + my * my + c1) * (vx + vy + c2))
    return out


def reference_kcpx_writer(path, data, domain):
    """Stand-alone KCPX writer built from the format description."""
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"KCPX1\n{h}\n{w}\n{domain}\n".encode("ascii"))
        for i in range(h):
            for j in range(w):
                v = complex(data[i, j])
                fh.write(struct.pack("<dd", v.real, v.imag))


def reference_pgm_reader(path):
    """Minimal P5 reader: four header tokens, one whitespace byte, payload."""
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    payload = raw[pos + 1:]
    assert tokens[0] == b"P5"
    w, h, maxval = (int(t) for t in tokens[1:])
    vals = struct.unpack(f">{w * h}H", payload)
    return np.array(vals, dtype=np.int64).reshape(h, w), maxval
