"""File formats: KCPX complex grids, binary 16-bit PGM, atomic writes."""

import os
import tempfile

import numpy as np

from ..core import ValidationError

KCPX_MAGIC = b"KCPX1"
KCPX_DOMAINS = ("image", "kspace")
MAX_KCPX_SIDE = 1 << 16


class KcpxParseError(ValidationError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def atomic_write(path, data):
    """Write bytes or text to ``path`` via a temp file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def kcpx_bytes(x, domain):
    if domain not in KCPX_DOMAINS:
        raise ValidationError(f"domain must be one of {KCPX_DOMAINS}, got {domain!r}")
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise ValidationError("KCPX payload must be 2D")
    h, w = arr.shape
    header = b"%s\n%d\n%d\n%s\n" % (KCPX_MAGIC, h, w, domain.encode())
    return header + np.ascontiguousarray(arr, dtype="<c16").tobytes()


def export_kcpx(x, path, domain):
    atomic_write(path, kcpx_bytes(x, domain))


def parse_kcpx(buf):
    """Parse KCPX bytes into ``(array, domain)``."""
    pos = 0
    fields = []
    for name in ("magic", "height", "width", "domain"):
        end = buf.find(b"\n", pos)
        if end < 0 or end - pos > 32:
            raise KcpxParseError(f"unterminated {name} header line", pos)
        fields.append((buf[pos:end], pos))
        pos = end + 1
    (magic, _), (hs, hoff), (ws, woff), (dom, doff) = fields
    if magic != KCPX_MAGIC:
        raise KcpxParseError(f"bad magic {magic!r}, expected {KCPX_MAGIC!r}", 0)
    dims = []
    for raw, off in ((hs, hoff), (ws, woff)):
        if not raw.isdigit():
            raise KcpxParseError(f"dimension {raw!r} is not a positive integer", off)
        v = int(raw)
        if v < 1:
            raise KcpxParseError("dimension must be positive", off)
        if v > MAX_KCPX_SIDE:
            raise KcpxParseError(f"dimension overflow: {v} > {MAX_KCPX_SIDE}", off)
        dims.append(v)
    domain = dom.decode("ascii", errors="replace")
    if domain not in KCPX_DOMAINS:
        raise KcpxParseError(f"unknown domain {domain!r}", doff)
    h, w = dims
    need = 16 * h * w
    have = len(buf) - pos
    if have < need:
        raise KcpxParseError(f"truncated payload: expected {need} bytes, found {have}", pos + have)
    if have > need:
        raise KcpxParseError(f"{have - need} trailing bytes after payload", pos + need)
    arr = np.frombuffer(buf, dtype="<c16", count=h * w, offset=pos).reshape(h, w)
    return arr.astype(np.complex128), domain


def import_kcpx(path):
    with open(path, "rb") as fh:
        return parse_kcpx(fh.read())


def pgm_bytes(img):
    x = np.asarray(img, dtype=np.float64)
    if x.ndim != 2 or not np.all(np.isfinite(x)):
        raise ValidationError("PGM export needs a finite 2D image")
    q = np.floor(np.clip(x, 0.0, 1.0) * 65535 + 0.5).astype(">u2")
    h, w = x.shape
    return b"P5 %d %d 65535\n" % (w, h) + q.tobytes()


def export_pgm(img, path):
    """Write a normalized image as binary 16-bit PGM."""
    atomic_write(path, pgm_bytes(img))


def _pgm_tokens(buf, count):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            pos = buf.index(b"\n", pos)
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValidationError("truncated PGM header")
        tokens.append(buf[start:pos])
    return tokens, pos + 1


def import_pgm(path):
    """Read a binary PGM; returns values scaled to [0, 1]."""
    with open(path, "rb") as fh:
        buf = fh.read()
    (magic, w, h, maxval), pos = _pgm_tokens(buf, 4)
    if magic != b"P5":
        raise ValidationError(f"{path}: not a binary PGM")
    w, h, maxval = int(w), int(h), int(maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    data = np.frombuffer(buf, dtype=dtype, count=w * h, offset=pos).reshape(h, w)
    return data.astype(np.float64) / maxval
