"""Minimal grayscale PGM reader/writer (binary P5 and ASCII P2).

Pixel values are mapped to ``[0, 1]`` as ``value / maxval`` on read and
written as ``round(255 * clip(v, 0, 1))`` with ``maxval = 255``.
"""

import numpy as np

from fbfep.errors import DimensionError, ParameterError


class PGMError(ParameterError):
    """Malformed or unsupported PGM file."""


def _tokens(data, count, pos):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def read_pgm(path):
    """Return a ``(M, N)`` float64 array with values in ``[0, 1]``."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic in (b"P3", b"P6"):
        raise PGMError("color images are not supported; convert to grayscale PGM")
    if magic not in (b"P2", b"P5"):
        raise PGMError(f"not a PGM file (magic {magic!r})")
    (w, h, maxval), pos = _tokens(data, 3, 2)
    try:
        N, M, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise PGMError("non-integer PGM header field") from None
    if N < 1 or M < 1 or not 0 < maxval < 65536:
        raise PGMError(f"bad PGM header: {N}x{M}, maxval {maxval}")
    if magic == b"P5":
        pos += 1  # exactly one whitespace byte before the raster
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raster = np.frombuffer(data, dtype=dtype, count=M * N, offset=pos) if len(data) - pos >= M * N * dtype.itemsize else None
        if raster is None:
            raise PGMError("truncated P5 raster")
    else:
        vals, _ = _tokens(data, M * N, pos)
        raster = np.array([int(v) for v in vals], dtype=np.int64)
    if raster.max(initial=0) > maxval:
        raise PGMError("pixel value exceeds maxval")
    return raster.reshape(M, N).astype(np.float64) / maxval


def to_bytes(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"expected a 2-D image, got shape {img.shape}")
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pgm(path, img, binary=True):
    """Write ``img`` (values in ``[0, 1]``) as P5 (default) or P2."""
    raster = to_bytes(img)
    M, N = raster.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{N} {M}\n255\n".encode("ascii"))
            fh.write(raster.tobytes())
        else:
            fh.write(f"P2\n{N} {M}\n255\n".encode("ascii"))
            for row in raster:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode("ascii"))
