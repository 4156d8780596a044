"""PGM reading/writing, luma conversion and synthetic star-field images."""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

__all__ = [
    "PGMFormatError",
    "load_pgm",
    "read_pgm",
    "dump_pgm",
    "write_pgm",
    "load_image",
    "rgb_to_gray",
    "synth_starfield",
]


class PGMFormatError(ValueError):
    pass


_TOKEN = re.compile(rb"#[^\n\r]*|\S+")


def _header(data: bytes):
    """Return (magic, width, height, maxval, raster offset)."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = _TOKEN.search(data, pos)
        if m is None:
            raise PGMFormatError("truncated PGM header")
        pos = m.end()
        if m.group().startswith(b"#"):
            continue
        tokens.append(m.group())
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise PGMFormatError(f"bad magic {magic[:2]!r}, expected P2 or P5")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PGMFormatError("non-integer PGM header field") from None
    if width < 1 or height < 1:
        raise PGMFormatError("PGM dimensions must be positive")
    if not 0 < maxval <= 255:
        raise PGMFormatError(f"maxval {maxval} unsupported (must be 1..255)")
    # exactly one whitespace byte separates the header from a binary raster
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        if magic == b"P5":
            raise PGMFormatError("missing whitespace after PGM header")
    return magic, width, height, maxval, pos + 1


def load_pgm(data: bytes) -> np.ndarray:
    """Decode P5 (binary) or P2 (ASCII) PGM bytes into a float64 (rows, cols) array."""
    magic, width, height, maxval, off = _header(data)
    n = width * height
    if magic == b"P5":
        raster = data[off:off + n]
        if len(raster) < n:
            raise PGMFormatError(f"truncated raster: {len(raster)} of {n} bytes")
        pix = np.frombuffer(raster, dtype=np.uint8)
    else:
        body = re.sub(rb"#[^\n\r]*", b" ", data[off - 1:])
        vals = body.split()
        if len(vals) < n:
            raise PGMFormatError(f"truncated raster: {len(vals)} of {n} samples")
        try:
            pix = np.array([int(v) for v in vals[:n]])
        except ValueError:
            raise PGMFormatError("non-integer sample in P2 raster") from None
    if pix.max(initial=0) > maxval:
        raise PGMFormatError("sample exceeds maxval")
    return pix.reshape(height, width).astype(np.float64)


def read_pgm(path) -> np.ndarray:
    return load_pgm(Path(path).read_bytes())


def dump_pgm(image, maxval: int = 255) -> bytes:
    """Encode as binary P5; values are rounded and clamped to [0, maxval]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM images are 2D")
    raster = np.clip(np.rint(img), 0, maxval).astype(np.uint8)
    h, w = raster.shape
    return b"P5\n%d %d\n%d\n" % (w, h, maxval) + raster.tobytes()


def write_pgm(path, image) -> None:
    Path(path).write_bytes(dump_pgm(image))


def rgb_to_gray(r, g, b) -> np.ndarray:
    """BT.601 luma, unrounded."""
    r, g, b = (np.asarray(c, dtype=np.float64) for c in (r, g, b))
    if not r.shape == g.shape == b.shape:
        raise ValueError("colour planes differ in shape")
    return 0.299 * r + 0.587 * g + 0.114 * b


def load_image(path) -> np.ndarray:
    """Read a grayscale image; PGM natively, other formats through Pillow."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P2", b"P5"):
        return load_pgm(data)
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "I;8"):
            return np.asarray(im, dtype=np.float64)
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    return rgb_to_gray(rgb[..., 0], rgb[..., 1], rgb[..., 2])


def synth_starfield(Nx: int, Ny: int, n_stars: int, seed: int) -> np.ndarray:
    """Smooth cosine background plus Gaussian point sources, clamped to [0, 255].

    The background is a constant level plus up to four broad 2D cosine modes
    whose amplitudes never exceed it, so it stays non-negative.
    """
    if n_stars < 0:
        raise ValueError("n_stars must be >= 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    x = np.arange(Nx)[:, None] + 0.5
    y = np.arange(Ny)[None, :] + 0.5
    level = rng.uniform(20.0, 30.0)
    img = np.full((Nx, Ny), level)
    n_modes = int(rng.integers(2, 5))
    amps = rng.uniform(0.2, 1.0, n_modes)
    amps *= level / amps.sum()
    for a in amps:
        fx, fy = rng.uniform(0.0, 1.5, 2)
        px, py = rng.uniform(0, 2 * np.pi, 2)
        img += a * np.cos(np.pi * fx * x / Nx + px) * np.cos(np.pi * fy * y / Ny + py)
    cx = rng.uniform(0, Nx, n_stars)
    cy = rng.uniform(0, Ny, n_stars)
    sig = rng.uniform(0.7, 2.5, n_stars)
    peak = rng.uniform(50.0, 195.0, n_stars)
    for i in range(n_stars):
        r = int(np.ceil(5 * sig[i]))
        x0, x1 = max(int(cx[i]) - r, 0), min(int(cx[i]) + r + 1, Nx)
        y0, y1 = max(int(cy[i]) - r, 0), min(int(cy[i]) + r + 1, Ny)
        dx = np.arange(x0, x1)[:, None] + 0.5 - cx[i]
        dy = np.arange(y0, y1)[None, :] + 0.5 - cy[i]
        img[x0:x1, y0:y1] += peak[i] * np.exp(-(dx**2 + dy**2) / (2 * sig[i] ** 2))
    return np.clip(img, 0.0, 255.0)
