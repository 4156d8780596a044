"""Block-wise approximation of whole images and the decomposition file format."""
from __future__ import annotations

import math
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dictionary import dictionary_from_spec, parse_dict_spec
from .metrics import mssim, psnr, sparsity_ratio, QualityReport
from .pursuit2d import Decomposition2D, mp2d, omp2d, reconstruct2d, spmp2d

__all__ = [
    "BlockGrid",
    "BlockDecomposition",
    "ConvergenceError",
    "FormatError",
    "METHOD_IDS",
    "partition",
    "rho_for_psnr",
    "encode",
    "decode",
    "serialize",
    "deserialize",
    "dct_threshold",
    "dct_baseline",
    "quality_report",
]

METHOD_IDS = {"dct-threshold": 0, "mp2d": 1, "omp2d": 2, "spmp2d": 3}
_METHOD_NAMES = {v: k for k, v in METHOD_IDS.items()}
MAGIC = b"SPD1"
VERSION = 1


class ConvergenceError(RuntimeError):
    def __init__(self, block: tuple[int, int], residual: float, rho: float):
        super().__init__(
            f"block at (row={block[0]}, col={block[1]}) did not converge: "
            f"residual {residual:.6g} >= tolerance {rho:.6g}"
        )
        self.block = block


class FormatError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class BlockGrid:
    Nx: int
    Ny: int
    Nh: int
    rects: tuple[tuple[int, int, int, int], ...]  # (row0, col0, h, w)

    def __len__(self):
        return len(self.rects)


def partition(shape, Nh: int) -> BlockGrid:
    """Row-major tiling into Nh x Nh blocks; trailing blocks are truncated.

    ``shape`` may be an image array or an (Nx, Ny) tuple. ``Nh`` larger than
    the image is clamped, giving a single block.
    """
    if hasattr(shape, "shape"):
        shape = shape.shape
    Nx, Ny = (int(s) for s in shape)
    if Nh < 1:
        raise ValueError(f"block side must be >= 1, got {Nh}")
    rects = tuple(
        (r, c, min(Nh, Nx - r), min(Nh, Ny - c))
        for r in range(0, Nx, Nh)
        for c in range(0, Ny, Nh)
    )
    return BlockGrid(Nx, Ny, int(Nh), rects)


def rho_for_psnr(target_db: float, Nx: int, Ny: int) -> float:
    """Frobenius residual norm at which PSNR (peak 255) equals ``target_db``."""
    if target_db <= 0:
        raise ValueError("target PSNR must be positive")
    return 255.0 * math.sqrt(Nx * Ny) * 10.0 ** (-target_db / 20.0)


@dataclass
class BlockDecomposition:
    grid: BlockGrid
    blocks: list[Decomposition2D]
    dict_spec: str
    target_db: float
    method: str
    config: dict = field(default_factory=dict)

    @property
    def total_atoms(self) -> int:
        return sum(b.K for b in self.blocks)

    @property
    def n_pixels(self) -> int:
        return sum(h * w for _, _, h, w in self.grid.rects)

    def same_record(self, other: "BlockDecomposition") -> bool:
        """Equality of everything the file format stores."""
        if (self.grid != other.grid or self.dict_spec != other.dict_spec
                or self.method != other.method or len(self.blocks) != len(other.blocks)):
            return False
        if struct.pack("<d", self.target_db) != struct.pack("<d", other.target_db):
            return False
        for a, b in zip(self.blocks, other.blocks):
            if not np.array_equal(np.asarray(a.pairs).reshape(-1, 2),
                                  np.asarray(b.pairs).reshape(-1, 2)):
                return False
            if np.asarray(a.coefficients, dtype="<f8").tobytes() != \
                    np.asarray(b.coefficients, dtype="<f8").tobytes():
                return False
        return True


# ------------------------------------------------------------------- encode


def _run_block(I_h, spec, method, rho_h, eps_rel, p, cap):
    h, w = I_h.shape
    Dx = dictionary_from_spec(spec, h)
    Dy = dictionary_from_spec(spec, w)
    if not np.any(I_h):
        return Decomposition2D.empty()
    if method == "omp2d":
        return omp2d(I_h, Dx, Dy, rho_h, cap=cap)
    if method == "mp2d":
        return mp2d(I_h, Dx, Dy, rho_h, cap=cap)
    eps = None if eps_rel is None else eps_rel * float(np.linalg.norm(I_h))
    return spmp2d(I_h, Dx, Dy, rho_h, eps=eps, p=p, cap=cap)


def encode(
    image,
    dict_spec: str = "mixed",
    method: str = "omp2d",
    Nh: int = 16,
    target_db: float = 45.0,
    *,
    eps: float | None = None,
    p: int = 1,
    cap: int | None = None,
    threads: int = 1,
) -> BlockDecomposition:
    """Approximate every block to a share of the global error budget.

    Each block h gets rho * sqrt(area_h / (Nx Ny)), so the assembled image has
    PSNR >= ``target_db``. ``eps`` is the self-projection tolerance of spmp2d
    relative to each block's norm. Blocks are independent; ``threads`` only
    changes scheduling, never the result.
    """
    if method not in ("mp2d", "omp2d", "spmp2d"):
        raise ValueError(f"unknown method {method!r}")
    parse_dict_spec(dict_spec)
    I = np.asarray(image, dtype=np.float64)
    grid = partition(I, Nh)
    rho = rho_for_psnr(target_db, grid.Nx, grid.Ny)
    npix = grid.Nx * grid.Ny

    def work(rect):
        r, c, h, w = rect
        rho_h = rho * math.sqrt(h * w / npix)
        dec = _run_block(I[r:r + h, c:c + w], dict_spec, method, rho_h, eps, p, cap)
        if not dec.converged:
            raise ConvergenceError((r, c), dec.residual_norm, rho_h)
        return dec

    if threads <= 1:
        blocks = [work(rect) for rect in grid.rects]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(work, grid.rects))
    config = {"rho": rho, "eps": eps, "p": p, "cap": cap}
    kind, seed = parse_dict_spec(dict_spec)
    if seed is not None:
        config["seed"] = seed
    return BlockDecomposition(grid, blocks, dict_spec, float(target_db), method, config)


def decode(dec: BlockDecomposition, clip: bool = False) -> np.ndarray:
    grid = dec.grid
    if len(dec.blocks) != len(grid.rects):
        raise ValueError("block list does not match the grid")
    try:
        parse_dict_spec(dec.dict_spec)
    except ValueError as exc:
        raise ValueError(f"cannot rebuild dictionary: {exc}") from None
    out = np.zeros((grid.Nx, grid.Ny))
    for (r, c, h, w), b in zip(grid.rects, dec.blocks):
        if b.K:
            Dx = dictionary_from_spec(dec.dict_spec, h)
            Dy = dictionary_from_spec(dec.dict_spec, w)
            out[r:r + h, c:c + w] = reconstruct2d(b, Dx, Dy)
    return np.clip(out, 0.0, 255.0) if clip else out


# --------------------------------------------------------------- baseline


def dct_threshold(image, Nh: int = 16, target_db: float = 45.0) -> BlockDecomposition:
    """Keep the largest orthonormal block-DCT coefficients, one global threshold.

    The threshold is the smallest coefficient magnitude that still meets the
    PSNR target (found exactly from the sorted energies).
    """
    I = np.asarray(image, dtype=np.float64)
    grid = partition(I, Nh)
    rho = rho_for_psnr(target_db, grid.Nx, grid.Ny)
    coefs = []
    for r, c, h, w in grid.rects:
        Dx = dictionary_from_spec("dct", h)
        Dy = dictionary_from_spec("dct", w)
        coefs.append(Dx.matrix.T @ I[r:r + h, c:c + w] @ Dy.matrix)
    flat = np.concatenate([C.ravel() for C in coefs]) if coefs else np.zeros(0)
    order = np.argsort(-np.abs(flat), kind="stable")
    energy = flat[order] ** 2
    # tail[k] = squared error when keeping the k largest coefficients
    tail = np.concatenate([np.cumsum(energy[::-1])[::-1], [0.0]])
    keep_n = int(np.argmax(tail < rho**2))
    keep = np.zeros(flat.size, dtype=bool)
    keep[order[:keep_n]] = True
    blocks = []
    start = 0
    for C in coefs:
        mask = keep[start:start + C.size].reshape(C.shape)
        start += C.size
        n, m = np.nonzero(mask)
        blocks.append(Decomposition2D(np.column_stack([n, m]).astype(np.int64),
                                      C[n, m].copy()))
    threshold = float(np.abs(flat[order[keep_n - 1]])) if keep_n else math.inf
    return BlockDecomposition(grid, blocks, "dct", float(target_db), "dct-threshold",
                              {"rho": rho, "threshold": threshold})


def quality_report(image, dec: BlockDecomposition, seconds: float = 0.0,
                   name: str = "") -> QualityReport:
    approx = decode(dec)
    I = np.asarray(image, dtype=np.float64)
    ms = mssim(I, approx) if min(I.shape) >= 11 else math.nan
    return QualityReport(
        psnr_db=psnr(I, approx),
        sr=sparsity_ratio(dec),
        mssim=ms,
        total_atoms=dec.total_atoms,
        wall_time_s=seconds,
        image=name,
        dict=dec.dict_spec,
        method=dec.method,
        block=dec.grid.Nh,
    )


def dct_baseline(image, Nh: int = 16, target_db: float = 45.0) -> QualityReport:
    return quality_report(image, dct_threshold(image, Nh, target_db))


# ------------------------------------------------------------ file format

_HEAD = struct.Struct("<4sHHIIHB")


def serialize(dec: BlockDecomposition) -> bytes:
    """Binary little-endian record terminated by a CRC-32 of all prior bytes."""
    spec = dec.dict_spec.encode("utf-8")
    g = dec.grid
    parts = [
        _HEAD.pack(MAGIC, VERSION, 0, g.Nx, g.Ny, g.Nh, METHOD_IDS[dec.method]),
        struct.pack("<H", len(spec)), spec,
        struct.pack("<dI", dec.target_db, len(dec.blocks)),
    ]
    rec = np.dtype([("x", "<u4"), ("y", "<u4"), ("c", "<f8")])
    for b in dec.blocks:
        pairs = np.asarray(b.pairs).reshape(-1, 2)
        arr = np.empty(len(pairs), dtype=rec)
        arr["x"], arr["y"] = pairs[:, 0], pairs[:, 1]
        arr["c"] = b.coefficients
        parts.append(struct.pack("<I", len(arr)))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def deserialize(data: bytes) -> BlockDecomposition:
    data = bytes(data)
    n = len(data)
    if n < 4 or data[:4] != MAGIC:
        raise FormatError("bad magic", 0)
    if n < _HEAD.size + 4:
        raise FormatError("truncated header", n)
    crc_stored = struct.unpack_from("<I", data, n - 4)[0]
    body = data[:-4]
    if zlib.crc32(body) != crc_stored:
        raise FormatError("CRC-32 mismatch", n - 4)
    _, version, _flags, Nx, Ny, Nh, mid = _HEAD.unpack_from(body, 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    pos = _HEAD.size

    def need(k):
        if pos + k > len(body):
            raise FormatError("truncated payload", pos)

    need(2)
    (slen,) = struct.unpack_from("<H", body, pos)
    pos += 2
    need(slen)
    try:
        spec = body[pos:pos + slen].decode("utf-8")
    except UnicodeDecodeError:
        raise FormatError("dictionary spec is not UTF-8", pos) from None
    pos += slen
    need(12)
    target, nblocks = struct.unpack_from("<dI", body, pos)
    pos += 12
    rec = np.dtype([("x", "<u4"), ("y", "<u4"), ("c", "<f8")])
    blocks = []
    for _ in range(nblocks):
        need(4)
        (k,) = struct.unpack_from("<I", body, pos)
        pos += 4
        need(k * rec.itemsize)
        arr = np.frombuffer(body, dtype=rec, count=k, offset=pos)
        pos += k * rec.itemsize
        pairs = np.column_stack([arr["x"], arr["y"]]).astype(np.int64).reshape(-1, 2)
        blocks.append(Decomposition2D(pairs, arr["c"].astype(np.float64)))
    if pos != len(body):
        raise FormatError("trailing bytes before checksum", pos)
    if mid not in _METHOD_NAMES:
        raise FormatError(f"unknown method id {mid}", 18)
    if Nh < 1:
        raise FormatError("block side must be positive", 16)
    grid = partition((Nx, Ny), Nh)
    if len(grid.rects) != nblocks:
        raise FormatError("block count does not match image and block size", _HEAD.size + 2 + slen + 8)
    return BlockDecomposition(grid, blocks, spec, target, _METHOD_NAMES[mid])
