import math
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from astrosparse.blockcodec import (
    BlockDecomposition,
    ConvergenceError,
    FormatError,
    dct_baseline,
    dct_threshold,
    decode,
    deserialize,
    encode,
    partition,
    rho_for_psnr,
    serialize,
)
from astrosparse.dictionary import build_rdc
from astrosparse.imageio import synth_starfield
from astrosparse.metrics import psnr, sparsity_ratio
from astrosparse.pursuit2d import Decomposition2D


@pytest.fixture(scope="module")
def field256():
    return synth_starfield(256, 256, 700, 0)


def test_partition_examples():
    g = partition((32, 32), 16)
    assert len(g) == 4 and all(r[2:] == (16, 16) for r in g.rects)
    g = partition((40, 32), 16)
    sizes = sorted(r[2:] for r in g.rects)
    assert sizes == [(8, 16), (8, 16), (16, 16), (16, 16), (16, 16), (16, 16)]
    g = partition(np.zeros((8, 8)), 16)
    assert g.rects == ((0, 0, 8, 8),)
    with pytest.raises(ValueError):
        partition((8, 8), 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 70), st.integers(1, 70), st.integers(1, 40))
def test_partition_tiles_exactly(nx, ny, nh):
    cover = np.zeros((nx, ny), dtype=int)
    for r, c, h, w in partition((nx, ny), nh).rects:
        cover[r:r + h, c:c + w] += 1
    assert np.all(cover == 1)


def test_rho_for_psnr():
    assert abs(rho_for_psnr(45, 1, 1) - 255 * 10 ** -2.25) < 1e-12
    assert abs(rho_for_psnr(45, 1, 1) - 1.43397) < 1e-5
    # 20 log10(255) dB is an RMS error of exactly one grey level
    assert abs(rho_for_psnr(20 * math.log10(255), 10, 7) - math.sqrt(70)) < 1e-9
    vals = [rho_for_psnr(t, 4, 4) for t in (10, 30, 50, 90)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        rho_for_psnr(0, 4, 4)


@pytest.mark.parametrize("method", ["omp2d", "spmp2d", "mp2d"])
def test_constant_image_one_atom_per_block(method):
    I = np.full((48, 40), 128.0)
    dec = encode(I, "mixed", method, 16, 45.0)
    assert [b.K for b in dec.blocks] == [1] * len(dec.blocks)
    assert all(b.pairs.tolist() == [[0, 0]] for b in dec.blocks)
    full = encode(np.full((32, 32), 128.0), "mixed", method, 16)
    assert sparsity_ratio(full) == 256


def test_zero_image():
    dec = encode(np.zeros((32, 32)), "mixed", "omp2d", 16)
    assert dec.total_atoms == 0
    assert psnr(np.zeros((32, 32)), decode(dec)) == math.inf
    assert sparsity_ratio(dec) == math.inf


def test_encode_psnr_window(field256):
    dec = encode(field256, "mixed", "omp2d", 16, 45.0)
    p = psnr(field256, decode(dec))
    assert 45.0 <= p <= 45.6


@pytest.mark.parametrize("spec", ["rdc", "rdw", "rr:3"])
def test_other_dictionaries_meet_target(spec):
    I = synth_starfield(48, 48, 20, 1)
    dec = encode(I, spec, "omp2d", 16, 40.0)
    assert psnr(I, decode(dec)) >= 40.0


def test_edge_blocks_and_decode_determinism():
    I = synth_starfield(45, 37, 15, 2)
    dec = encode(I, "mixed", "omp2d", 16, 45.0)
    assert psnr(I, decode(dec)) >= 45.0
    assert decode(dec).tobytes() == decode(dec).tobytes()


def test_threads_do_not_change_result():
    I = synth_starfield(64, 64, 40, 3)
    a = encode(I, "mixed", "spmp2d", 16, 45.0, threads=1)
    b = encode(I, "mixed", "spmp2d", 16, 45.0, threads=4)
    assert serialize(a) == serialize(b)


def test_convergence_error_reports_block():
    I = synth_starfield(32, 32, 20, 4)
    with pytest.raises(ConvergenceError) as exc:
        encode(I, "mixed", "mp2d", 16, 45.0, cap=1)
    assert exc.value.block == (0, 0)
    assert "row=0, col=0" in str(exc.value)


def test_encode_rejects_unknown():
    with pytest.raises(ValueError):
        encode(np.ones((8, 8)), "mixed", "lasso")
    with pytest.raises(ValueError):
        encode(np.ones((8, 8)), "nope", "omp2d")


def test_decode_empty_and_bad_spec():
    g = partition((16, 16), 8)
    empty = BlockDecomposition(g, [Decomposition2D.empty()] * 4, "mixed", 45.0, "omp2d")
    assert not decode(empty).any()
    bad = BlockDecomposition(g, [Decomposition2D.empty()] * 4, "fourier", 45.0, "omp2d")
    with pytest.raises(ValueError):
        decode(bad)


# ---------------------------------------------------------------- baseline


def test_dct_constant_and_cosine():
    dec = dct_threshold(np.full((32, 48), 77.0), 16, 45.0)
    assert [b.K for b in dec.blocks] == [1] * 6
    D = build_rdc(16, 16)
    tile = 90 * np.outer(D.atom(2), D.atom(5))
    I = np.tile(tile, (2, 2))
    dec = dct_threshold(I, 16, 45.0)
    assert [b.K for b in dec.blocks] == [1] * 4
    assert psnr(I, decode(dec)) > 200  # exact up to rounding


def test_dct_threshold_is_minimal(field256):
    dec = dct_threshold(field256, 16, 45.0)
    assert psnr(field256, decode(dec)) >= 45.0
    # dropping the smallest kept coefficient breaks the target
    b, j = min(((b, int(np.argmin(np.abs(b.coefficients)))) for b in dec.blocks if b.K),
               key=lambda t: abs(t[0].coefficients[t[1]]))
    b.coefficients[j] = 0.0
    assert psnr(field256, decode(dec)) < 45.0


def test_dct_smooth_image_compacts():
    I = synth_starfield(256, 256, 0, 5)
    assert dct_threshold(I, 16, 45.0).total_atoms < 0.03 * I.size


def test_dct_baseline_below_mixed(field256):
    base = dct_baseline(field256, 16, 45.0)
    mixed = encode(field256, "mixed", "omp2d", 16, 45.0)
    assert base.psnr_db >= 45.0 and base.sr < sparsity_ratio(mixed)


# ------------------------------------------------------------ file format


def random_decomposition(rng) -> BlockDecomposition:
    nx, ny, nh = (int(v) for v in rng.integers(1, 40, 3))
    grid = partition((nx, ny), nh)
    blocks = []
    for _ in grid.rects:
        k = int(rng.integers(0, 6))
        pairs = rng.integers(0, 2**32 - 1, (k, 2), dtype=np.uint64).astype(np.int64)
        blocks.append(Decomposition2D(pairs, rng.standard_normal(k) * 10 ** rng.uniform(-5, 5)))
    spec = str(rng.choice(["mixed", "rdc", "rdw", "dct", f"rr:{rng.integers(0, 1000)}"]))
    method = str(rng.choice(["dct-threshold", "mp2d", "omp2d", "spmp2d"]))
    return BlockDecomposition(grid, blocks, spec, float(rng.uniform(20, 60)), method)


def test_round_trip_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        dec = random_decomposition(rng)
        assert deserialize(serialize(dec)).same_record(dec)


def test_round_trip_encoded(field256):
    dec = encode(field256[:64, :64], "mixed", "omp2d", 16, 45.0)
    back = deserialize(serialize(dec))
    assert back.same_record(dec)
    assert decode(back).tobytes() == decode(dec).tobytes()


def test_empty_blocks_round_trip():
    g = partition((16, 16), 8)
    dec = BlockDecomposition(g, [Decomposition2D.empty()] * 4, "mixed", 45.0, "omp2d")
    data = serialize(dec)
    assert deserialize(data).same_record(dec)
    assert data.count(struct.pack("<I", 0)) >= 4


def test_layout():
    g = partition((16, 16), 16)
    dec = BlockDecomposition(g, [Decomposition2D(np.array([[1, 2]]), np.array([0.5]))],
                             "mixed", 45.0, "spmp2d")
    data = serialize(dec)
    assert data[:4] == b"SPD1"
    assert struct.unpack_from("<HHIIHB", data, 4) == (1, 0, 16, 16, 16, 3)
    assert struct.unpack_from("<H", data, 19)[0] == 5 and data[21:26] == b"mixed"
    assert struct.unpack_from("<dII", data, 26) == (45.0, 1, 1)
    assert struct.unpack_from("<IId", data, 42) == (1, 2, 0.5)
    assert struct.unpack_from("<I", data, 58)[0] == zlib.crc32(data[:58])
    assert len(data) == 62


def test_corruption_detected():
    rng = np.random.default_rng(1)
    data = serialize(random_decomposition(rng))
    for pos in range(len(data)):
        bad = bytearray(data)
        bad[pos] ^= 0xFF
        with pytest.raises(FormatError):
            deserialize(bytes(bad))


def test_format_errors_carry_offsets():
    g = partition((8, 8), 8)
    data = serialize(BlockDecomposition(g, [Decomposition2D.empty()], "mixed", 45.0, "mp2d"))
    with pytest.raises(FormatError) as e:
        deserialize(b"XXXX" + data[4:])
    assert e.value.offset == 0
    with pytest.raises(FormatError):
        deserialize(data[:10])
    with pytest.raises(FormatError):
        deserialize(data[:-6] + struct.pack("<I", zlib.crc32(data[:-6])))
    # version 2 with a valid checksum
    body = bytearray(data[:-4])
    body[4] = 2
    with pytest.raises(FormatError) as e:
        deserialize(bytes(body) + struct.pack("<I", zlib.crc32(bytes(body))))
    assert e.value.offset == 4
