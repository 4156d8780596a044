"""Acceptance criteria, one test and one PASS/FAIL line each.

The lines are also collected into an "acceptance criteria" section of the
pytest terminal summary.
"""
import os
import time

import numpy as np
import pytest

from astrosparse.blockcodec import (
    BlockDecomposition,
    dct_threshold,
    decode,
    deserialize,
    encode,
    partition,
    serialize,
    FormatError,
)
from astrosparse.dictionary import Dictionary1D, build_mixed
from astrosparse.experiments import corpus, run_chirp
from astrosparse.metrics import mssim, psnr, sparsity_ratio
from astrosparse.pursuit1d import chirp_signal, mp
from astrosparse.dictionary import build_rdc
from astrosparse.pursuit2d import Decomposition2D, omp2d

from oracles import kronecker_omp

TARGET_DB = 45.0
MAX_THREADS = max(os.cpu_count() or 1, 8)


@pytest.fixture(scope="module")
def chirp_rows():
    return {(r.method, r.M, r.p): r for r in run_chirp()}


@pytest.fixture(scope="module")
def corpus256():
    return list(corpus(10, 256))


@pytest.fixture(scope="module")
def omp16(corpus256):
    return [encode(I, "mixed", "omp2d", 16, TARGET_DB) for _, I in corpus256]


# ------------------------------------------------------------------ chirp


def test_c01_chirp_orthonormal(chirp_rows, criterion):
    r = chirp_rows[("omp", 2000, 1)]
    criterion(1, "chirp OMP, orthonormal DC basis: K = 683 +/- 5, < 5 s",
              678 <= r.K <= 688 and r.seconds < 5, f"K={r.K}, {r.seconds:.2f} s")


def test_c02_chirp_redundant_omp(chirp_rows, criterion):
    r = chirp_rows[("omp", 4000, 1)]
    criterion(2, "chirp OMP, RDC M=4000: K in [272, 300], < 60 s",
              272 <= r.K <= 300 and r.seconds < 60, f"K={r.K}, {r.seconds:.2f} s")


def test_c03_chirp_mp(chirp_rows, criterion):
    r = chirp_rows[("mp", 4000, 1)]
    criterion(3, "chirp MP, RDC M=4000: distinct K in [1556, 1720]",
              1556 <= r.K <= 1720, f"K={r.K}")


def test_c04_chirp_spmp(chirp_rows, criterion):
    k_omp = chirp_rows[("omp", 4000, 1)].K
    k3 = chirp_rows[("spmp", 4000, 3)].K
    k10 = chirp_rows[("spmp", 4000, 10)].K
    criterion(4, "chirp SPMP: p=3 within 5 of OMP's K, p=10 in [285, 315]",
              abs(k3 - k_omp) <= 5 and 285 <= k10 <= 315,
              f"OMP K={k_omp}, p=3 K={k3}, p=10 K={k10}")


# ------------------------------------------------------------- 2D pursuit


def test_c05_kronecker_oracle(criterion):
    rng = np.random.default_rng(2024)
    worst, mismatched = 0.0, 0
    t0 = time.perf_counter()
    for _ in range(100):
        mats = []
        for _axis in range(2):
            A = rng.standard_normal((4, int(rng.integers(4, 9))))
            mats.append(Dictionary1D(A / np.linalg.norm(A, axis=0), ("r",) * A.shape[1]))
        Dx, Dy = mats
        I = rng.standard_normal((4, 4))
        rho = 1e-3 * np.linalg.norm(I)
        pairs, coef = kronecker_omp(I, Dx.matrix, Dy.matrix, rho)
        dec = omp2d(I, Dx, Dy, rho)
        if [tuple(p) for p in dec.pairs.tolist()] != pairs:
            mismatched += 1
            continue
        worst = max(worst, float(np.max(np.abs(dec.coefficients - coef))))
    secs = time.perf_counter() - t0
    criterion(5, "omp2d == 1D OMP over explicit Kronecker dictionary, 100 trials, 1e-8, < 10 s",
              mismatched == 0 and worst < 1e-8 and secs < 10,
              f"pair mismatches={mismatched}, max coef diff={worst:.2e}, {secs:.2f} s")


def test_c06_biorthogonality(criterion):
    rng = np.random.default_rng(6)
    D = build_mixed(16)
    worst, steps = 0.0, 0

    def check(state, coef, R):
        nonlocal worst, steps
        A = state.atom_matrices(D, D)
        G = A @ state.B[: state.k].T
        worst = max(worst, float(np.max(np.abs(G - np.eye(state.k)))))
        steps += 1

    for _ in range(20):
        I = rng.uniform(0, 255, (16, 16))
        omp2d(I, D, D, 1e-9, cap=20, callback=check)
    criterion(6, "biorthogonality |<A_n, B_m> - delta_nm| < 1e-8 at every step k <= 20",
              worst < 1e-8 and steps == 400, f"max deviation={worst:.2e} over {steps} steps")


def test_c07_energy_conservation(corpus256, criterion):
    worst, steps = 0.0, 0

    def scan(history, values):
        nonlocal worst, steps
        h = np.asarray(history)
        a = np.asarray(values)
        if a.size:
            rel = np.abs(h[:-1] ** 2 - h[1:] ** 2 - a**2) / h[:-1] ** 2
            worst = max(worst, float(rel.max()))
            steps += a.size

    f = chirp_signal(2000)
    dec = mp(f, build_rdc(2000, 4000), 1e-3 * np.linalg.norm(f))
    scan(dec.history, dec.steps)
    for _, I in corpus256:
        for b in encode(I, "mixed", "mp2d", 16, TARGET_DB).blocks:
            scan(b.history, b.steps)
    criterion(7, "MP/MP2D energy identity within 1e-10 relative, chirp + corpus",
              worst < 1e-10, f"max rel error={worst:.2e} over {steps} steps")


def test_c08_spmp2d_parity(criterion):
    ok, details = True, []
    for name, I in corpus(10, 64):
        a = encode(I, "mixed", "omp2d", 16, TARGET_DB)
        b = encode(I, "mixed", "spmp2d", 16, TARGET_DB, p=1)
        pa, pb = psnr(I, decode(a)), psnr(I, decode(b))
        diff = abs(a.total_atoms - b.total_atoms) / a.total_atoms
        ok &= diff <= 0.02 and pa >= TARGET_DB and pb >= TARGET_DB
        details.append(f"{a.total_atoms}/{b.total_atoms}")
    criterion(8, "SPMP2D(p=1) vs OMP2D atoms within 2%, both PSNR >= 45 (10 x 64x64)",
              ok, "omp/spmp atoms " + " ".join(details))


# ------------------------------------------------------------ whole images


def test_c09_sparsity_vs_dct(corpus256, omp16, criterion):
    ratios = []
    for (_, I), dec in zip(corpus256, omp16):
        base = dct_threshold(I, 16, TARGET_DB)
        ratios.append(sparsity_ratio(dec) / sparsity_ratio(base))
    mean = float(np.mean(ratios))
    criterion(9, "SR(mixed OMP2D) > SR(DCT) on every image, mean ratio >= 1.5",
              min(ratios) > 1.0 and mean >= 1.5,
              f"min ratio={min(ratios):.3f}, mean ratio={mean:.3f}")


def test_c10_block_size_trend(corpus256, omp16, criterion):
    sr16 = float(np.mean([sparsity_ratio(d) for d in omp16]))
    sr8 = float(np.mean([sparsity_ratio(encode(I, "mixed", "omp2d", 8, TARGET_DB))
                         for _, I in corpus256]))
    criterion(10, "mean SR(block 16) > mean SR(block 8)", sr16 > sr8,
              f"SR8={sr8:.3f}, SR16={sr16:.3f}")


def test_c11_mssim(corpus256, omp16, criterion):
    vals = [mssim(I, decode(d)) for (_, I), d in zip(corpus256, omp16)]
    psnrs = [psnr(I, decode(d)) for (_, I), d in zip(corpus256, omp16)]
    criterion(11, "MSSIM > 0.98 for every 45 dB encode",
              min(vals) > 0.98 and min(psnrs) >= TARGET_DB,
              f"min MSSIM={min(vals):.5f}, min PSNR={min(psnrs):.3f}")


def test_c12_thread_determinism(corpus256, omp16, criterion):
    same = 0
    for (_, I), single in zip(corpus256, omp16):
        multi = encode(I, "mixed", "omp2d", 16, TARGET_DB, threads=MAX_THREADS)
        same += serialize(single) == serialize(multi)
    criterion(12, f"byte-identical files with 1 and {MAX_THREADS} threads",
              same == len(corpus256), f"{same}/{len(corpus256)} identical")


# ------------------------------------------------------------ file format


def _random_decomposition(rng):
    nx, ny, nh = (int(v) for v in rng.integers(1, 48, 3))
    grid = partition((nx, ny), nh)
    blocks = []
    for _ in grid.rects:
        k = int(rng.integers(0, 8))
        pairs = rng.integers(0, 2**32, (k, 2), dtype=np.uint64).astype(np.int64)
        blocks.append(Decomposition2D(pairs, rng.standard_normal(k) * 10.0 ** rng.integers(-8, 8)))
    spec = str(rng.choice(["mixed", "rdc", "rdw", "dct", f"rr:{int(rng.integers(0, 10**6))}"]))
    method = str(rng.choice(["dct-threshold", "mp2d", "omp2d", "spmp2d"]))
    return BlockDecomposition(grid, blocks, spec, float(rng.uniform(1, 100)), method)


def test_c13_format(criterion):
    rng = np.random.default_rng(13)
    identity = detected = 0
    for _ in range(1000):
        dec = _random_decomposition(rng)
        data = serialize(dec)
        identity += deserialize(data).same_record(dec)
        bad = bytearray(data)
        pos = int(rng.integers(0, len(bad)))
        bad[pos] ^= int(rng.integers(1, 256))
        try:
            deserialize(bytes(bad))
        except FormatError:
            detected += 1
    criterion(13, "1000 round trips are the identity; every single-byte corruption detected",
              identity == 1000 and detected == 1000,
              f"identity {identity}/1000, detected {detected}/1000")
