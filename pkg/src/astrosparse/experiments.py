"""Chirp experiment and the block-size benchmark harness."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .blockcodec import ConvergenceError, dct_threshold, encode, partition, quality_report
from .dictionary import build_rdc, dictionary_from_spec
from .imageio import synth_starfield
from .metrics import QualityReport
from .pursuit1d import chirp_signal, mp, omp, spmp

__all__ = [
    "ChirpRow",
    "run_chirp",
    "corpus",
    "default_method",
    "parse_method",
    "method_label",
    "run_cell",
    "failed_row",
    "ConvergenceError",
    "CHIRP_EPS_REL",
    "CORPUS_STAR_DENSITY",
]

CHIRP_N = 2000
CHIRP_REL_TOL = 1e-3
# self-projection tolerance for the chirp runs, relative to ||f||
CHIRP_EPS_REL = 1e-6

# synthetic corpus: star density giving realistic per-block statistics
CORPUS_STAR_DENSITY = 700 / 256**2


@dataclass
class ChirpRow:
    config: str
    method: str
    M: int
    p: int
    K: int
    residual: float
    iterations: int
    seconds: float
    band: tuple[int, int] | None = None

    @property
    def in_band(self) -> bool | None:
        if self.band is None:
            return None
        return self.band[0] <= self.K <= self.band[1]


def run_chirp(rho_scale: float = 1.0, eps_rel: float = CHIRP_EPS_REL,
              N: int = CHIRP_N) -> list[ChirpRow]:
    """The five chirp configurations; acceptance bands only apply at rho_scale 1."""
    f = chirp_signal(N)
    fnorm = float(np.linalg.norm(f))
    rho = CHIRP_REL_TOL * fnorm * rho_scale
    eps = eps_rel * fnorm
    basis = build_rdc(N, N)
    redundant = build_rdc(N, 2 * N)
    runs = [
        ("dc-basis", "omp", basis, 1, lambda: omp(f, basis, rho)),
        ("rdc-2n", "omp", redundant, 1, lambda: omp(f, redundant, rho)),
        ("rdc-2n", "mp", redundant, 1, lambda: mp(f, redundant, rho)),
        ("rdc-2n", "spmp", redundant, 3, lambda: spmp(f, redundant, rho, eps, p=3)),
        ("rdc-2n", "spmp", redundant, 10, lambda: spmp(f, redundant, rho, eps, p=10)),
    ]
    rows = []
    for config, method, D, p, fn in runs:
        t0 = time.perf_counter()
        dec = fn()
        rows.append(ChirpRow(config, method, D.M, p, dec.K, dec.residual_norm,
                             dec.iterations, time.perf_counter() - t0))
    if rho_scale == 1.0 and N == CHIRP_N:
        omp_k = rows[1].K
        bands = [(678, 688), (272, 300), (1556, 1720), (omp_k - 5, omp_k + 5), (285, 315)]
        for row, band in zip(rows, bands):
            row.band = band
    return rows


def corpus(n_images: int, size: int = 256, seed0: int = 0):
    """Synthetic star-field test images, yielded as (name, image)."""
    n_stars = int(round(CORPUS_STAR_DENSITY * size * size))
    for i in range(n_images):
        yield f"synth{size}_{seed0 + i}", synth_starfield(size, size, n_stars, seed0 + i)


def default_method(Nh: int) -> tuple[str, int]:
    return ("omp2d", 1) if Nh <= 24 else ("spmp2d", 1)


def parse_method(token: str) -> tuple[str, int]:
    """'omp2d', 'mp2d', 'spmp2d' or 'spmp2d:<p>', or 'dct'."""
    name, _, arg = token.strip().lower().partition(":")
    if name not in ("mp2d", "omp2d", "spmp2d", "dct"):
        raise ValueError(f"unknown method {token!r}")
    p = int(arg) if arg else 1
    if arg and name != "spmp2d":
        raise ValueError(f"method {name!r} takes no projection step")
    return name, p


def method_label(name: str, p: int) -> str:
    return f"spmp2d:{p}" if name == "spmp2d" else name


def _warm_dictionaries(spec: str, shape, Nh: int) -> None:
    for _, _, h, w in partition(shape, Nh).rects:
        for n in (h, w):
            D = dictionary_from_spec(spec, n)
            D.gram  # noqa: B018  (cached)


def run_cell(image, name: str, spec: str, method: str, p: int, Nh: int,
             target_db: float = 45.0, repeats: int = 1, threads: int = 1,
             eps: float | None = None) -> QualityReport:
    """One benchmark cell; seconds is the mean over ``repeats`` runs and
    excludes dictionary construction."""
    if method == "dct":
        spec = "dct"
    _warm_dictionaries(spec, image.shape, Nh)
    times = []
    dec = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        if method == "dct":
            dec = dct_threshold(image, Nh, target_db)
        else:
            dec = encode(image, spec, method, Nh, target_db, eps=eps, p=p,
                         threads=threads)
        times.append(time.perf_counter() - t0)
    rep = quality_report(image, dec, float(np.mean(times)), name)
    rep.method = method_label(method, p) if method != "dct" else "dct"
    return rep


def failed_row(name, spec, method, p, Nh) -> list[str]:
    return [name, spec, method_label(method, p), str(Nh)] + ["NA"] * 5
