"""Construction of 1D dictionaries from translated, cut-off prototypes.

A dictionary is stored column-wise: ``matrix[:, n]`` is atom ``n`` (unit norm).
2D dictionaries are never built; the pursuits use pairs of 1D dictionaries.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "Prototype",
    "Dictionary1D",
    "sample_prototype",
    "build_rdc",
    "build_euclidean",
    "build_rdbs_subdict",
    "build_mixed",
    "build_rdw",
    "build_rr",
    "haar_prototype",
    "mexican_hat_prototype",
    "dictionary_from_spec",
    "parse_dict_spec",
    "RDBS_FAMILIES",
    "RNG_ALGORITHM",
]

RNG_ALGORITHM = "numpy.random.PCG64"

SPLINE_FAMILIES = ("B2", "B4", "dB2", "dB4", "d2B4")
# (family, order, scale) for sub-dictionaries s = 2..9
RDBS_FAMILIES = {
    2: ("B2", 2, 1),
    3: ("B2", 2, 2),
    4: ("B2", 2, 3),
    5: ("dB2", 2, 2),
    6: ("dB2", 2, 3),
    7: ("B4", 4, 2),
    8: ("dB4", 4, 2),
    9: ("d2B4", 4, 2),
}
_DERIVATIVE_ORDER = {"B2": 0, "B4": 0, "dB2": 1, "dB4": 1, "d2B4": 2}
_SPLINE_ORDER = {"B2": 2, "dB2": 2, "B4": 4, "dB4": 4, "d2B4": 4}


@dataclass(frozen=True)
class Prototype:
    family: str
    m: int | None
    l: int | None
    samples: np.ndarray

    @property
    def support(self) -> int:
        """Number of samples between the first and last nonzero entry."""
        nz = np.flatnonzero(self.samples)
        return int(nz[-1] - nz[0] + 1)


@dataclass(frozen=True, eq=False)
class Dictionary1D:
    """Ordered set of unit-norm atoms of length ``N``.

    ``matrix`` has shape (N, M) with one atom per column; ``labels`` holds the
    sub-dictionary id of every atom.
    """

    matrix: np.ndarray
    labels: tuple[str, ...]
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.float64, order="F")
        if mat.ndim != 2:
            raise ValueError("dictionary matrix must be 2D")
        if len(self.labels) != mat.shape[1]:
            raise ValueError("one label per atom required")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def M(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return self.M

    @property
    def atoms(self) -> np.ndarray:
        """Atoms as rows, shape (M, N)."""
        return self.matrix.T

    def atom(self, n: int) -> np.ndarray:
        return self.matrix[:, n]

    @cached_property
    def gram(self) -> np.ndarray:
        g = self.matrix.T @ self.matrix
        g.flags.writeable = False
        return g

    def coherence(self) -> float:
        g = np.abs(self.gram.copy())
        np.fill_diagonal(g, 0.0)
        return float(g.max()) if g.size else 0.0

    def label_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for lab in self.labels:
            out[lab] = out.get(lab, 0) + 1
        return out

    def write_csv(self, path) -> None:
        """Debug dump: one atom per row, label first."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for lab, atom in zip(self.labels, self.atoms):
                w.writerow([lab, *(repr(float(v)) for v in atom)])

    def __add__(self, other: "Dictionary1D") -> "Dictionary1D":
        if other.N != self.N:
            raise ValueError("atom lengths differ")
        return Dictionary1D(
            np.hstack([self.matrix, other.matrix]),
            self.labels + other.labels,
            name=self.name or other.name,
            meta={**other.meta, **self.meta},
        )


# ---------------------------------------------------------------- prototypes


def _cardinal_bspline_derivative(x: float, m: int, r: int, side: int) -> float:
    """r-th derivative of the order-m cardinal B-spline (knots 0..m) at ``x``.

    Truncated-power form normalized to a peak of 1 for m=2 and 2/3 for m=4;
    ``side`` = +1 / -1 gives the right / left limit.
    """
    p = m - 1 - r
    total = 0.0
    for i in range(m + 1):
        u = x - i
        if p == 0:
            on = u >= 0 if side > 0 else u > 0
            term = 1.0 if on else 0.0
        else:
            term = u**p if u > 0 else 0.0
        total += (-1) ** i * math.comb(m, i) * term
    return total / math.factorial(p)


def sample_prototype(family: str, m: int, l: int) -> Prototype:
    """Sample a scaled cardinal B-spline (or derivative) at the knots 0..m*l.

    Where the derivative jumps at an interior knot the mean of both one-sided
    limits is used; at the support ends, the inner one-sided limit.
    """
    if family not in SPLINE_FAMILIES or _SPLINE_ORDER[family] != m:
        raise ValueError(f"unsupported prototype ({family}, m={m})")
    if int(l) != l or l < 1:
        raise ValueError(f"scale l must be a positive integer, got {l}")
    r = _DERIVATIVE_ORDER[family]
    end = m * l
    vals = np.empty(end + 1)
    for k in range(end + 1):
        u = k / l
        right = _cardinal_bspline_derivative(u, m, r, +1)
        left = _cardinal_bspline_derivative(u, m, r, -1)
        if k == 0:
            v = right
        elif k == end:
            v = left
        else:
            v = 0.5 * (left + right)
        vals[k] = v / l**r
    vals[np.abs(vals) < 1e-15] = 0.0
    return Prototype(family, m, l, vals)


def haar_prototype(support: int) -> Prototype:
    if support < 2 or support % 2:
        raise ValueError("Haar support must be a positive even integer")
    h = support // 2
    return Prototype("Haar", None, support, np.r_[np.ones(h), -np.ones(h)])


def _mexhat(x, sigma):
    return (1 - x**2 / sigma**2) * np.exp(-(x**2) / (2 * sigma**2))


@lru_cache(maxsize=None)
def _mexhat_sigma(support: int, tail: float = 1e-3) -> float:
    """Widest scale whose continuous wavelet is below ``tail`` past the support."""
    x_out = (support - 1) // 2 + 1
    grid = np.linspace(0.05, x_out, 2000)
    vals = np.abs(_mexhat(x_out, grid))
    first = int(np.argmax(vals >= tail))
    return brentq(lambda s: abs(_mexhat(x_out, s)) - tail, grid[first - 1], grid[first],
                  xtol=1e-14)


def mexican_hat_prototype(support: int) -> Prototype:
    """Mexican-hat samples on ``support`` points with the discrete mean removed."""
    if support < 3 or support % 2 == 0:
        raise ValueError("Mexican-hat support must be an odd integer >= 3")
    h = (support - 1) // 2
    vals = _mexhat(np.arange(-h, h + 1, dtype=float), _mexhat_sigma(support))
    return Prototype("MexHat", None, support, vals - vals.mean())


# --------------------------------------------------------------- dictionaries


def build_rdc(N: int, M: int) -> Dictionary1D:
    """Redundant discrete cosine dictionary, ``M`` frequencies on ``N`` samples."""
    if N < 1 or M < N:
        raise ValueError(f"RDC requires M >= N >= 1 (N={N}, M={M})")
    j = np.arange(1, N + 1)
    i = np.arange(1, M + 1)
    mat = np.cos(np.pi * np.outer(2 * j - 1, i - 1) / (2 * M))
    mat /= np.linalg.norm(mat, axis=0)
    return Dictionary1D(mat, ("1",) * M, name=f"rdc{N}x{M}")


def build_euclidean(N: int, label: str = "2") -> Dictionary1D:
    return Dictionary1D(np.eye(N), (label,) * N, name="euclid")


def _translate(samples: np.ndarray, N: int) -> np.ndarray:
    """All one-sample translates of ``samples`` cut off to length N.

    Translates that truncate to zero are dropped; the rest are normalized.
    """
    L = len(samples)
    cols = []
    for shift in range(-(L - 1), N):
        v = np.zeros(N)
        lo, hi = max(shift, 0), min(shift + L, N)
        v[lo:hi] = samples[lo - shift : hi - shift]
        nrm = np.linalg.norm(v)
        if nrm > 0.0:
            cols.append(v / nrm)
    return np.column_stack(cols) if cols else np.zeros((N, 0))


def _subdict_from_prototype(proto: Prototype, N: int, label: str) -> Dictionary1D:
    if N < proto.support:
        raise ValueError(
            f"N={N} is smaller than the prototype support {proto.support}"
        )
    mat = _translate(proto.samples, N)
    return Dictionary1D(mat, (label,) * mat.shape[1])


def build_rdbs_subdict(s: int, N: int) -> Dictionary1D:
    """B-spline based sub-dictionary ``s`` in 2..9 for signals of length N."""
    if s not in RDBS_FAMILIES:
        raise ValueError(f"sub-dictionary index must be in 2..9, got {s}")
    family, m, l = RDBS_FAMILIES[s]
    return _subdict_from_prototype(sample_prototype(family, m, l), N, str(s))


def build_mixed(N: int) -> Dictionary1D:
    if N < 8:
        raise ValueError(f"mixed dictionary requires N >= 8, got {N}")
    d = build_rdc(N, 2 * N)
    for s in range(2, 10):
        d = d + build_rdbs_subdict(s, N)
    return Dictionary1D(d.matrix, d.labels, name="mixed")


def build_rdw(N: int) -> Dictionary1D:
    """RDC plus Euclidean basis plus translated discrete Haar and Mexican hats."""
    if N < 8:
        raise ValueError(f"RDW dictionary requires N >= 8, got {N}")
    d = build_rdc(N, 2 * N) + build_euclidean(N)
    k = 0
    for sup in (2, 4, 6, 8):
        k += 1
        d = d + _subdict_from_prototype(haar_prototype(sup), N, f"RDW-{k}")
    for sup in (3, 5, 7):
        k += 1
        d = d + _subdict_from_prototype(mexican_hat_prototype(sup), N, f"RDW-{k}")
    return Dictionary1D(d.matrix, d.labels, name="rdw")


RR_SUPPORTS = (3, 5, 7, 9, 5, 7, 9, 9)


def build_rr(N: int, seed: int) -> Dictionary1D:
    """RDC plus Euclidean basis plus translated Gaussian random prototypes."""
    if N < 8:
        raise ValueError(f"RR dictionary requires N >= 8, got {N}")
    rng = np.random.Generator(np.random.PCG64(seed))
    d = build_rdc(N, 2 * N) + build_euclidean(N)
    for k, sup in enumerate(RR_SUPPORTS, start=1):
        proto = Prototype("Random", None, sup, rng.standard_normal(sup))
        mat = _translate(proto.samples, N)
        d = d + Dictionary1D(mat, (f"RR-{k}",) * mat.shape[1])
    return Dictionary1D(
        d.matrix, d.labels, name=f"rr:{seed}",
        meta={"rng": RNG_ALGORITHM, "seed": int(seed)},
    )


# ------------------------------------------------------------- spec strings

DICT_KINDS = ("mixed", "rdc", "rdw", "rr", "dct")


def parse_dict_spec(spec: str) -> tuple[str, int | None]:
    """Split ``"rr:<seed>"`` style strings into (kind, seed)."""
    kind, _, arg = spec.strip().lower().partition(":")
    if kind not in DICT_KINDS:
        raise ValueError(f"unknown dictionary spec {spec!r}")
    if kind == "rr":
        if not arg:
            raise ValueError("rr dictionary needs a seed: 'rr:<seed>'")
        try:
            return kind, int(arg)
        except ValueError:
            raise ValueError(f"bad rr seed in {spec!r}") from None
    if arg:
        raise ValueError(f"dictionary {kind!r} takes no argument")
    return kind, None


@lru_cache(maxsize=64)
def dictionary_from_spec(spec: str, N: int) -> Dictionary1D:
    """Build (and memoize) the dictionary named by ``spec`` at length N.

    Blocks narrower than 8 samples (image edges) cannot host the localized
    families; they get the redundant cosine part plus the Euclidean basis.
    """
    kind, seed = parse_dict_spec(spec)
    if kind == "dct":
        return build_rdc(N, N)
    if kind == "rdc":
        return build_rdc(N, 2 * N)
    if N < 8:
        d = build_rdc(N, 2 * N) + build_euclidean(N)
        return Dictionary1D(d.matrix, d.labels, name=f"{kind}-reduced")
    if kind == "mixed":
        return build_mixed(N)
    if kind == "rdw":
        return build_rdw(N)
    return build_rr(N, seed)
