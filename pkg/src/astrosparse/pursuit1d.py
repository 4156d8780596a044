"""Greedy pursuit over 1D signals: MP, OMP and Self Projected MP."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from ._kernels import self_project
from .dictionary import Dictionary1D

__all__ = [
    "Decomposition1D",
    "chirp_signal",
    "mp",
    "omp",
    "spmp",
    "reconstruct1d",
]

DEPENDENCE_TOL = 1e-10
INNER_CAP = 50_000_000


@dataclass
class Decomposition1D:
    indices: np.ndarray
    coefficients: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool = True
    # residual norm before the first and after every selection
    history: list[float] = field(default_factory=list, repr=False)
    inner_iterations: int = 0
    # signed correlation removed at each plain MP step (mp only)
    steps: list[float] = field(default_factory=list, repr=False)

    @property
    def K(self) -> int:
        return len(self.indices)


def chirp_signal(N: int, endpoint: bool = False) -> np.ndarray:
    """cos(2 pi t^2) on N equidistant points of [0, 8].

    The default grid is t_i = 8 (i - 1) / N; ``endpoint=True`` also samples t = 8.
    """
    if N < 2:
        raise ValueError("chirp needs at least 2 samples")
    t = np.linspace(0.0, 8.0, N, endpoint=endpoint)
    return np.cos(2 * np.pi * t**2)


def _check(f, D: Dictionary1D, rho):
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1 or f.shape[0] != D.N:
        raise ValueError(f"signal length {f.shape} does not match atom length {D.N}")
    if rho <= 0:
        raise ValueError("tolerance rho must be positive")
    return f


class _Accumulator:
    """Coefficients keyed by atom index, in order of first selection."""

    def __init__(self):
        self.pos: dict[int, int] = {}
        self.idx: list[int] = []
        self.coef: list[float] = []

    def add(self, atom: int, value: float) -> bool:
        j = self.pos.get(atom)
        if j is None:
            self.pos[atom] = len(self.idx)
            self.idx.append(atom)
            self.coef.append(value)
            return True
        self.coef[j] += value
        return False

    def arrays(self):
        return np.array(self.idx, dtype=np.int64), np.array(self.coef, dtype=np.float64)


def mp(f, D: Dictionary1D, rho: float, cap: int | None = None) -> Decomposition1D:
    """Plain Matching Pursuit; repeated atoms share one accumulated coefficient."""
    f = _check(f, D, rho)
    cap = 10 * D.N if cap is None else cap
    mat = D.matrix
    R = f.copy()
    acc = _Accumulator()
    hist = [float(np.linalg.norm(R))]
    steps = []
    it = 0
    while hist[-1] >= rho and it < cap:
        corr = mat.T @ R
        l = int(np.argmax(np.abs(corr)))
        a = float(corr[l])
        if a == 0.0:
            break
        R -= a * mat[:, l]
        acc.add(l, a)
        it += 1
        steps.append(a)
        hist.append(float(np.linalg.norm(R)))
    idx, coef = acc.arrays()
    return Decomposition1D(idx, coef, hist[-1], it, hist[-1] < rho, hist, steps=steps)


def omp(f, D: Dictionary1D, rho: float, cap: int | None = None) -> Decomposition1D:
    """Orthogonal Matching Pursuit via incremental Gram-Schmidt (two passes).

    An atom whose orthogonal remainder is below ``DEPENDENCE_TOL`` lies in the
    current span; it is excluded and the next best atom is taken instead.
    """
    f = _check(f, D, rho)
    N = D.N
    cap = N if cap is None else min(cap, N)
    mat = D.matrix
    Q = np.zeros((N, cap))
    T = np.zeros((cap, cap))  # mat[:, sel] = Q @ T
    sel: list[int] = []
    blocked = np.zeros(D.M, dtype=bool)
    R = f.copy()
    hist = [float(np.linalg.norm(R))]
    while hist[-1] >= rho and len(sel) < cap:
        corr = np.abs(mat.T @ R)
        corr[blocked] = -1.0
        k = len(sel)
        while True:
            l = int(np.argmax(corr))
            if corr[l] <= 0.0:
                l = -1
                break
            d = mat[:, l]
            h1 = Q[:, :k].T @ d
            v = d - Q[:, :k] @ h1
            h2 = Q[:, :k].T @ v
            v -= Q[:, :k] @ h2
            nv = np.linalg.norm(v)
            blocked[l] = True
            if nv >= DEPENDENCE_TOL:
                break
            corr[l] = -1.0
        if l < 0:
            break
        Q[:, k] = v / nv
        T[:k, k] = h1 + h2
        T[k, k] = nv
        sel.append(l)
        R -= Q[:, k] * (Q[:, k] @ R)
        hist.append(float(np.linalg.norm(R)))
    k = len(sel)
    if k:
        coef = solve_triangular(T[:k, :k], Q[:, :k].T @ f)
    else:
        coef = np.zeros(0)
    return Decomposition1D(
        np.array(sel, dtype=np.int64), coef, hist[-1], k, hist[-1] < rho, hist
    )


def spmp(
    f,
    D: Dictionary1D,
    rho: float,
    eps: float | None = None,
    p: int = 1,
    cap: int | None = None,
    inner_cap: int = INNER_CAP,
) -> Decomposition1D:
    """Self Projected Matching Pursuit.

    Alternates ``p`` MP selections over the whole dictionary with MP restricted
    to the selected set, which is run until every selected atom correlates with
    the residual by at most ``eps`` (default 1e-9 ||f||).
    """
    f = _check(f, D, rho)
    if p < 1:
        raise ValueError("projection step p must be >= 1")
    fnorm = float(np.linalg.norm(f))
    eps = 1e-9 * fnorm if eps is None else eps
    if eps <= 0:
        raise ValueError("eps must be positive")
    cap = 10 * D.N if cap is None else cap
    mat = D.matrix
    R = f.copy()
    acc = _Accumulator()
    gram = np.zeros((16, 16))
    hist = [fnorm]
    total = inner = 0
    while hist[-1] >= rho and total < cap:
        k0 = len(acc.idx)
        for j in range(p):
            if j and np.linalg.norm(R) < rho:
                break
            corr = mat.T @ R
            l = int(np.argmax(np.abs(corr)))
            a = float(corr[l])
            if a == 0.0:
                break
            R -= a * mat[:, l]
            acc.add(l, a)
            total += 1
            if total >= cap:
                break
        k = len(acc.idx)
        if k == 0:
            break
        if k > gram.shape[0]:
            grown = np.zeros((2 * k, 2 * k))
            grown[:k0, :k0] = gram[:k0, :k0]
            gram = grown
        if k > k0:
            sub = mat[:, acc.idx[k0:k]]
            block = mat[:, acc.idx[:k]].T @ sub
            gram[:k, k0:k] = block
            gram[k0:k, :k] = block.T
        atoms = mat[:, acc.idx]
        g = atoms.T @ R
        dc = np.zeros(k)
        inner += self_project(g, np.ascontiguousarray(gram[:k, :k]), dc, eps, inner_cap)
        for j in range(k):
            acc.coef[j] += dc[j]
        R -= atoms @ dc
        hist.append(float(np.linalg.norm(R)))
    idx, coef = acc.arrays()
    return Decomposition1D(idx, coef, hist[-1], total, hist[-1] < rho, hist, inner)


def reconstruct1d(dec: Decomposition1D, D: Dictionary1D) -> np.ndarray:
    idx = np.asarray(dec.indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= D.M):
        raise ValueError("atom index out of range for dictionary")
    return D.matrix[:, idx] @ np.asarray(dec.coefficients, dtype=np.float64)
