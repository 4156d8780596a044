"""Pursuit over pairs of 1D dictionaries (separable 2D dictionaries).

The rank-1 atom for the pair (n, m) is ``outer(Dx[:, n], Dy[:, m])``. The
Kronecker-product dictionary is never formed: correlations are computed as
``Dx.T @ R @ Dy``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._kernels import self_project_pairs
from .dictionary import Dictionary1D

__all__ = [
    "Decomposition2D",
    "BiorthogonalState",
    "frobenius_ip",
    "select_atom_pair",
    "mp2d",
    "omp2d",
    "spmp2d",
    "reconstruct2d",
]

DEPENDENCE_TOL = 1e-10
REORTH_TOL = 1e-6
INNER_CAP = 50_000_000


@dataclass
class Decomposition2D:
    pairs: np.ndarray  # (K, 2) int64: row-atom index, column-atom index
    coefficients: np.ndarray
    residual_norm: float = float("nan")
    iterations: int = 0
    converged: bool = True
    history: list[float] = field(default_factory=list, repr=False)
    # signed correlation removed at each plain MP step (mp2d only)
    steps: list[float] = field(default_factory=list, repr=False)
    inner_iterations: int = 0

    @property
    def K(self) -> int:
        return len(self.coefficients)

    @classmethod
    def empty(cls) -> "Decomposition2D":
        return cls(np.zeros((0, 2), dtype=np.int64), np.zeros(0), 0.0)


def frobenius_ip(A, B) -> float:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.sum(A * B))


def _correlations(R, Dx: Dictionary1D, Dy: Dictionary1D) -> np.ndarray:
    return (Dx.matrix.T @ R) @ Dy.matrix


def select_atom_pair(R, Dx: Dictionary1D, Dy: Dictionary1D) -> tuple[int, int, float]:
    """Pair (n, m) maximizing |<dx_n, R dy_m>|; lowest (n, m) wins ties."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (Dx.N, Dy.N):
        raise ValueError(f"residual shape {R.shape} does not match ({Dx.N}, {Dy.N})")
    G = _correlations(R, Dx, Dy)
    flat = int(np.argmax(np.abs(G)))
    n, m = divmod(flat, Dy.M)
    return n, m, float(G[n, m])


def _check(I, Dx, Dy, rho):
    I = np.asarray(I, dtype=np.float64)
    if I.shape != (Dx.N, Dy.N):
        raise ValueError(f"image shape {I.shape} does not match ({Dx.N}, {Dy.N})")
    if rho <= 0:
        raise ValueError("tolerance rho must be positive")
    return I


class _PairAccumulator:
    def __init__(self):
        self.pos: dict[tuple[int, int], int] = {}
        self.pairs: list[tuple[int, int]] = []
        self.coef: list[float] = []

    def add(self, pair, value) -> bool:
        j = self.pos.get(pair)
        if j is None:
            self.pos[pair] = len(self.pairs)
            self.pairs.append(pair)
            self.coef.append(value)
            return True
        self.coef[j] += value
        return False

    def arrays(self):
        pairs = np.array(self.pairs, dtype=np.int64).reshape(-1, 2)
        return pairs, np.array(self.coef, dtype=np.float64)


def reconstruct2d(dec: Decomposition2D, Dx: Dictionary1D, Dy: Dictionary1D) -> np.ndarray:
    pairs = np.asarray(dec.pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size:
        if pairs[:, 0].min() < 0 or pairs[:, 0].max() >= Dx.M:
            raise ValueError("row-atom index out of range")
        if pairs[:, 1].min() < 0 or pairs[:, 1].max() >= Dy.M:
            raise ValueError("column-atom index out of range")
    coef = np.asarray(dec.coefficients, dtype=np.float64)
    return (Dx.matrix[:, pairs[:, 0]] * coef) @ Dy.matrix[:, pairs[:, 1]].T


# ---------------------------------------------------------------------- MP2D


def mp2d(I, Dx: Dictionary1D, Dy: Dictionary1D, rho: float,
         cap: int | None = None) -> Decomposition2D:
    """Plain 2D Matching Pursuit; repeated pairs merge their coefficients."""
    I = _check(I, Dx, Dy, rho)
    cap = 10 * I.size if cap is None else cap
    R = I.copy()
    acc = _PairAccumulator()
    hist = [float(np.linalg.norm(R))]
    steps = []
    it = 0
    while hist[-1] >= rho and it < cap:
        n, m, a = select_atom_pair(R, Dx, Dy)
        if a == 0.0:
            break
        R -= a * np.outer(Dx.matrix[:, n], Dy.matrix[:, m])
        acc.add((n, m), a)
        it += 1
        steps.append(a)
        hist.append(float(np.linalg.norm(R)))
    pairs, coef = acc.arrays()
    return Decomposition2D(pairs, coef, hist[-1], it, hist[-1] < rho, hist, steps)


# --------------------------------------------------------------------- OMP2D


class BiorthogonalState:
    """Reciprocal matrices B and orthogonalized matrices C for OMP2D.

    Matrices are stored flattened, one row each. For the selected rank-1 atoms
    A_1..A_k, <A_n, B_m> = delta_nm and span(B) = span(A).
    """

    def __init__(self, Nx: int, Ny: int, capacity: int):
        self.shape = (Nx, Ny)
        self.B = np.zeros((capacity, Nx * Ny))
        self.C = np.zeros((capacity, Nx * Ny))
        self.cnorm2 = np.zeros(capacity)
        self.pairs: list[tuple[int, int]] = []

    @property
    def k(self) -> int:
        return len(self.pairs)

    def add(self, ax: np.ndarray, ay: np.ndarray, pair: tuple[int, int]) -> bool:
        """Append atom outer(ax, ay); False (state untouched) if it is dependent."""
        k = self.k
        if k == self.B.shape[0]:
            raise ValueError("biorthogonal state is full")
        A = np.outer(ax, ay).ravel()
        anorm = float(np.linalg.norm(A))
        Ck = self.C[:k]
        w = self.cnorm2[:k]
        Cn = A - Ck.T @ ((Ck @ A) / w)
        Cn -= Ck.T @ ((Ck @ Cn) / w)  # re-orthogonalization
        nc = float(np.linalg.norm(Cn))
        if nc < REORTH_TOL * anorm:
            Cn -= Ck.T @ ((Ck @ Cn) / w)
            nc = float(np.linalg.norm(Cn))
        if nc < DEPENDENCE_TOL * anorm:
            return False
        Bn = Cn / nc**2
        self.B[:k] -= np.outer(self.B[:k] @ A, Bn)
        self.B[k] = Bn
        self.C[k] = Cn
        self.cnorm2[k] = nc**2
        self.pairs.append(pair)
        return True

    def coefficients(self, I: np.ndarray) -> np.ndarray:
        return self.B[: self.k] @ np.asarray(I).ravel()

    def atom_matrices(self, Dx: Dictionary1D, Dy: Dictionary1D) -> np.ndarray:
        """The selected A_n, flattened one per row (for checks)."""
        return np.array([np.outer(Dx.matrix[:, n], Dy.matrix[:, m]).ravel()
                         for n, m in self.pairs]).reshape(self.k, -1)


def omp2d(
    I,
    Dx: Dictionary1D,
    Dy: Dictionary1D,
    rho: float,
    cap: int | None = None,
    callback: Callable[[BiorthogonalState, np.ndarray, np.ndarray], None] | None = None,
) -> Decomposition2D:
    """2D Orthogonal Matching Pursuit with adaptive reciprocal matrices.

    ``callback(state, coefficients, residual)`` is invoked after every
    accepted atom.
    """
    I = _check(I, Dx, Dy, rho)
    Nx, Ny = I.shape
    cap = Nx * Ny if cap is None else min(cap, Nx * Ny)
    state = BiorthogonalState(Nx, Ny, cap)
    blocked = np.zeros((Dx.M, Dy.M), dtype=bool)
    R = I.copy()
    coef = np.zeros(0)
    hist = [float(np.linalg.norm(R))]
    while hist[-1] >= rho and state.k < cap:
        G = np.abs(_correlations(R, Dx, Dy))
        G[blocked] = -1.0
        accepted = False
        while True:
            flat = int(np.argmax(G))
            n, m = divmod(flat, Dy.M)
            if G[n, m] <= 0.0:
                break
            blocked[n, m] = True
            if state.add(Dx.matrix[:, n], Dy.matrix[:, m], (n, m)):
                accepted = True
                break
            G[n, m] = -1.0
        if not accepted:
            break
        coef = state.coefficients(I)
        pairs = np.array(state.pairs, dtype=np.int64)
        R = I - (Dx.matrix[:, pairs[:, 0]] * coef) @ Dy.matrix[:, pairs[:, 1]].T
        hist.append(float(np.linalg.norm(R)))
        if callback is not None:
            callback(state, coef, R)
    pairs = np.array(state.pairs, dtype=np.int64).reshape(-1, 2)
    return Decomposition2D(pairs, coef, hist[-1], state.k, hist[-1] < rho, hist)


# -------------------------------------------------------------------- SPMP2D


def spmp2d(
    I,
    Dx: Dictionary1D,
    Dy: Dictionary1D,
    rho: float,
    eps: float | None = None,
    p: int = 1,
    cap: int | None = None,
    inner_cap: int = INNER_CAP,
    callback: Callable[[np.ndarray, np.ndarray, np.ndarray], None] | None = None,
) -> Decomposition2D:
    """2D Self Projected Matching Pursuit.

    Each round makes ``p`` plain MP selections, then re-projects the residual
    onto the span of all selected pairs by MP restricted to those pairs, until
    no selected pair correlates with the residual by more than ``eps``
    (default 1e-9 ||I||_F). Only the two 1D Gram matrices are used; no
    per-atom matrices are stored. ``callback(pairs, coefficients, residual)``
    runs after every projection.
    """
    I = _check(I, Dx, Dy, rho)
    if p < 1:
        raise ValueError("projection step p must be >= 1")
    inorm = float(np.linalg.norm(I))
    eps = 1e-9 * inorm if eps is None else eps
    if eps <= 0:
        raise ValueError("eps must be positive")
    cap = 10 * I.size if cap is None else cap
    X, Y = Dx.matrix, Dy.matrix
    gx, gy = Dx.gram, Dy.gram
    R = I.copy()
    acc = _PairAccumulator()
    hist = [inorm]
    total = inner = 0
    while hist[-1] >= rho and total < cap:
        for j in range(p):
            if j and np.linalg.norm(R) < rho:
                break
            n, m, a = select_atom_pair(R, Dx, Dy)
            if a == 0.0:
                break
            R -= a * np.outer(X[:, n], Y[:, m])
            acc.add((n, m), a)
            total += 1
            if total >= cap:
                break
        if not acc.pairs:
            break
        pairs = np.array(acc.pairs, dtype=np.int64)
        lx = np.ascontiguousarray(pairs[:, 0])
        ly = np.ascontiguousarray(pairs[:, 1])
        g = np.einsum("ik,ik->k", X[:, lx], R @ Y[:, ly])
        dc = np.zeros(len(lx))
        inner += self_project_pairs(g, gx, gy, lx, ly, dc, eps, inner_cap)
        for j, v in enumerate(dc):
            acc.coef[j] += v
        R -= (X[:, lx] * dc) @ Y[:, ly].T
        hist.append(float(np.linalg.norm(R)))
        if callback is not None:
            callback(pairs, np.array(acc.coef), R)
    pairs, coef = acc.arrays()
    return Decomposition2D(pairs, coef, hist[-1], total, hist[-1] < rho, hist,
                           inner_iterations=inner)
