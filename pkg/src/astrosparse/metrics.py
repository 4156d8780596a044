"""Quality and sparsity measures."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import convolve2d

__all__ = [
    "PEAK",
    "QualityReport",
    "REPORT_COLUMNS",
    "psnr",
    "psnr_from_error",
    "sparsity_ratio",
    "mssim",
    "gaussian_window",
]

PEAK = 255.0
REPORT_COLUMNS = ("image", "dict", "method", "block", "psnr_db", "sr", "mssim",
                  "atoms", "seconds")


def _pair(I, J):
    I = np.asarray(I, dtype=np.float64)
    J = np.asarray(J, dtype=np.float64)
    if I.shape != J.shape:
        raise ValueError(f"image shapes differ: {I.shape} vs {J.shape}")
    return I, J


def psnr_from_error(sq_error: float, n_pixels: int) -> float:
    if sq_error == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK**2 * n_pixels / sq_error)


def psnr(I, J) -> float:
    """PSNR in dB at peak 255; +inf for identical images."""
    I, J = _pair(I, J)
    return psnr_from_error(float(np.sum((I - J) ** 2)), I.size)


def sparsity_ratio(dec) -> float:
    """Pixels over coefficients for a block decomposition; +inf if no coefficients."""
    atoms = dec.total_atoms
    if atoms == 0:
        return math.inf
    return dec.n_pixels / atoms


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def mssim(I, J, K1: float = 0.01, K2: float = 0.03, win: int = 11,
          sigma: float = 1.5) -> float:
    """Mean SSIM over the valid region with an 11x11 Gaussian window."""
    I, J = _pair(I, J)
    if I.ndim != 2 or min(I.shape) < win:
        raise ValueError(f"images must be at least {win}x{win}")
    w = gaussian_window(win, sigma)
    C1 = (K1 * PEAK) ** 2
    C2 = (K2 * PEAK) ** 2

    def filt(a):
        return convolve2d(a, w, mode="valid")

    mu1, mu2 = filt(I), filt(J)
    s11 = filt(I * I) - mu1 * mu1
    s22 = filt(J * J) - mu2 * mu2
    s12 = filt(I * J) - mu1 * mu2
    num = (2 * mu1 * mu2 + C1) * (2 * s12 + C2)
    den = (mu1 * mu1 + mu2 * mu2 + C1) * (s11 + s22 + C2)
    return float(np.mean(num / den))


@dataclass
class QualityReport:
    psnr_db: float
    sr: float
    mssim: float
    total_atoms: int
    wall_time_s: float = 0.0
    image: str = ""
    dict: str = ""
    method: str = ""
    block: int = 0

    def row(self) -> list[str]:
        """CSV row in ``REPORT_COLUMNS`` order."""
        return [
            self.image, self.dict, self.method, str(self.block),
            f"{self.psnr_db:.4f}", f"{self.sr:.4f}", f"{self.mssim:.6f}",
            str(self.total_atoms), f"{self.wall_time_s:.3f}",
        ]

    def text(self) -> str:
        return (
            f"{self.image or '<image>'}: dict={self.dict} method={self.method} "
            f"block={self.block}\n"
            f"  PSNR  {self.psnr_db:.4f} dB\n"
            f"  SR    {self.sr:.4f}\n"
            f"  MSSIM {self.mssim:.6f}\n"
            f"  atoms {self.total_atoms}\n"
            f"  time  {self.wall_time_s:.3f} s"
        )

    def as_dict(self) -> dict:
        return asdict(self)
