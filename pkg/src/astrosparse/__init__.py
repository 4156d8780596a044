"""Sparse approximation of astronomical images with mixed cosine/B-spline dictionaries."""
from .blockcodec import (
    BlockDecomposition,
    BlockGrid,
    ConvergenceError,
    FormatError,
    dct_baseline,
    dct_threshold,
    decode,
    deserialize,
    encode,
    partition,
    quality_report,
    rho_for_psnr,
    serialize,
)
from .dictionary import (
    Dictionary1D,
    build_mixed,
    build_rdbs_subdict,
    build_rdc,
    build_rdw,
    build_rr,
    dictionary_from_spec,
    sample_prototype,
)
from .metrics import QualityReport, mssim, psnr, sparsity_ratio
from .pursuit1d import Decomposition1D, chirp_signal, mp, omp, reconstruct1d, spmp
from .pursuit2d import (
    BiorthogonalState,
    Decomposition2D,
    frobenius_ip,
    mp2d,
    omp2d,
    reconstruct2d,
    select_atom_pair,
    spmp2d,
)

__version__ = "0.1.0"
