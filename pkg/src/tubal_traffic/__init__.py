"""Low-tubal-rank completion of traffic tensors with spatio-temporal regularization."""

from .data_io import (
    MaskSpec,
    RecoveryReport,
    generate_mask,
    load_traffic_csv,
    nmae,
    shape_tensor,
    synth_low_tubal_rank,
    unshape_tensor,
)
from .regularizers import DifferenceOperator, ShiftedGram, make_toeplitz
from .solver import DivergenceError, ObservationMask, SolverConfig, SolverResult, run
from .spectral import SpectralSlices, forward, inverse
from .tprod import conj_transpose, tproduct, tsvd, tubal_rank

__version__ = "0.1.0"

__all__ = [
    "MaskSpec",
    "RecoveryReport",
    "generate_mask",
    "load_traffic_csv",
    "nmae",
    "shape_tensor",
    "synth_low_tubal_rank",
    "unshape_tensor",
    "DifferenceOperator",
    "ShiftedGram",
    "make_toeplitz",
    "DivergenceError",
    "ObservationMask",
    "SolverConfig",
    "SolverResult",
    "run",
    "SpectralSlices",
    "forward",
    "inverse",
    "conj_transpose",
    "tproduct",
    "tsvd",
    "tubal_rank",
]
