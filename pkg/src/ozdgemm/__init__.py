"""FP64-accurate matrix multiplication built from low-precision GEMMs.

The package decomposes FP64 operands into short slices representable in a
low-precision floating-point format, multiplies all slice pairs with a
simulated low-precision GEMM, and reassembles the FP64 result.  An optional
integer-based FP64 emulation removes hardware FP64 arithmetic from the
slicing and accumulation steps, and a correctly rounded reference GEMM
verifies the whole pipeline.
"""

__version__ = "1.0.0"

from .formats import FORMATS, FormatSpec, cvt, get_format, is_representable
from .fp64emu import (F64Word, RangeError, emu_add, emu_ceil_log2abs, emu_lt,
                      emu_max, emu_mul, emu_scale2, emu_sub)
from .lpgemm import LpMatrix, RepresentabilityError, exact_gemm, lp_gemm
from .oracle import max_rel_error, naive_gemm_fp64, ref_gemm
from .ozgemm import (DimensionError, GemmConfig, OzResult, OzStats, oz_gemm,
                     oz_gemm_count, transpose)
from .slicing import (SliceSet, SlicingInfeasible, SlicingParams,
                      compute_params, predict_gemm_count, predict_slice_count,
                      slice_matrix, slice_vector)

__all__ = [
    "__version__",
    "FORMATS",
    "FormatSpec",
    "get_format",
    "cvt",
    "is_representable",
    "F64Word",
    "RangeError",
    "emu_add",
    "emu_sub",
    "emu_mul",
    "emu_lt",
    "emu_max",
    "emu_ceil_log2abs",
    "emu_scale2",
    "SlicingParams",
    "SlicingInfeasible",
    "SliceSet",
    "compute_params",
    "predict_slice_count",
    "predict_gemm_count",
    "slice_vector",
    "slice_matrix",
    "LpMatrix",
    "RepresentabilityError",
    "lp_gemm",
    "exact_gemm",
    "GemmConfig",
    "OzResult",
    "OzStats",
    "DimensionError",
    "oz_gemm",
    "oz_gemm_count",
    "transpose",
    "ref_gemm",
    "naive_gemm_fp64",
    "max_rel_error",
]
