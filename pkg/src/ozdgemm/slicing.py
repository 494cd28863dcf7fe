"""Error-free slicing of FP64 vectors and matrices along the inner dimension.

Each length-k vector x is decomposed as  x = sum_p 2**c_p * coeff_p  where
every coeff_p entry is exactly representable in the target low-precision
format and the per-slice exponents c_p strictly decrease.  The decomposition
is exact: re-summing the slices reproduces the input bitwise.

The arithmetic used for the extraction (add/subtract of the shift constant,
power-of-two scaling) runs either on hardware FP64 or entirely on the
integer-based emulation in :mod:`ozdgemm.fp64emu`; both modes produce
bitwise-identical slices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fp64emu
from .formats import FormatSpec, is_representable

__all__ = [
    "SlicingInfeasible",
    "SlicingParams",
    "SliceSet",
    "compute_params",
    "predict_slice_count",
    "predict_gemm_count",
    "slice_vector",
    "slice_matrix",
]

# Termination guard.  A row needs at most (exponent span + 53) slices, and
# the FP64 exponent span is ~2046, so this bound is unreachable for valid
# inputs regardless of slice width.
_MAX_SLICES_HARD = 2100


class SlicingInfeasible(Exception):
    """The target format cannot retain the information of a slice."""


@dataclass(frozen=True)
class SlicingParams:
    """Constants of the slicing recursion for one (m1, m2, m3, k) choice.

    m1/m2/m3 are the significand bit counts (hidden bit included) of the
    input, slice-storage, and accumulation formats.  ``slice_width`` is the
    number of bits extracted per slice before the extra bit gained by
    round-to-nearest extraction.
    """

    m1: int
    m2: int
    m3: int
    k: int
    gamma: int
    xi: int
    rho: int
    slice_width: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "slice_width", self.m1 - self.rho)

    @property
    def feasible(self) -> bool:
        return self.slice_width >= 0


def compute_params(m1: int, m2: int, m3: int, k: int) -> SlicingParams:
    """Slicing constants for inner dimension k (k need not be a power of 2)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if min(m1, m2, m3) < 1:
        raise ValueError("significand bit counts must be >= 1")
    gamma = math.ceil(m1 - (m3 - math.log2(k)) / 2)
    xi = m1 - m2
    rho = max(gamma, xi)
    return SlicingParams(m1, m2, m3, k, gamma, xi, rho)


def predict_slice_count(params: SlicingParams):
    """Slices needed for a fully filled m1-bit significand, or None."""
    if not params.feasible:
        return None
    return math.ceil(params.m1 / (params.slice_width + 1))


def predict_gemm_count(m1: int, m2: int, m3: int, k: int):
    """Low-precision GEMMs needed per DGEMM (square of the slice count).

    None means slicing is infeasible for this format combination at this k.
    """
    s = predict_slice_count(compute_params(m1, m2, m3, k))
    return None if s is None else s * s


@dataclass
class SliceSet:
    """Slices of one matrix along its inner-product dimension.

    ``coeff[p]`` has the same shape as the input matrix and every entry is
    representable in ``fmt``; ``expo[p]`` holds one integer exponent per
    row (orientation "rows") or per column (orientation "cols").  Rows or
    columns whose slices ran out early are padded with all-zero coefficient
    slices of exponent 0 so each slice is a full dense matrix.
    """

    orientation: str
    s: int
    coeff: list
    expo: list
    params: SlicingParams
    fmt: FormatSpec


def _validate_input(x: np.ndarray):
    if not np.all(np.isfinite(x)):
        raise ValueError("slicing input must be finite")
    mag = np.abs(x)
    tiny = (mag > 0) & (mag < 2.0 ** -1022)
    if np.any(tiny):
        raise fp64emu.RangeError("slicing input must be normal or zero")


def _slice_rows(X: np.ndarray, fmt: FormatSpec, params: SlicingParams,
                arith: str):
    """Slice every row of X; returns (coeff list, expo list)."""
    if not params.feasible:
        raise SlicingInfeasible(
            f"slice width {params.slice_width} < 0 for m2={params.m2}, "
            f"m3={params.m3}, k={params.k}"
        )
    if arith not in ("fp64", "emu"):
        raise ValueError("arith must be 'fp64' or 'emu'")
    emu = arith == "emu"
    X = np.array(X, dtype=np.float64)
    _validate_input(X)
    rho = params.rho

    coeffs, expos = [], []
    for _ in range(_MAX_SLICES_HARD):
        mx = fp64emu.max_abs(X, axis=1)
        active = np.atleast_1d(mx).view(np.uint64) != 0
        if not np.any(active):
            break
        # ceil(log2 max): exact from the bit pattern in both modes; rows that
        # are already exhausted take c = 0 and keep producing zero slices.
        safe = np.where(active, mx, 1.0)
        c = np.where(active, fp64emu.ceil_log2_abs(safe), 0).astype(np.int64)
        # sigma = 0.75 * 2**(rho + c) = 1.5 * 2**(rho + c - 1), assembled
        # directly in the exponent field (exact, no FP arithmetic).
        sig_exp = c + rho - 1 + 1023
        if np.any(active & ((sig_exp < 1) | (sig_exp > 2046))):
            raise fp64emu.RangeError("shift constant outside normal range")
        sig_bits = (sig_exp.astype(np.uint64) << np.uint64(52)) \
            | np.uint64(1 << 51)
        sigma = sig_bits.view(np.float64)[:, None]
        if emu:
            v = fp64emu.sub_arrays(fp64emu.add_arrays(X, sigma), sigma)
            X = fp64emu.sub_arrays(X, v)
            coeff = fp64emu.scale2_arrays(v, -c[:, None])
        else:
            v = (X + sigma) - sigma
            X = X - v
            coeff = np.ldexp(v, -c[:, None])
        if not np.all(is_representable(coeff, fmt)):
            raise SlicingInfeasible(
                f"slice coefficients not representable in {fmt.name}"
            )
        coeffs.append(coeff)
        expos.append(c)
    else:
        raise AssertionError("slicing failed to terminate")
    return coeffs, expos


def slice_vector(x, fmt: FormatSpec, params: SlicingParams,
                 arith: str = "fp64"):
    """Slice one length-k vector; returns (coeff vectors, exponents)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("slice_vector expects a 1-D vector")
    coeffs, expos = _slice_rows(x[None, :], fmt, params, arith)
    return [c[0] for c in coeffs], [int(e[0]) for e in expos]


def slice_matrix(M, orientation: str, fmt: FormatSpec,
                 params: SlicingParams, arith: str = "fp64") -> SliceSet:
    """Slice a matrix row-wise ("rows", left operand) or column-wise
    ("cols", right operand)."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("slice_matrix expects a 2-D matrix")
    if orientation == "rows":
        coeffs, expos = _slice_rows(M, fmt, params, arith)
    elif orientation == "cols":
        # Transpose so slicing walks contiguous rows, then transpose back.
        coeffs, expos = _slice_rows(np.ascontiguousarray(M.T), fmt, params,
                                    arith)
        coeffs = [np.ascontiguousarray(c.T) for c in coeffs]
    else:
        raise ValueError("orientation must be 'rows' or 'cols'")
    return SliceSet(orientation, len(coeffs), coeffs, expos, params, fmt)
