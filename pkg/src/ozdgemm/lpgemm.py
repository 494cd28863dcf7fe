"""Simulated Tensor-Core GEMM: low-precision operands, fixed-order
accumulation in the accumulator format with round-to-nearest-even after
every addition.

Per-step rounding is the worst case for the error-free property; a real
accumulator that keeps extra bits can only do better.  Products of two
operand-format values are always formed exactly (their significands fit in
FP64 for every catalog format), so the only rounding is in the accumulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import FP32, FormatSpec, cvt, is_representable
from .oracle import exact_matmul

__all__ = ["RepresentabilityError", "LpMatrix", "lp_gemm", "exact_gemm"]


class RepresentabilityError(Exception):
    """An operand entry is not representable in the operand format."""


@dataclass
class LpMatrix:
    """Matrix whose entries are representable in ``fmt`` (held in FP64)."""

    data: np.ndarray
    fmt: FormatSpec

    def __init__(self, data, fmt: FormatSpec, _validated: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.fmt = fmt
        if self.data.ndim != 2:
            raise ValueError("LpMatrix expects a 2-D matrix")
        if not _validated and not np.all(is_representable(self.data, fmt)):
            raise RepresentabilityError(
                f"matrix entries not representable in {fmt.name}"
            )

    @property
    def shape(self):
        return self.data.shape


def _two_sum(a, b):
    """Error-free transformation: a + b == s + err exactly."""
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _round_to_odd(s, err):
    """Force the last significand bit of s odd wherever s + err is inexact.

    The result rounds to any format of <= 51 significand bits exactly as the
    full-precision value would (standard double-rounding fix).
    """
    bits = np.ascontiguousarray(s, dtype=np.float64).view(np.uint64).copy()
    inexact = err != 0
    even = (bits & np.uint64(1)) == np.uint64(0)
    adjust = inexact & even
    toward_inf = (err > 0) == (s > 0)
    delta = np.where(toward_inf, np.uint64(1), np.uint64(0xFFFFFFFFFFFFFFFF))
    with np.errstate(over="ignore"):
        bits = np.where(adjust, bits + delta, bits)
    return bits.view(np.float64)


def _add_round(acc, prod, fmt: FormatSpec):
    """fmt-rounded sum of acc and an exact FP64 product (single rounding)."""
    s, err = _two_sum(acc, prod)
    return cvt(_round_to_odd(s, err), fmt)


def _fast_fp32_ok(A: LpMatrix, B: LpMatrix, type3: FormatSpec) -> bool:
    if type3.name != "fp32" or 2 * A.fmt.mant_bits > 24 \
            or 2 * B.fmt.mant_bits > 24:
        return False
    # Keep every product and partial sum inside the float32 normal-ish range.
    lim_hi, lim_lo = 2.0 ** 50, 2.0 ** -50
    for M in (A.data, B.data):
        mag = np.abs(M[M != 0])
        if mag.size and (mag.max() > lim_hi or mag.min() < lim_lo):
            return False
    return True


def lp_gemm(A: LpMatrix, B: LpMatrix, type3: FormatSpec) -> np.ndarray:
    """C[i,j] = fixed ascending-k accumulation of exact products, with
    conversion to ``type3`` after every addition."""
    if A.shape[1] != B.shape[0]:
        raise ValueError("inner dimensions do not match")
    if 2 * max(A.fmt.mant_bits, B.fmt.mant_bits) > 53:
        raise AssertionError("operand products would not be exact in FP64")
    m, k = A.shape
    n = B.shape[1]
    C = np.zeros((m, n))
    if k == 0:
        return C
    if _fast_fp32_ok(A, B, type3):
        # float32 hardware arithmetic implements exactly the simulated
        # semantics here: products are exact in fp32 (<= 24 significand
        # bits) and each add is a single RNE rounding.
        A32 = A.data.astype(np.float32)
        B32 = B.data.astype(np.float32)
        C32 = np.zeros((m, n), dtype=np.float32)
        for t in range(k):
            C32 += A32[:, t, None] * B32[t, None, :]
        if not np.all(np.isfinite(C32)):
            raise OverflowError("accumulation overflowed fp32")
        return C32.astype(np.float64)
    for t in range(k):
        prod = A.data[:, t, None] * B.data[t, None, :]
        C = _add_round(C, prod, type3)
    return C


def exact_gemm(A: LpMatrix, B: LpMatrix) -> np.ndarray:
    """Exact-value product (object array of Fractions); the rounding-free
    oracle for the error-free accumulation property."""
    if A.shape[1] != B.shape[0]:
        raise ValueError("inner dimensions do not match")
    return exact_matmul(A.data, B.data)
