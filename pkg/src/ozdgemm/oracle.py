"""Correctly-rounded reference GEMM and error metrics.

``ref_gemm`` computes every dot product exactly (integer fixed-point, no
rounding anywhere) and rounds once to FP64, which is strictly stronger than
a 128-bit floating-point reference.  ``naive_gemm_fp64`` is the plain
triple-loop FP64 baseline with ascending-k sequential accumulation.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

__all__ = [
    "ref_gemm",
    "naive_gemm_fp64",
    "max_rel_error",
    "exact_matmul",
    "round_scaled_int",
]

# Limb width for the fixed-point decomposition.  With 19-bit limbs the limb
# products fit 38 bits, so a k-fold accumulation stays exact in float64
# (38 + log2 k <= 52 for k <= 16384) and each partial matmul can run through
# BLAS dgemm.
_LIMB_BITS = 19
_MAX_WIDTH = 420          # widest integer significand handled by limbs
_MAX_LIMB_K = 16384


def _decompose_limbs(M: np.ndarray):
    """Split M elementwise into signed integer limbs.

    Returns (limbs, scale): M == (sum_j limbs[j] * 2**(j*_LIMB_BITS)) * 2**-scale
    with every limb magnitude < 2**_LIMB_BITS.  Exact for any finite input
    whose global exponent spread fits _MAX_WIDTH bits.
    """
    mag = np.abs(M)
    nz = mag > 0
    if not np.any(nz):
        return [np.zeros(M.shape, dtype=np.float64)], 0
    _, e = np.frexp(mag)
    e = e[nz]
    scale = int(53 - e.min())          # M * 2**scale is integral
    width = int(e.max()) + scale
    if width > _MAX_WIDTH:
        return None, None
    sign = np.where(M < 0, -1.0, 1.0)
    nlimbs = -(-width // _LIMB_BITS)
    limbs = []
    rem = mag.astype(np.float64, copy=True)
    for j in range(nlimbs - 1, -1, -1):
        shift = j * _LIMB_BITS - scale
        q = np.floor(np.ldexp(rem, -shift))   # top limb bits, exact
        rem = rem - np.ldexp(q, shift)        # exact: removes those bits
        limbs.append(q)
    assert not np.any(rem), "limb decomposition left a residue"
    limbs.reverse()
    return [l * sign for l in limbs], scale


def _exact_matmul_limbs(A: np.ndarray, B: np.ndarray):
    la, sa = _decompose_limbs(A)
    if la is None:
        return None
    lb, sb = _decompose_limbs(B)
    if lb is None:
        return None
    k = A.shape[1]
    if k > _MAX_LIMB_K:
        return None
    # Partial matmuls are exact in float64: limb products < 2**38 and the
    # k-fold sums stay below 2**53.
    ndiag = len(la) + len(lb) - 1
    diags = [None] * ndiag
    for i, ai in enumerate(la):
        for j, bj in enumerate(lb):
            p = (ai @ bj).astype(np.int64)
            d = i + j
            diags[d] = p if diags[d] is None else diags[d] + p
    total = np.zeros(diags[0].shape, dtype=object)
    for d, p in enumerate(diags):
        total += p.astype(object) << (d * _LIMB_BITS)
    return total, -(sa + sb)


def _exact_matmul_frac(A: np.ndarray, B: np.ndarray):
    """Fallback exact matmul via rational arithmetic (slow, small inputs)."""
    m, k = A.shape
    n = B.shape[1]
    Af = [[Fraction(x) for x in row] for row in A]
    Bf = [[Fraction(x) for x in row] for row in B]
    out = np.empty((m, n), dtype=object)
    for i in range(m):
        for j in range(n):
            out[i, j] = sum((Af[i][t] * Bf[t][j] for t in range(k)),
                            Fraction(0))
    return out


def exact_matmul(A, B):
    """Exact product of two float64 matrices as an object array of Fractions."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[0]:
        raise ValueError("inner dimensions do not match")
    if A.shape[1] == 0:
        return np.full((A.shape[0], B.shape[1]), Fraction(0), dtype=object)
    res = _exact_matmul_limbs(A, B)
    if res is None:
        return _exact_matmul_frac(A, B)
    total, t = res
    out = np.empty(total.shape, dtype=object)
    flat_in = total.ravel()
    flat_out = out.ravel()
    if t >= 0:
        for i, n in enumerate(flat_in):
            flat_out[i] = Fraction(int(n) << t)
    else:
        den = 1 << (-t)
        for i, n in enumerate(flat_in):
            flat_out[i] = Fraction(int(n), den)
    return out


def round_scaled_int(n: int, t: int) -> float:
    """Correctly rounded (RNE) float64 value of n * 2**t."""
    if n == 0:
        return 0.0
    sign = -1.0 if n < 0 else 1.0
    n = abs(n)
    sh = n.bit_length() - 53
    if sh > 0:
        q, r = n >> sh, n & ((1 << sh) - 1)
        half = 1 << (sh - 1)
        if r > half or (r == half and q & 1):
            q += 1
        n, t = q, t + sh
    try:
        val = math.ldexp(n, t)
    except OverflowError:
        raise OverflowError("exact dot product exceeds FP64 range") from None
    if math.isinf(val):
        raise OverflowError("exact dot product exceeds FP64 range")
    return sign * val


def ref_gemm(A, B):
    """Correctly rounded FP64 GEMM: exact dot products, one final rounding."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("ref_gemm requires finite inputs")
    if A.shape[1] != B.shape[0]:
        raise ValueError("inner dimensions do not match")
    if A.shape[1] == 0:
        return np.zeros((A.shape[0], B.shape[1]))
    res = _exact_matmul_limbs(A, B)
    if res is not None:
        total, t = res
        out = np.empty(total.shape, dtype=np.float64)
        flat_in = total.ravel()
        flat_out = out.ravel()
        for i, n in enumerate(flat_in):
            flat_out[i] = round_scaled_int(int(n), t)
        return out
    frac = exact_matmul(A, B)
    out = np.empty(frac.shape, dtype=np.float64)
    for idx, f in np.ndenumerate(frac):
        # Fraction -> float is correctly rounded (integer true division).
        out[idx] = float(f)
    return out


def naive_gemm_fp64(A, B):
    """Triple-loop FP64 GEMM, sequential accumulation in ascending k."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[0]:
        raise ValueError("inner dimensions do not match")
    m, k = A.shape
    n = B.shape[1]
    C = np.zeros((m, n))
    for t in range(k):
        C += A[:, t, None] * B[t, None, :]
    return C


def max_rel_error(C, Cref) -> float:
    """max_ij |C_ij - Cref_ij| / |Cref_ij| with FP64 differences."""
    C = np.asarray(C, dtype=np.float64)
    Cref = np.asarray(Cref, dtype=np.float64)
    if C.shape != Cref.shape:
        raise ValueError("shape mismatch")
    if np.any(Cref == 0):
        raise ZeroDivisionError(
            "reference entry is zero; relative error undefined"
        )
    return float(np.max(np.abs(C - Cref) / np.abs(Cref)))
