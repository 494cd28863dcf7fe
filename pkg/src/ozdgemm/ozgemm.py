"""FP64 GEMM emulation via slice-decomposed low-precision GEMMs.

``oz_gemm`` slices both operands along the inner dimension, computes every
slice-pair product with the simulated low-precision GEMM, rescales each
product by the slice exponents (exact power-of-two scaling), and accumulates
the terms in FP64 in a fixed order: smallest-magnitude terms first.  With
``fp64_emulation`` enabled the slicing and accumulation arithmetic runs
entirely on the integer-based FP64 emulation and produces bitwise-identical
results.

Optional inner-product-wise blocking partitions k into blocks of ``k_block``,
applies the scheme per block, and adds the block results in FP64 in ascending
block order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import fp64emu
from .formats import FormatSpec
from .lpgemm import LpMatrix, lp_gemm
from .slicing import (SlicingInfeasible, compute_params, predict_gemm_count,
                      slice_matrix)

__all__ = [
    "DimensionError",
    "GemmConfig",
    "BlockStats",
    "OzStats",
    "OzResult",
    "transpose",
    "oz_gemm",
    "oz_gemm_count",
]

_ACC_ORDERS = ("smallest-first", "largest-first")


class DimensionError(ValueError):
    """Operand shapes do not conform."""


@dataclass(frozen=True)
class GemmConfig:
    """Configuration of one emulated DGEMM run.

    ``k_block == 0`` disables inner-product-wise blocking.  ``max_slices``
    caps the slice count per matrix (None = keep all slices, the exact
    default).  ``accumulation_order`` fixes the order in which scaled
    slice-pair terms are added.
    """

    type2: FormatSpec
    type3: FormatSpec
    k_block: int = 0
    fp64_emulation: bool = False
    max_slices: int | None = None
    accumulation_order: str = "smallest-first"
    seed: int = 0

    def __post_init__(self):
        if self.k_block < 0:
            raise ValueError("k_block must be >= 0")
        if self.max_slices is not None and self.max_slices < 1:
            raise ValueError("max_slices must be >= 1")
        if self.accumulation_order not in _ACC_ORDERS:
            raise ValueError(
                f"accumulation_order must be one of {_ACC_ORDERS}"
            )


@dataclass
class BlockStats:
    k_lo: int
    k_hi: int
    s_x: int
    s_y: int
    gemms: int


@dataclass
class OzStats:
    """Hardware-independent cost tallies plus wall-clock phase times."""

    blocks: list = field(default_factory=list)
    gemm_count: int = 0
    slicing_ops: int = 0
    gemm_ops: int = 0
    accum_ops: int = 0
    t_slice: float = 0.0
    t_gemm: float = 0.0
    t_accum: float = 0.0

    def as_dict(self):
        return {
            "blocks": [vars(b) for b in self.blocks],
            "gemm_count": self.gemm_count,
            "element_ops": {
                "slicing": self.slicing_ops,
                "gemm": self.gemm_ops,
                "accumulation": self.accum_ops,
            },
            "wall_s": {
                "slicing": self.t_slice,
                "gemm": self.t_gemm,
                "accumulation": self.t_accum,
            },
        }


@dataclass
class OzResult:
    C: np.ndarray
    stats: OzStats


def transpose(M):
    """Exact element permutation (i, j) -> (j, i)."""
    return np.ascontiguousarray(np.asarray(M).T)


def _blocks(k: int, k_block: int):
    if k_block == 0:
        return [(0, k)]
    return [(lo, min(lo + k_block, k)) for lo in range(0, k, k_block)]


def _scale_terms_exact(G, E, emu: bool):
    """G * 2**E elementwise; exact by construction, verified."""
    if emu:
        return fp64emu.scale2_arrays(G, E)
    T = np.ldexp(G, E)
    ok = np.isfinite(T) & ((T == 0) | (np.abs(T) >= 2.0 ** -1022))
    if not np.all(ok):
        raise fp64emu.RangeError("scaled term left the FP64 normal range")
    return T


def oz_gemm(A, B, cfg: GemmConfig) -> OzResult:
    """C = A @ B with FP64 accuracy using only low-precision GEMMs."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise DimensionError(
            f"cannot multiply shapes {A.shape} and {B.shape}"
        )
    m, k = A.shape
    n = B.shape[1]
    if cfg.k_block > k:
        raise ValueError("k_block exceeds k")
    emu = cfg.fp64_emulation
    arith = "emu" if emu else "fp64"
    stats = OzStats()
    C = np.zeros((m, n))

    for lo, hi in _blocks(k, cfg.k_block):
        kb = hi - lo
        params = compute_params(53, cfg.type2.mant_bits,
                                cfg.type3.mant_bits, kb)
        t0 = time.perf_counter()
        # Rows of A and columns of B are the inner-product vectors; the
        # column slicing transposes internally so both operands are walked
        # along contiguous memory (plumbing only, no numerical effect).
        sa = slice_matrix(A[:, lo:hi], "rows", cfg.type2, params, arith)
        sb = slice_matrix(B[lo:hi, :], "cols", cfg.type2, params, arith)
        t1 = time.perf_counter()

        sx = min(sa.s, cfg.max_slices or sa.s)
        sy = min(sb.s, cfg.max_slices or sb.s)
        stats.t_slice += t1 - t0
        stats.slicing_ops += 4 * (sa.s * m * kb + sb.s * kb * n)
        stats.blocks.append(BlockStats(lo, hi, sx, sy, sx * sy))
        stats.gemm_count += sx * sy

        pairs = [(p, q) for p in range(sx) for q in range(sy)]
        if cfg.accumulation_order == "smallest-first":
            pairs.sort(key=lambda pq: (-(pq[0] + pq[1]), pq[0], pq[1]))
        else:
            pairs.sort(key=lambda pq: (pq[0] + pq[1], pq[0], pq[1]))

        Cb = np.zeros((m, n))
        for p, q in pairs:
            t2 = time.perf_counter()
            G = lp_gemm(LpMatrix(sa.coeff[p], cfg.type2, _validated=True),
                        LpMatrix(sb.coeff[q], cfg.type2, _validated=True),
                        cfg.type3)
            t3 = time.perf_counter()
            E = sa.expo[p][:, None] + sb.expo[q][None, :]
            T = _scale_terms_exact(G, E, emu)
            if emu:
                Cb = fp64emu.add_arrays(Cb, T)
            else:
                Cb = Cb + T
            t4 = time.perf_counter()
            stats.t_gemm += t3 - t2
            stats.t_accum += t4 - t3
            stats.gemm_ops += 2 * m * n * kb
            stats.accum_ops += 2 * m * n
        t5 = time.perf_counter()
        if emu:
            C = fp64emu.add_arrays(C, Cb)
        else:
            C = C + Cb
        stats.accum_ops += m * n
        stats.t_accum += time.perf_counter() - t5

    return OzResult(C, stats)


def oz_gemm_count(m: int, n: int, k: int, cfg: GemmConfig) -> int:
    """Predicted GEMM invocations for fully-filled-mantissa inputs."""
    kb = cfg.k_block if cfg.k_block else k
    per_block = predict_gemm_count(53, cfg.type2.mant_bits,
                                   cfg.type3.mant_bits, kb)
    if per_block is None:
        raise SlicingInfeasible(
            f"{cfg.type2.name}/{cfg.type3.name} infeasible at k_block={kb}"
        )
    nblocks = -(-k // kb)
    return nblocks * per_block
