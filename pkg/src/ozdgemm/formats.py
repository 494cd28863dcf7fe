"""Simulated low-precision floating-point formats.

Values of a simulated format are carried inside ordinary float64 scalars or
arrays; a value "is" an fp16/E4M3/... number when it is exactly representable
in that format.  Conversion rounds to nearest, ties to even, and subnormals of
the target format are representable.  Overflow is an error, never a saturation:
the slicing pipeline only ever produces in-range values, so an out-of-range
result indicates a bug upstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FormatSpec",
    "FORMATS",
    "FP64",
    "FP32",
    "FP16",
    "BF16",
    "FP8_E4M3",
    "FP8_E5M2",
    "FP6_E3M2",
    "FP6_E2M3",
    "get_format",
    "cvt",
    "is_representable",
    "mant_bits",
    "unit_roundoff",
]


@dataclass(frozen=True)
class FormatSpec:
    """Descriptor of a (simulated) binary floating-point format.

    ``mant_bits`` counts the significand bits *including* the hidden bit, so
    ``unit_roundoff == 2**-mant_bits``.  ``exp_max``/``exp_min`` bound the
    exponent of normal values (value in [2**e, 2**(e+1)) has exponent e).
    ``max_finite`` is the largest finite magnitude; formats without an
    infinity encoding (``finite_only``) may use the top exponent with a
    restricted significand, which is why it is stored explicitly.
    """

    name: str
    exp_bits: int
    mant_bits: int
    exp_max: int
    exp_min: int
    max_finite: float
    finite_only: bool = False

    def __post_init__(self):
        if self.mant_bits < 1 or self.exp_bits < 2:
            raise ValueError("need mant_bits >= 1 and exp_bits >= 2")

    @property
    def unit_roundoff(self) -> float:
        return 2.0 ** (-self.mant_bits)

    @property
    def min_subnormal(self) -> float:
        return 2.0 ** (self.exp_min - self.mant_bits + 1)

    def __repr__(self):
        return f"FormatSpec({self.name!r})"


def _ieee(name, exp_bits, mant_bits):
    """IEEE-style format: top exponent field reserved for inf/NaN."""
    bias = 2 ** (exp_bits - 1) - 1
    exp_max = bias
    exp_min = 1 - bias
    max_finite = (2.0 - 2.0 ** (1 - mant_bits)) * 2.0 ** exp_max
    return FormatSpec(name, exp_bits, mant_bits, exp_max, exp_min, max_finite)


# OCP 8-bit / 6-bit formats deviate from the IEEE template:
#   E4M3 reclaims the top binade (only S.1111.111 is NaN), so exp_max = 8 and
#   the largest finite value is 1.75 * 2**8 = 448.
#   The FP6 formats encode no inf/NaN at all and use every exponent field.
FP64 = _ieee("fp64", 11, 53)
FP32 = _ieee("fp32", 8, 24)
FP16 = _ieee("fp16", 5, 11)
BF16 = _ieee("bf16", 8, 8)
FP8_E4M3 = FormatSpec("fp8e4m3", 4, 4, exp_max=8, exp_min=-6,
                      max_finite=448.0, finite_only=True)
FP8_E5M2 = _ieee("fp8e5m2", 5, 3)
FP6_E3M2 = FormatSpec("fp6e3m2", 3, 3, exp_max=4, exp_min=-2,
                      max_finite=28.0, finite_only=True)
FP6_E2M3 = FormatSpec("fp6e2m3", 2, 4, exp_max=2, exp_min=0,
                      max_finite=7.5, finite_only=True)

FORMATS = {
    f.name: f
    for f in (FP16, BF16, FP8_E4M3, FP8_E5M2, FP6_E3M2, FP6_E2M3, FP32, FP64)
}


def get_format(name: str) -> FormatSpec:
    try:
        return FORMATS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown format {name!r}; known: {', '.join(FORMATS)}"
        ) from None


def mant_bits(fmt: FormatSpec) -> int:
    return fmt.mant_bits


def unit_roundoff(fmt: FormatSpec) -> float:
    return fmt.unit_roundoff


def cvt(value, fmt: FormatSpec):
    """Round ``value`` (float64 scalar or array) to ``fmt``, ties to even.

    The result is the nearest ``fmt``-representable value, held exactly in a
    float64 container.  Rounding is a single step from the exact input value.

    Raises OverflowError if the rounded magnitude exceeds ``fmt.max_finite``
    and ValueError on NaN or infinite input.
    """
    scalar = np.isscalar(value) or getattr(value, "ndim", 1) == 0
    a = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("cvt requires finite input")
    if fmt.name == "fp64":
        out = a.copy()
        return float(out) if scalar else out

    mag = np.abs(a)
    _, e = np.frexp(mag)  # mag in [2**(e-1), 2**e)
    # Exponent of the rounding quantum: normal grid, floored at the
    # format's subnormal grid.
    t = np.maximum(e - fmt.mant_bits, fmt.exp_min - fmt.mant_bits + 1)
    scaled = np.ldexp(mag, -t)        # exact power-of-two scaling
    rounded = np.rint(scaled)         # round half to even
    out = np.copysign(np.ldexp(rounded, t), a)
    if np.any(np.abs(out) > fmt.max_finite):
        raise OverflowError(f"value overflows {fmt.name}")
    return float(out) if scalar else out


def is_representable(value, fmt: FormatSpec):
    """True where ``value`` is exactly representable in ``fmt``.

    Pure integer test on the FP64 bit pattern: a value is representable iff
    its magnitude does not exceed ``max_finite`` and its significand is a
    multiple of the format's rounding quantum at that exponent.  Raises
    ValueError on NaN or infinite input (mirroring :func:`cvt`).
    """
    a = np.asarray(value, dtype=np.float64)
    bits = np.ascontiguousarray(a).view(np.uint64)
    eb = (bits >> np.uint64(52)) & np.uint64(0x7FF)
    if np.any(eb == np.uint64(2047)):
        raise ValueError("is_representable requires finite input")
    if fmt.name == "fp64":
        ok = np.ones(a.shape, dtype=bool)
    else:
        # The value sits on the format's grid iff the trailing nz bits of its
        # 53-bit significand are zero, where nz follows the quantum exponent
        # max(e + 1 - mant_bits, exp_min - mant_bits + 1), e = eb - 1023.
        # As a function of eb that is 53 - mant_bits above the subnormal
        # threshold e1 and grows by one per exponent step below it; nz >= 54
        # (nothing but zero representable) caps at 53 since the hidden bit is
        # set.  All arithmetic stays in uint64.
        e1 = np.uint64(1023 + fmt.exp_min)
        top = np.uint64(fmt.exp_min - fmt.mant_bits + 1076)
        nz = np.minimum(top - np.minimum(eb, e1), np.uint64(53))
        sig = (bits & np.uint64(0x000FFFFFFFFFFFFF)) | np.uint64(1 << 52)
        aligned = (sig & ((np.uint64(1) << nz) - np.uint64(1))) == np.uint64(0)
        mag = bits & np.uint64(0x7FFFFFFFFFFFFFFF)
        zero = mag == np.uint64(0)
        mag_ok = mag <= np.float64(fmt.max_finite).view(np.uint64)
        ok = zero | (aligned & mag_ok)
    if np.isscalar(value) or a.ndim == 0:
        return bool(ok)
    return ok
