"""FP64 arithmetic emulated with 32/64-bit integer operations.

All operations work on the IEEE-754 binary64 bit pattern and never touch
hardware floating-point arithmetic.  Results are bitwise identical to
hardware FP64 with round-to-nearest-even on normal-range operands.  Operands
and results outside the normal range (subnormals, infinities, NaN, overflow
or underflow of a result) raise :class:`RangeError` instead of producing
wrong bits; zeros are accepted and follow IEEE sign rules.

The core routines are vectorized over numpy uint64 arrays so the slicing and
accumulation pipeline can run in emulation mode at full-matrix granularity;
the scalar :class:`F64Word` API wraps the same code paths.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RangeError",
    "F64Word",
    "Mant128",
    "mul_mantissa",
    "emu_add",
    "emu_sub",
    "emu_mul",
    "emu_lt",
    "emu_max",
    "emu_ceil_log2abs",
    "emu_scale2",
    "add_arrays",
    "sub_arrays",
    "mul_arrays",
    "scale2_arrays",
    "max_abs",
    "ceil_log2_abs",
]

_U64 = np.uint64
_SIGN = _U64(0x8000000000000000)
_EXPMASK = _U64(0x7FF0000000000000)
_FRACMASK = _U64(0x000FFFFFFFFFFFFF)
_HIDDEN = _U64(1 << 52)
_M32 = _U64(0xFFFFFFFF)


class RangeError(ArithmeticError):
    """Operand or result outside the supported normal FP64 range."""


# ── bit-pattern helpers ──────────────────────────────────────────────


def _f2b(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def _b2f(b: int) -> float:
    return struct.unpack("<d", struct.pack("<Q", b))[0]


def _bits_of(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype=np.float64).view(np.uint64)


def _floats_of(bits: np.ndarray) -> np.ndarray:
    return bits.view(np.float64)


def _check_operands(bits: np.ndarray, allow_zero: bool = True):
    e = (bits & _EXPMASK) >> _U64(52)
    f = bits & _FRACMASK
    bad = e == _U64(2047)
    if allow_zero:
        bad |= (e == _U64(0)) & (f != _U64(0))
    else:
        bad |= e == _U64(0)
    if np.any(bad):
        raise RangeError("operand is not a normal finite FP64 value (or zero)")


def _msb(x: np.ndarray) -> np.ndarray:
    """Index of the highest set bit of each element (x > 0)."""
    x = x.copy()
    r = np.zeros_like(x)
    for sh in (32, 16, 8, 4, 2, 1):
        s = _U64(sh)
        big = (x >> s) != _U64(0)
        step = np.where(big, s, _U64(0))
        x >>= step
        r += step
    return r


def _shift_right_jam(x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """x >> d with any shifted-out bit ORed into bit 0 (d in [0, 63])."""
    lost = (x & ((_U64(1) << d) - _U64(1))) != _U64(0)
    return (x >> d) | lost.astype(_U64)


# ── multiplication ───────────────────────────────────────────────────


@dataclass(frozen=True)
class Mant128:
    """128-bit significand product as four 32-bit words, low to high."""

    parts: tuple

    @property
    def value(self) -> int:
        p = self.parts
        return int(p[0]) | int(p[1]) << 32 | int(p[2]) << 64 | int(p[3]) << 96


def _mul_mantissa_hi_lo(a: np.ndarray, b: np.ndarray):
    """Exact 128-bit product of two 64-bit significands, schoolbook style:
    32-bit halves, four partial products, explicit carry propagation."""
    a_low = a & _M32
    a_high = a >> _U64(32)
    b_low = b & _M32
    b_high = b >> _U64(32)

    p00 = a_low * b_low
    p01 = a_low * b_high
    p10 = a_high * b_low
    p11 = a_high * b_high

    middle = p01 + p10
    carry = np.where(middle < p01, _U64(1) << _U64(32), _U64(0))

    low = p00 + ((middle & _M32) << _U64(32))
    carry = carry + np.where(low < p00, _U64(1), _U64(0))
    high = p11 + (middle >> _U64(32)) + carry
    return high, low


def mul_mantissa(a: int, b: int) -> Mant128:
    """Exact product of two 64-bit unsigned significands."""
    hi, lo = _mul_mantissa_hi_lo(np.array([a], dtype=_U64),
                                 np.array([b], dtype=_U64))
    lo_i, hi_i = int(lo[0]), int(hi[0])
    return Mant128((lo_i & 0xFFFFFFFF, lo_i >> 32,
                    hi_i & 0xFFFFFFFF, hi_i >> 32))


def _mul_core(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_operands(a)
    _check_operands(b)
    sign = (a ^ b) & _SIGN
    za = (a & ~_SIGN) == _U64(0)
    zb = (b & ~_SIGN) == _U64(0)
    zero = za | zb
    # Dead (zero) lanes compute on a dummy 1.0 so range checks stay quiet.
    one = _f2b(1.0)
    aa = np.where(zero, _U64(one), a)
    bb = np.where(zero, _U64(one), b)

    ea = (aa & _EXPMASK) >> _U64(52)
    eb = (bb & _EXPMASK) >> _U64(52)
    ma = (aa & _FRACMASK) | _HIDDEN
    mb = (bb & _FRACMASK) | _HIDDEN

    hi, lo = _mul_mantissa_hi_lo(ma, mb)
    # Product is in [2**104, 2**106); normalize by at most one bit.
    t = (hi >> _U64(41)).astype(_U64) & _U64(1)
    shift = _U64(52) + t
    sig = (hi << (_U64(64) - shift)) | (lo >> shift)
    rem = lo & ((_U64(1) << shift) - _U64(1))
    guard = (rem >> (shift - _U64(1))) & _U64(1)
    sticky = (rem & ((_U64(1) << (shift - _U64(1))) - _U64(1))) != _U64(0)
    up = (guard == _U64(1)) & (sticky | ((sig & _U64(1)) == _U64(1)))
    sig = sig + up.astype(_U64)
    carry = sig == (_U64(1) << _U64(53))
    sig = np.where(carry, sig >> _U64(1), sig)

    exp = ea.astype(np.int64) + eb.astype(np.int64) - 1023 \
        + t.astype(np.int64) + carry.astype(np.int64)
    live = ~zero
    if np.any(live & ((exp < 1) | (exp > 2046))):
        raise RangeError("emulated multiply result outside normal range")
    exp = np.clip(exp, 1, 2046).astype(_U64)
    res = sign | (exp << _U64(52)) | (sig & _FRACMASK)
    return np.where(zero, sign, res)


# ── addition / subtraction ───────────────────────────────────────────


def _add_core(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_operands(a)
    _check_operands(b)
    za = (a & ~_SIGN) == _U64(0)
    zb = (b & ~_SIGN) == _U64(0)
    one = _U64(_f2b(1.0))
    aa = np.where(za, one, a)
    bb = np.where(zb, one, b)

    sa = aa >> _U64(63)
    sb = bb >> _U64(63)
    maga = aa & ~_SIGN
    magb = bb & ~_SIGN
    # Order by magnitude; integer order on the cleared-sign pattern matches
    # float magnitude order.
    swap = magb > maga
    big = np.where(swap, bb, aa)
    small = np.where(swap, aa, bb)
    sbig = big >> _U64(63)
    ebig = (big & _EXPMASK) >> _U64(52)
    esml = (small & _EXPMASK) >> _U64(52)
    mbig = ((big & _FRACMASK) | _HIDDEN) << _U64(10)
    msml = ((small & _FRACMASK) | _HIDDEN) << _U64(10)
    d = np.minimum(ebig - esml, _U64(63))
    msml = _shift_right_jam(msml, d)

    same = sa == sb
    mag = np.where(same, mbig + msml, mbig - msml)
    cancel = ~same & (mag == _U64(0))
    # Normalize so the leading bit sits at position 62 (53 sig + 10 guard).
    safe = np.where(mag == _U64(0), _U64(1) << _U64(62), mag)
    pos = _msb(safe)
    right = pos == _U64(63)
    mag = np.where(right, (mag >> _U64(1)) | (mag & _U64(1)), mag)
    eadj = np.where(right, np.int64(1), np.int64(0))
    left = np.where(pos < _U64(62), _U64(62) - pos, _U64(0))
    mag = mag << left
    eadj = eadj - left.astype(np.int64)

    sig = mag >> _U64(10)
    rem = mag & _U64(1023)
    up = (rem > _U64(512)) | ((rem == _U64(512)) & ((sig & _U64(1)) == _U64(1)))
    sig = sig + up.astype(_U64)
    carry = sig == (_U64(1) << _U64(53))
    sig = np.where(carry, sig >> _U64(1), sig)
    exp = ebig.astype(np.int64) + eadj + carry.astype(np.int64)

    live = ~(za | zb) & ~cancel
    if np.any(live & ((exp < 1) | (exp > 2046))):
        raise RangeError("emulated add result outside normal range")
    exp = np.clip(exp, 1, 2046).astype(_U64)
    res = (sbig << _U64(63)) | (exp << _U64(52)) | (sig & _FRACMASK)

    res = np.where(cancel, _U64(0), res)        # exact cancellation -> +0
    both_zero = za & zb
    res = np.where(za & ~zb, b, res)
    res = np.where(zb & ~za, a, res)
    res = np.where(both_zero, a & b & _SIGN, res)  # -0 only if both -0
    return res


# ── comparison / max / scaling / ceil-log2 ───────────────────────────


def _order_key(bits: np.ndarray) -> np.ndarray:
    b = np.where((bits & ~_SIGN) == _U64(0), _U64(0), bits)  # -0 -> +0
    neg = (b & _SIGN) != _U64(0)
    return np.where(neg, ~b, b | _SIGN)


def _lt_core(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_operands(a)
    _check_operands(b)
    return _order_key(a) < _order_key(b)


def _scale2_core(bits: np.ndarray, t: np.ndarray) -> np.ndarray:
    _check_operands(bits)
    zero = (bits & ~_SIGN) == _U64(0)
    e = ((bits & _EXPMASK) >> _U64(52)).astype(np.int64) + np.asarray(t, np.int64)
    if np.any(~zero & ((e < 1) | (e > 2046))):
        raise RangeError("scale2 result outside normal range")
    e = np.clip(e, 1, 2046).astype(_U64)
    res = (bits & ~_EXPMASK) | (e << _U64(52))
    return np.where(zero, bits, res)


def _ceil_log2_core(bits: np.ndarray) -> np.ndarray:
    _check_operands(bits, allow_zero=False)
    e = ((bits & _EXPMASK) >> _U64(52)).astype(np.int64) - 1023
    frac = bits & _FRACMASK
    return np.where(frac == _U64(0), e, e + 1)


# ── array API (float64 in, float64 out; pure integer inside) ────────


def add_arrays(a, b):
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    a, b = np.broadcast_arrays(a, b)
    return _floats_of(_add_core(_bits_of(a), _bits_of(b))).reshape(a.shape)


def sub_arrays(a, b):
    return add_arrays(a, np.negative(np.asarray(b, np.float64)))


def mul_arrays(a, b):
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    a, b = np.broadcast_arrays(a, b)
    return _floats_of(_mul_core(_bits_of(a), _bits_of(b))).reshape(a.shape)


def scale2_arrays(a, t):
    a = np.asarray(a, np.float64)
    t = np.asarray(t, np.int64)
    a, t = np.broadcast_arrays(a, t)
    return _floats_of(_scale2_core(_bits_of(a), t)).reshape(a.shape)


def max_abs(a, axis=None):
    """max |a_i| via integer comparison of sign-cleared bit patterns."""
    bits = _bits_of(np.asarray(a, np.float64))
    _check_operands(bits)
    return _floats_of(np.max(bits & ~_SIGN, axis=axis))


def ceil_log2_abs(a):
    """ceil(log2 |a|) computed exactly from the bit pattern (a normal)."""
    a = np.asarray(a, np.float64)
    return _ceil_log2_core(_bits_of(a))


# ── scalar API ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class F64Word:
    """An FP64 value held as a 64-bit pattern."""

    bits: int

    def __post_init__(self):
        if not 0 <= self.bits < 1 << 64:
            raise ValueError("bits must fit in 64 bits")

    @classmethod
    def from_float(cls, x: float) -> "F64Word":
        return cls(_f2b(x))

    def to_float(self) -> float:
        return _b2f(self.bits)

    @property
    def sign(self) -> int:
        return self.bits >> 63

    @property
    def biased_exp(self) -> int:
        return (self.bits >> 52) & 0x7FF

    @property
    def fraction(self) -> int:
        return self.bits & 0x000FFFFFFFFFFFFF


def _scalar_bits(x) -> np.ndarray:
    if isinstance(x, F64Word):
        return np.array([x.bits], dtype=_U64)
    return np.array([_f2b(float(x))], dtype=_U64)


def _wrap(bits: np.ndarray) -> F64Word:
    return F64Word(int(bits[0]))


def emu_add(a, b) -> F64Word:
    return _wrap(_add_core(_scalar_bits(a), _scalar_bits(b)))


def emu_sub(a, b) -> F64Word:
    bb = _scalar_bits(b)
    bb ^= _SIGN
    return _wrap(_add_core(_scalar_bits(a), bb))


def emu_mul(a, b) -> F64Word:
    return _wrap(_mul_core(_scalar_bits(a), _scalar_bits(b)))


def emu_lt(a, b) -> bool:
    return bool(_lt_core(_scalar_bits(a), _scalar_bits(b))[0])


def emu_max(a, b) -> F64Word:
    if emu_lt(a, b):
        return b if isinstance(b, F64Word) else F64Word.from_float(float(b))
    return a if isinstance(a, F64Word) else F64Word.from_float(float(a))


def emu_ceil_log2abs(a) -> int:
    return int(_ceil_log2_core(_scalar_bits(a))[0])


def emu_scale2(a, t: int) -> F64Word:
    return _wrap(_scale2_core(_scalar_bits(a), np.array([t], np.int64)))
