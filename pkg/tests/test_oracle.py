"""Correctly rounded reference GEMM, exact rational matmul, and baselines."""

from fractions import Fraction

import numpy as np
import pytest

from ozdgemm.oracle import (exact_matmul, max_rel_error, naive_gemm_fp64,
                            ref_gemm, round_scaled_int)


def test_exact_matmul_matches_fraction_arithmetic():
    rng = np.random.default_rng(1)
    A = rng.uniform(-10, 10, (8, 12))
    B = rng.uniform(-10, 10, (12, 6))
    X = exact_matmul(A, B)
    for i in range(8):
        for j in range(6):
            want = sum((Fraction(A[i, t]) * Fraction(B[t, j])
                        for t in range(12)), Fraction(0))
            assert X[i, j] == want


def test_exact_matmul_wide_exponent_spread_uses_fraction_fallback():
    A = np.array([[1e300, 1e-300]])
    B = np.array([[1e-300], [1e300]])
    X = exact_matmul(A, B)
    assert X[0, 0] == Fraction(1e300) * Fraction(1e-300) * 2


def test_ref_gemm_catastrophic_cancellation():
    # Exact dot product is 1; plain sequential FP64 loses it entirely.
    A = np.array([[1e16, 1.0, -1e16]])
    B = np.array([[1.0], [1.0], [1.0]])
    assert ref_gemm(A, B)[0, 0] == 1.0
    assert naive_gemm_fp64(A, B)[0, 0] == 0.0


def test_ref_gemm_matches_fraction_rounding():
    rng = np.random.default_rng(2)
    A = rng.uniform(-5, 5, (16, 32))
    B = rng.uniform(-5, 5, (32, 16))
    got = ref_gemm(A, B)
    X = exact_matmul(A, B)
    for idx, f in np.ndenumerate(X):
        # Fraction -> float is correctly rounded: independent cross-check.
        assert got[idx] == float(f)


def test_ref_gemm_exponent_spread():
    rng = np.random.default_rng(3)
    A = np.ldexp(rng.uniform(1, 2, (4, 8)), rng.integers(-40, 41, (4, 8)))
    B = np.ldexp(rng.uniform(1, 2, (8, 4)), rng.integers(-40, 41, (8, 4)))
    got = ref_gemm(A, B)
    X = exact_matmul(A, B)
    for idx, f in np.ndenumerate(X):
        assert got[idx] == float(f)


def test_round_scaled_int_matches_fraction():
    rng = np.random.default_rng(4)
    for _ in range(2000):
        # Compose >64-bit integers from two 62-bit draws.
        n = (int(rng.integers(0, 1 << 62)) << int(rng.integers(0, 16))) \
            + int(rng.integers(0, 1 << 62))
        if rng.integers(0, 2):
            n = -n
        t = int(rng.integers(-120, 60))
        assert round_scaled_int(n, t) == float(Fraction(n) * Fraction(2) ** t)


def test_round_scaled_int_ties_to_even():
    # 2^53 + 1 is a tie between 2^53 and 2^53 + 2; even wins.
    assert round_scaled_int((1 << 53) + 1, 0) == float(1 << 53)
    assert round_scaled_int((1 << 53) + 3, 0) == float((1 << 53) + 4)
    assert round_scaled_int(-((1 << 53) + 1), 0) == -float(1 << 53)
    assert round_scaled_int(0, 100) == 0.0


def test_round_scaled_int_overflow():
    with pytest.raises(OverflowError):
        round_scaled_int(1, 2000)


def test_naive_gemm_sequential_semantics():
    # Vectorized implementation must equal the literal triple loop.
    rng = np.random.default_rng(5)
    A = rng.uniform(-1, 1, (5, 9))
    B = rng.uniform(-1, 1, (9, 7))
    got = naive_gemm_fp64(A, B)
    for i in range(5):
        for j in range(7):
            acc = 0.0
            for t in range(9):
                acc += A[i, t] * B[t, j]
            assert got[i, j] == acc


def test_max_rel_error():
    Cref = np.array([[1.0, 2.0], [4.0, -8.0]])
    C = Cref * (1 + 1e-10)
    assert max_rel_error(C, Cref) == pytest.approx(1e-10, rel=1e-3)
    assert max_rel_error(Cref, Cref) == 0.0
    with pytest.raises(ZeroDivisionError):
        max_rel_error(np.ones((1, 1)), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        max_rel_error(np.ones((1, 2)), np.ones((2, 1)))


def test_empty_inner_dimension():
    assert np.array_equal(ref_gemm(np.zeros((2, 0)), np.zeros((0, 3))),
                          np.zeros((2, 3)))
