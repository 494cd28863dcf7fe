"""Slicing parameters, feasibility prediction, and error-free decomposition."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ozdgemm.formats import FORMATS
from ozdgemm.fp64emu import RangeError
from ozdgemm.slicing import (SlicingInfeasible, compute_params,
                             predict_gemm_count, predict_slice_count,
                             slice_matrix, slice_vector)

FP16 = FORMATS["fp16"]
E4M3 = FORMATS["fp8e4m3"]


# ── parameter recursion, hand-derived examples ──────────────────────


def test_params_fp16_fp32_k1024():
    # gamma = ceil(53 - (24 - 10)/2) = 46; xi = 53 - 11 = 42.
    p = compute_params(53, 11, 24, 1024)
    assert (p.gamma, p.xi, p.rho) == (46, 42, 46)
    assert p.slice_width == 7
    assert predict_slice_count(p) == 7


def test_params_e4m3_fp32_k16():
    # gamma = ceil(53 - (24 - 4)/2) = 43; xi = 53 - 4 = 49 dominates.
    p = compute_params(53, 4, 24, 16)
    assert (p.gamma, p.xi, p.rho) == (43, 49, 49)
    assert p.slice_width == 4
    assert predict_slice_count(p) == 11


def test_params_fp16_fp16_k4096_infeasible():
    # gamma = ceil(53 - (11 - 12)/2) = 54 > 53: no bits left per slice.
    p = compute_params(53, 11, 11, 4096)
    assert p.gamma == 54 and not p.feasible
    assert predict_slice_count(p) is None
    assert predict_gemm_count(53, 11, 11, 4096) is None


def test_params_non_power_of_two_k():
    p = compute_params(53, 11, 24, 1000)
    assert p.gamma == math.ceil(53 - (24 - math.log2(1000)) / 2)


def test_params_validation():
    with pytest.raises(ValueError):
        compute_params(53, 11, 24, 0)
    with pytest.raises(ValueError):
        compute_params(53, 0, 24, 8)


def test_gemm_count_spot_values():
    assert predict_gemm_count(53, 11, 24, 8) == 25
    assert predict_gemm_count(53, 11, 24, 512) == 49
    assert predict_gemm_count(53, 11, 24, 32768) == 121
    assert predict_gemm_count(53, 11, 24, 131072) == 196
    assert predict_gemm_count(53, 4, 24, 8) == 121
    assert predict_gemm_count(53, 4, 24, 131072) == 196
    assert predict_gemm_count(53, 11, 11, 1024) == 2809
    assert predict_gemm_count(53, 3, 24, 8) == 196


# ── decomposition exactness ─────────────────────────────────────────


def reconstruct(coeffs, expos):
    rec = np.zeros_like(coeffs[0])
    for c, e in zip(coeffs, expos):
        rec = rec + np.ldexp(c, np.asarray(e)[..., None]
                             if np.ndim(e) else e)
    return rec


@pytest.mark.parametrize("fmt", [FP16, E4M3], ids=lambda f: f.name)
@pytest.mark.parametrize("k", [8, 64, 1024])
def test_vector_reconstruction_bitwise(fmt, k):
    rng = np.random.default_rng(k)
    x = 1.0 + 9.0 * rng.random(k)
    p = compute_params(53, fmt.mant_bits, 24, k)
    coeffs, expos = slice_vector(x, fmt, p)
    rec = np.zeros(k)
    for c, e in zip(coeffs, expos):
        rec = rec + np.ldexp(c, e)
    assert np.array_equal(rec.view(np.uint64), x.view(np.uint64))


def test_slices_are_representable_and_exponents_decrease():
    rng = np.random.default_rng(0)
    x = 1.0 + 9.0 * rng.random(256)
    p = compute_params(53, 11, 24, 256)
    coeffs, expos = slice_vector(x, FP16, p)
    from ozdgemm.formats import is_representable
    for c in coeffs:
        assert np.all(is_representable(c, FP16))
    assert all(a > b for a, b in zip(expos, expos[1:]))


def test_residual_after_each_slice_is_exact():
    # Summing back p slices leaves exactly the tail the next slices encode.
    rng = np.random.default_rng(5)
    x = 1.0 + 9.0 * rng.random(64)
    p = compute_params(53, 11, 24, 64)
    coeffs, expos = slice_vector(x, FP16, p)
    residual = x.copy()
    for c, e in zip(coeffs, expos):
        residual = residual - np.ldexp(c, e)   # exact: disjoint bit ranges
    assert np.all(residual == 0)


def test_exponent_spread_inputs():
    rng = np.random.default_rng(9)
    k = 128
    x = np.ldexp(1.0 + 9.0 * rng.random(k), rng.integers(-400, 401, size=k))
    p = compute_params(53, 11, 24, k)
    coeffs, expos = slice_vector(x, FP16, p)
    rec = np.zeros(k)
    for c, e in zip(coeffs, expos):
        rec = rec + np.ldexp(c, e)
    assert np.array_equal(rec.view(np.uint64), x.view(np.uint64))


def test_zero_rows_and_columns():
    M = np.zeros((3, 16))
    M[1] = 1.0 + np.arange(16) / 7
    p = compute_params(53, 11, 24, 16)
    ss = slice_matrix(M, "rows", FP16, p)
    rec = reconstruct(ss.coeff, ss.expo)
    assert np.array_equal(rec, M)
    assert ss.s >= 1


def test_all_zero_matrix():
    p = compute_params(53, 11, 24, 8)
    ss = slice_matrix(np.zeros((4, 8)), "rows", FP16, p)
    assert ss.s == 0 and ss.coeff == []


# ── slice-count prediction vs measurement ───────────────────────────


@pytest.mark.parametrize("fmt,k", [(FP16, 64), (FP16, 1024),
                                   (E4M3, 64), (E4M3, 1024)],
                         ids=lambda v: getattr(v, "name", v))
def test_prediction_exact_on_full_mantissa_single_binade(fmt, k):
    # Fully filled 53-bit significands in one binade: the worst case the
    # predictor is built for, with no cross-row exponent slack.
    rng = np.random.default_rng(99)
    bits = rng.integers(0, 1 << 52, size=k, dtype=np.int64).astype(np.uint64)
    bits |= np.uint64(1023) << np.uint64(52)
    bits |= np.uint64(1)                      # force the last bit: 53 bits used
    x = bits.view(np.float64)
    p = compute_params(53, fmt.mant_bits, 24, k)
    coeffs, _ = slice_vector(x, fmt, p)
    assert len(coeffs) == predict_slice_count(p)


@pytest.mark.parametrize("fmt,k", [(FP16, 256), (E4M3, 256)],
                         ids=lambda v: getattr(v, "name", v))
def test_uniform_inputs_close_to_prediction(fmt, k):
    # Multi-binade uniform data can straddle one extra slice boundary.
    rng = np.random.default_rng(4)
    x = 1.0 + 9.0 * rng.random(k)
    p = compute_params(53, fmt.mant_bits, 24, k)
    coeffs, _ = slice_vector(x, fmt, p)
    pred = predict_slice_count(p)
    assert pred <= len(coeffs) <= pred + 1


# ── emulation-mode equivalence ──────────────────────────────────────


@pytest.mark.parametrize("fmt", [FP16, E4M3], ids=lambda f: f.name)
def test_emu_mode_bitwise_identical(fmt):
    rng = np.random.default_rng(21)
    M = 1.0 + 9.0 * rng.random((8, 128))
    p = compute_params(53, fmt.mant_bits, 24, 128)
    a = slice_matrix(M, "rows", fmt, p, arith="fp64")
    b = slice_matrix(M, "rows", fmt, p, arith="emu")
    assert a.s == b.s
    for ca, cb in zip(a.coeff, b.coeff):
        assert np.array_equal(ca.view(np.uint64), cb.view(np.uint64))
    for ea, eb in zip(a.expo, b.expo):
        assert np.array_equal(ea, eb)


def test_cols_orientation_matches_transposed_rows():
    rng = np.random.default_rng(31)
    M = 1.0 + 9.0 * rng.random((16, 24))
    p = compute_params(53, 11, 24, 16)
    cols = slice_matrix(M, "cols", FP16, p)
    rows = slice_matrix(np.ascontiguousarray(M.T), "rows", FP16, p)
    assert cols.s == rows.s
    for cc, cr in zip(cols.coeff, rows.coeff):
        assert np.array_equal(cc, cr.T)


# ── errors ──────────────────────────────────────────────────────────


def test_infeasible_raises():
    p = compute_params(53, 11, 11, 4096)
    with pytest.raises(SlicingInfeasible):
        slice_vector(np.ones(4096), FP16, p)


def test_rejects_non_finite_and_subnormal():
    p = compute_params(53, 11, 24, 4)
    with pytest.raises(ValueError):
        slice_vector(np.array([1.0, np.inf, 1.0, 1.0]), FP16, p)
    with pytest.raises(RangeError):
        slice_vector(np.array([1.0, 5e-324, 1.0, 1.0]), FP16, p)


def test_bad_arguments():
    p = compute_params(53, 11, 24, 8)
    with pytest.raises(ValueError):
        slice_matrix(np.ones((2, 8)), "diag", FP16, p)
    with pytest.raises(ValueError):
        slice_vector(np.ones((2, 8)), FP16, p)
    with pytest.raises(ValueError):
        slice_matrix(np.ones((2, 8)), "rows", FP16, p, arith="fp32")


@given(st.integers(min_value=1, max_value=4096),
       st.sampled_from(["fp16", "bf16", "fp8e4m3", "fp8e5m2"]))
@settings(max_examples=100, deadline=None)
def test_reconstruction_property(k, fmt_name):
    fmt = FORMATS[fmt_name]
    p = compute_params(53, fmt.mant_bits, 24, k)
    rng = np.random.default_rng(k)
    x = np.ldexp(rng.random(min(k, 64)) * 2 - 1,
                 rng.integers(-100, 101, size=min(k, 64)))
    x[x == 0] = 1.0
    coeffs, expos = slice_vector(x, fmt, p)
    rec = np.zeros_like(x)
    for c, e in zip(coeffs, expos):
        rec = rec + np.ldexp(c, e)
    assert np.array_equal(rec.view(np.uint64), x.view(np.uint64))
