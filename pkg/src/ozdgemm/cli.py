"""Command-line front end: deterministic matrix generation, experiment
drivers, and machine-readable reports (JSON for runs, CSV for the
GEMM-count table)."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import __version__, fp64emu
from .formats import FORMATS, get_format
from .lpgemm import LpMatrix, exact_gemm, lp_gemm
from .oracle import max_rel_error, naive_gemm_fp64, ref_gemm
from .ozgemm import GemmConfig, oz_gemm
from .slicing import compute_params, predict_gemm_count, slice_matrix

SCHEMA_VERSION = 1

_TABLE_COLUMNS = [
    ("fp16", "fp32"),
    ("fp16", "fp16"),
    ("fp8e4m3", "fp32"),
    ("fp8e4m3", "fp16"),
    ("fp6e3m2", "fp32"),
    ("fp6e3m2", "fp16"),
]
_TABLE_KS = [8 << i for i in range(16)]  # 8 .. 262144


# ── deterministic matrix generation ─────────────────────────────────


_GAMMA = np.uint64(0x9E3779B97F4A7C15)


def _mix64(z: np.ndarray) -> np.ndarray:
    # uint64 wraparound is the point; silence the overflow warnings.
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def gen_matrix(rows: int, cols: int, seed: int, lo: float, hi: float):
    """Deterministic pseudo-uniform matrix over (lo, hi), SplitMix64 based.

    The stream depends only on (seed, rows, cols) and is identical across
    platforms.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    with np.errstate(over="ignore"):
        s0 = _mix64(np.uint64(seed & (1 << 64) - 1))
        s0 = _mix64(s0 + np.uint64(rows) * _GAMMA)
        s0 = _mix64(s0 + np.uint64(cols) * _GAMMA)
        idx = np.arange(1, rows * cols + 1, dtype=np.uint64)
        z = _mix64(s0 + idx * _GAMMA)
    # (z >> 11) + 0.5 keeps u strictly inside (0, 1).
    u = ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    vals = lo + u * (hi - lo)
    np.clip(vals, np.nextafter(lo, hi), np.nextafter(hi, lo), out=vals)
    return vals.reshape(rows, cols)


def _make_inputs(m, n, k, seed, init):
    if init == "uniform":
        return (gen_matrix(m, k, seed, 1.0, 10.0),
                gen_matrix(k, n, seed + 1, 1.0, 10.0))
    if init == "identity":
        if m != k or k != n:
            raise SystemExit("--init identity requires m == n == k")
        return np.eye(m), np.eye(m)
    if init == "powers2":
        ea = (gen_matrix(m, k, seed, 0.0, 8.0)).astype(np.int64)
        eb = (gen_matrix(k, n, seed + 1, 0.0, 8.0)).astype(np.int64)
        return np.ldexp(1.0, ea), np.ldexp(1.0, eb)
    raise SystemExit(f"unknown --init {init!r}")


# ── report plumbing ─────────────────────────────────────────────────


def _config_dict(cfg: GemmConfig):
    return {
        "type2": cfg.type2.name,
        "type3": cfg.type3.name,
        "k_block": cfg.k_block,
        "fp64_emulation": cfg.fp64_emulation,
        "max_slices": cfg.max_slices,
        "accumulation_order": cfg.accumulation_order,
        "seed": cfg.seed,
    }


def _emit(report: dict, out_path):
    text = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def _cfg_from_args(args) -> GemmConfig:
    return GemmConfig(
        type2=get_format(args.type2),
        type3=get_format(args.type3),
        k_block=args.kblock,
        fp64_emulation=args.fp64emu,
        max_slices=args.max_slices,
        seed=args.seed,
    )


# ── subcommands ─────────────────────────────────────────────────────


def cmd_slices_table(args) -> int:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["type2", "type3", "k", "gemm_count"])
    for t2, t3 in _TABLE_COLUMNS:
        m2 = FORMATS[t2].mant_bits
        m3 = FORMATS[t3].mant_bits
        for k in _TABLE_KS:
            count = predict_gemm_count(53, m2, m3, k)
            writer.writerow([t2, t3, k, "--" if count is None else count])
    return 0


def cmd_gemm(args) -> int:
    cfg = _cfg_from_args(args)
    A, B = _make_inputs(args.m, args.n, args.k, args.seed, args.init)
    t0 = time.perf_counter()
    res = oz_gemm(A, B, cfg)
    wall = time.perf_counter() - t0
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "gemm",
        "m": args.m, "n": args.n, "k": args.k,
        "init": args.init,
        "config": _config_dict(cfg),
        "stats": res.stats.as_dict(),
        "wall_s_total": wall,
    }
    if args.dump:
        np.save(args.dump, res.C)
        report["c_dump"] = args.dump
    _emit(report, args.out)
    return 0


def cmd_accuracy(args) -> int:
    cfg = _cfg_from_args(args)
    A, B = _make_inputs(args.m, args.n, args.k, args.seed, args.init)
    res = oz_gemm(A, B, cfg)
    Cref = ref_gemm(A, B)
    Cnaive = naive_gemm_fp64(A, B)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "accuracy",
        "m": args.m, "n": args.n, "k": args.k,
        "init": args.init,
        "config": _config_dict(cfg),
        "stats": res.stats.as_dict(),
        "err_oz": max_rel_error(res.C, Cref),
        "err_naive": max_rel_error(Cnaive, Cref),
    }
    _emit(report, args.out)
    return 0


def _verify_fp64emu(trials: int, seed: int):
    rng = np.random.default_rng(seed)
    n = trials
    # Biased exponents near 1023 keep sums and products inside the normal
    # range (the emulation rejects subnormal/overflowing results by design).
    bits = (rng.integers(823, 1224, size=(2, n)).astype(np.uint64)
            << np.uint64(52))
    bits |= rng.integers(0, 1 << 52, size=(2, n), dtype=np.int64).astype(np.uint64)
    bits |= rng.integers(0, 2, size=(2, n)).astype(np.uint64) << np.uint64(63)
    a = bits[0].view(np.float64)
    b = bits[1].view(np.float64)
    # Compare bit patterns so -0.0 vs +0.0 mismatches are caught.
    def _nbit(x, y):
        return int(np.sum(np.asarray(x).view(np.uint64)
                          != np.asarray(y).view(np.uint64)))

    failures = 0
    failures += _nbit(fp64emu.add_arrays(a, b), a + b)
    failures += _nbit(fp64emu.sub_arrays(a, b), a - b)
    failures += _nbit(fp64emu.mul_arrays(a, b), a * b)
    ncmp = min(n, 1000)
    lt = np.array([fp64emu.emu_lt(x, y)
                   for x, y in zip(a[:ncmp], b[:ncmp])])
    failures += int(np.sum(lt != (a[:ncmp] < b[:ncmp])))
    return failures, 3 * n + ncmp


def _verify_reconstruction(trials: int, seed: int):
    rng = np.random.default_rng(seed)
    failures = checks = 0
    for t2 in ("fp16", "fp8e4m3"):
        fmt = FORMATS[t2]
        k = 256
        params = compute_params(53, fmt.mant_bits, 24, k)
        rows = max(1, trials // 100)
        X = 1.0 + 9.0 * rng.random((rows, k))
        spread = np.ldexp(X, rng.integers(-30, 31, size=X.shape))
        for M in (X, spread):
            ss = slice_matrix(M, "rows", fmt, params)
            rec = np.zeros_like(M)
            for p in range(ss.s - 1, -1, -1):
                rec = rec + np.ldexp(ss.coeff[p], ss.expo[p][:, None])
            failures += int(np.sum(rec != M))
            checks += M.size
    return failures, checks


def _verify_errorfree(trials: int, seed: int):
    from fractions import Fraction
    rng = np.random.default_rng(seed)
    failures = checks = 0
    k = 128
    rows = min(max(trials // 100, 1), 64)
    for t2, t3 in _TABLE_COLUMNS:
        fmt2, fmt3 = FORMATS[t2], FORMATS[t3]
        params = compute_params(53, fmt2.mant_bits, fmt3.mant_bits, k)
        if not params.feasible:
            continue
        A = 1.0 + 9.0 * rng.random((rows, k))
        B = 1.0 + 9.0 * rng.random((k, rows))
        sa = slice_matrix(A, "rows", fmt2, params)
        sb = slice_matrix(B, "cols", fmt2, params)
        for p in (0, sa.s - 1):
            for q in (0, sb.s - 1):
                la = LpMatrix(sa.coeff[p], fmt2, _validated=True)
                lb = LpMatrix(sb.coeff[q], fmt2, _validated=True)
                G = lp_gemm(la, lb, fmt3)
                X = exact_gemm(la, lb)
                bad = sum(Fraction(g) != x
                          for g, x in zip(G.ravel(), X.ravel()))
                failures += int(bad)
                checks += G.size
    return failures, checks


def cmd_verify(args) -> int:
    suites = {
        "fp64emu": _verify_fp64emu,
        "reconstruction": _verify_reconstruction,
        "errorfree": _verify_errorfree,
    }
    names = list(suites) if args.suite == "all" else [args.suite]
    results = {}
    total_failures = 0
    for name in names:
        failures, checks = suites[name](args.trials, args.seed)
        results[name] = {"checks": checks, "failures": failures,
                         "pass": failures == 0}
        total_failures += failures
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "trials": args.trials,
        "seed": args.seed,
        "suites": results,
        "pass": total_failures == 0,
    }
    _emit(report, args.out)
    return 0 if total_failures == 0 else 1


# ── argument parsing ────────────────────────────────────────────────


def _add_common_gemm_args(p):
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--type2", default="fp16",
                   help="slice storage format (%s)" % ", ".join(FORMATS))
    p.add_argument("--type3", default="fp32", help="accumulation format")
    p.add_argument("--kblock", type=int, default=0,
                   help="inner-product block size (0 = no blocking)")
    p.add_argument("--fp64emu", action="store_true",
                   help="run slicing/accumulation on integer FP64 emulation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-slices", type=int, default=None)
    p.add_argument("--init", choices=("uniform", "identity", "powers2"),
                   default="uniform")
    p.add_argument("--out", default=None, help="write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ozdgemm",
        description="FP64 GEMM emulation from low-precision GEMMs",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("slices-table",
                       help="CSV of minimum GEMM counts per (format, k)")
    p.set_defaults(func=cmd_slices_table)

    p = sub.add_parser("gemm", help="run one emulated DGEMM and report stats")
    _add_common_gemm_args(p)
    p.add_argument("--dump", default=None,
                   help="save the result matrix as .npy here")
    p.set_defaults(func=cmd_gemm)

    p = sub.add_parser("accuracy",
                       help="compare against the correctly-rounded reference")
    _add_common_gemm_args(p)
    p.set_defaults(func=cmd_accuracy)

    p = sub.add_parser("verify", help="run the built-in invariant suites")
    p.add_argument("--suite",
                   choices=("fp64emu", "reconstruction", "errorfree", "all"),
                   default="all")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
