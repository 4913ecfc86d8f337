"""Command-line harness: cached table building, verification suites, and
regime sweeps with deterministic CSV/JSON reporting.

Every subcommand writes a CSV report (fixed column order, 17 significant
digits, '.' decimal separator) and a JSON summary with the schema
{"schema_version", "command", "params", "results", "tolerances",
"wall_time"}. Identical flags against the same cache produce byte-identical
CSV. Exit status: 0 on success, 1 when a numerical tolerance fails (the
failing row is printed to stderr), 2 on usage errors.
"""

import argparse
import json
import math
import multiprocessing
import os
import struct
import sys
import time

import numpy as np

from apvar import __version__
from apvar.arith import ArithTables, build_arith_tables
from apvar.forms import HeckeTable, delta_coefficients_exact, hecke_normalized
from apvar.specfun import SmoothWeight, mellin_barnes_check
from apvar.variance import _default_c_hat, default_weight, regime_report
from apvar.voronoi import voronoi_check_cusp, voronoi_check_divisor

CACHE_MAGIC = b"APVARTAB"
CACHE_VERSION = 1
CACHE_ENV = "APVAR_CACHE_DIR"
JSON_SCHEMA = 1

_U64 = (1 << 64) - 1
_MOD128 = 1 << 128


def _fmt(x):
    """Deterministic float formatting: 17 significant digits."""
    return "%.17g" % float(x)


# ---------------------------------------------------------------------------
# Cache file
# ---------------------------------------------------------------------------

def _spf_sieve(n_max):
    """Smallest-prime-factor table (uint32), index 0..n_max."""
    spf = np.zeros(n_max + 1, dtype=np.uint32)
    spf[1:] = np.arange(1, n_max + 1, dtype=np.uint32)
    for p in range(2, int(math.isqrt(n_max)) + 1):
        if spf[p] == p:
            block = spf[p * p::p]
            block[block == np.arange(p * p, n_max + 1, p, dtype=np.uint32)] \
                = p
    return spf


def cache_payload(tables, tau_exact):
    """Serialize the tables into the cache byte layout (without checksum).

    Layout: magic, u16 version, u64 n_max, then little-endian arrays over
    n = 1..n_max: divisor counts (u32), Mobius (i8), totients (u64), and
    the exact Delta coefficients as 128-bit two's complement stored low
    64 bits then high 64 bits.
    """
    n = tables.n_max
    parts = [CACHE_MAGIC, struct.pack("<H", CACHE_VERSION),
             struct.pack("<Q", n)]
    parts.append(np.ascontiguousarray(
        tables.tau[1:n + 1], dtype="<u4").tobytes())
    parts.append(np.ascontiguousarray(
        tables.mu[1:n + 1], dtype="i1").tobytes())
    parts.append(np.ascontiguousarray(
        tables.phi[1:n + 1], dtype="<u8").tobytes())
    words = np.empty(2 * n, dtype="<u8")
    for i, t in enumerate(tau_exact[1:n + 1]):
        m = t % _MOD128
        words[2 * i] = m & _U64
        words[2 * i + 1] = m >> 64
    parts.append(words.tobytes())
    return b"".join(parts)


def _checksum(payload):
    return int(np.frombuffer(payload, dtype=np.uint8).sum(dtype=np.uint64))


def write_cache(path, tables, tau_exact):
    """Write the cache file, returning (n_bytes, checksum)."""
    payload = cache_payload(tables, tau_exact)
    csum = _checksum(payload)
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<Q", csum))
    return len(payload) + 8, csum


def read_cache(path):
    """Load a cache file back into (ArithTables, HeckeTable).

    Raises ValueError on bad magic, version mismatch or checksum failure.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 26 or blob[:8] != CACHE_MAGIC:
        raise ValueError("%s: not a table cache (bad magic)" % path)
    version, = struct.unpack_from("<H", blob, 8)
    if version != CACHE_VERSION:
        raise ValueError("%s: cache version %d, expected %d"
                         % (path, version, CACHE_VERSION))
    csum, = struct.unpack_from("<Q", blob, len(blob) - 8)
    payload = blob[:-8]
    if _checksum(payload) != csum:
        raise ValueError("%s: checksum mismatch" % path)
    n, = struct.unpack_from("<Q", blob, 10)
    off = 18
    tau = np.zeros(n + 1, dtype=np.uint32)
    tau[1:] = np.frombuffer(payload, "<u4", n, off)
    off += 4 * n
    mu = np.zeros(n + 1, dtype=np.int8)
    mu[1:] = np.frombuffer(payload, "i1", n, off)
    off += n
    phi = np.zeros(n + 1, dtype=np.uint64)
    phi[1:] = np.frombuffer(payload, "<u8", n, off)
    off += 8 * n
    words = np.frombuffer(payload, "<u8", 2 * n, off)
    tau_exact = [0] * (n + 1)
    for i in range(n):
        m = int(words[2 * i]) | (int(words[2 * i + 1]) << 64)
        if m >= _MOD128 // 2:
            m -= _MOD128
        tau_exact[i + 1] = m
    tables = ArithTables(n_max=n, tau=tau, phi=phi, mu=mu,
                         spf=_spf_sieve(n))
    table = HeckeTable(n_max=n, k=12, tau_exact=tau_exact,
                       a_norm=hecke_normalized(tau_exact))
    return tables, table


def _cache_dir(args):
    return args.cache_dir or os.environ.get(CACHE_ENV) or os.getcwd()


def _cache_file(directory, n_max):
    return os.path.join(directory, "apvar-%d.tab" % n_max)


def _load_tables(n_max, directory):
    """(ArithTables, HeckeTable) covering n <= n_max, from cache if found."""
    candidates = []
    if os.path.isdir(directory):
        for name in os.listdir(directory):
            if name.startswith("apvar-") and name.endswith(".tab"):
                try:
                    m = int(name[6:-4])
                except ValueError:
                    continue
                if m >= n_max:
                    candidates.append(m)
    if candidates:
        return read_cache(_cache_file(directory, min(candidates)))
    tables = build_arith_tables(n_max)
    tau_exact = delta_coefficients_exact(n_max)
    table = HeckeTable(n_max=n_max, k=12, tau_exact=tau_exact,
                       a_norm=hecke_normalized(tau_exact))
    return tables, table


# ---------------------------------------------------------------------------
# Report plumbing
# ---------------------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_json(path, command, params, results, tolerances, wall_time):
    summary = {"schema_version": JSON_SCHEMA, "version": __version__,
               "command": command, "params": params, "results": results,
               "tolerances": tolerances, "wall_time": wall_time}
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_paths(args, command):
    out = args.out or ("apvar-%s.csv" % command)
    base = out[:-4] if out.endswith(".csv") else out
    return out, base + ".json"


def _finish(args, command, params, header, rows, results, tolerances,
            t0, failures):
    csv_path, json_path = _out_paths(args, command)
    _write_csv(csv_path, header, rows)
    _write_json(json_path, command, params, results, tolerances,
                time.time() - t0)
    for line in failures:
        print("FAIL: %s" % line, file=sys.stderr)
    print("%s: wrote %s and %s" % (command, csv_path, json_path))
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_sieve(args):
    t0 = time.time()
    directory = _cache_dir(args)
    os.makedirs(directory, exist_ok=True)
    tables = build_arith_tables(args.n_max)
    tau_exact = delta_coefficients_exact(args.n_max)
    path = _cache_file(directory, args.n_max)
    n_bytes, csum = write_cache(path, tables, tau_exact)
    # Round trip: reload and re-serialize; the bytes must match.
    tables2, table2 = read_cache(path)
    same = (cache_payload(tables2, table2.tau_exact)
            == cache_payload(tables, tau_exact))
    header = ["n_max", "path", "bytes", "checksum", "round_trip"]
    rows = [[str(args.n_max), path, str(n_bytes), str(csum),
             "1" if same else "0"]]
    results = [{"n_max": args.n_max, "path": path, "bytes": n_bytes,
                "checksum": csum, "round_trip": bool(same)}]
    failures = [] if same else ["cache round trip not byte-identical"]
    return _finish(args, "sieve", {"n_max": args.n_max}, header, rows,
                   results, {}, t0, failures)


def cmd_voronoi(args):
    t0 = time.time()
    n_need = int(math.ceil(args.x))
    tables, table = _load_tables(n_need, _cache_dir(args))
    w = SmoothWeight(H=args.big_h, X=args.x)
    if args.seq == "cusp":
        rep = voronoi_check_cusp(args.q, args.h, table, w)
    else:
        rep = voronoi_check_divisor(args.q, args.h, tables, w)
    header = ["seq", "q", "h", "X", "H", "n_cut", "lhs_re", "lhs_im",
              "rhs_re", "rhs_im", "abs_diff", "rel_diff"]
    rows = [[args.seq, str(rep.q), str(rep.h), _fmt(args.x),
             _fmt(args.big_h), str(rep.n_cut), _fmt(rep.lhs.real),
             _fmt(rep.lhs.imag), _fmt(rep.rhs.real), _fmt(rep.rhs.imag),
             _fmt(rep.abs_diff), _fmt(rep.rel_diff)]]
    results = [{"seq": args.seq, "q": rep.q, "h": rep.h,
                "rel_diff": rep.rel_diff}]
    failures = []
    if not rep.rel_diff <= args.tol:
        failures.append("voronoi %s q=%d h=%d: rel_diff=%.3g > tol=%.3g"
                        % (args.seq, rep.q, rep.h, rep.rel_diff, args.tol))
    params = {"seq": args.seq, "q": args.q, "h": args.h, "x": args.x,
              "big_h": args.big_h, "tol": args.tol}
    return _finish(args, "voronoi", params, header, rows, results,
                   {"rel_diff": args.tol}, t0, failures)


def cmd_mellin_check(args):
    t0 = time.time()
    header = ["A", "B", "lam", "variant", "lhs", "rhs", "diff"]
    rows, results, failures = [], [], []
    for A in (0.1, 1.0, 10.0):
        for B in (0.1, 1.0, 10.0):
            for lam in (0.5, 1.0, 3.0):
                res = mellin_barnes_check(A, B, lam)
                for variant, lhs, rhs, diff in (
                        ("plain", res.lhs, res.rhs, res.diff),
                        ("log", res.lhs_log, res.rhs_log, res.diff_log)):
                    rows.append([_fmt(A), _fmt(B), _fmt(lam), variant,
                                 _fmt(lhs), _fmt(rhs), _fmt(diff)])
                    if not diff <= args.tol:
                        failures.append(
                            "mellin-barnes A=%g B=%g lam=%g %s: "
                            "diff=%.3g > tol=%.3g"
                            % (A, B, lam, variant, diff, args.tol))
                results.append({"A": A, "B": B, "lam": lam,
                                "diff": res.diff, "diff_log": res.diff_log})
    return _finish(args, "mellin-check", {"tol": args.tol}, header, rows,
                   results, {"diff": args.tol}, t0, failures)


def _variance_header(budget_len):
    return (["X", "q", "H", "sequence", "exact", "prediction"]
            + ["budget_term_%d" % (i + 1) for i in range(budget_len)]
            + ["ratio", "regime"])


def _variance_row(rep):
    return ([_fmt(rep.X), str(rep.q), _fmt(rep.H), rep.sequence,
             _fmt(rep.exact), _fmt(rep.prediction)]
            + [_fmt(v) for _, v in rep.error_budget]
            + [_fmt(rep.ratio), rep.regime])


def _variance_result(rep):
    return {"X": rep.X, "q": rep.q, "sequence": rep.sequence,
            "exact": rep.exact, "prediction": rep.prediction,
            "budget": {name: value for name, value in rep.error_budget},
            "ratio": rep.ratio, "regime": rep.regime,
            "dominant": rep.dominant}


def _q_grid(q_min, q_max, points, geometric):
    if points == 1 or q_min == q_max:
        return [int(q_min)]
    if geometric:
        qs = np.geomspace(q_min, q_max, points)
    else:
        qs = np.linspace(q_min, q_max, points)
    return sorted(np.unique(np.rint(qs).astype(int)))


def cmd_variance(args):
    t0 = time.time()
    q_max = args.q_max if args.q_max is not None else args.q
    qs = _q_grid(args.q, q_max, args.points, args.geometric)
    n_need = int(math.ceil(args.x))
    tables, table = _load_tables(n_need, _cache_dir(args))
    c_hat = _default_c_hat(table) if args.seq == "cusp" else None
    rows, results, failures = [], [], []
    header = None
    for q in qs:
        rep = regime_report(args.x, q, table=table, tables=tables,
                            sequence=args.seq, c_hat=c_hat)
        if header is None:
            header = _variance_header(len(rep.error_budget))
        rows.append(_variance_row(rep))
        results.append(_variance_result(rep))
        if not math.isfinite(rep.ratio):
            failures.append("variance %s X=%g q=%d: ratio not finite"
                            % (args.seq, args.x, q))
    params = {"seq": args.seq, "x": args.x, "q": args.q, "q_max": q_max,
              "points": args.points, "geometric": args.geometric}
    return _finish(args, "variance", params, header, rows, results,
                   {"ratio": "finite"}, t0, failures)


def cmd_shifted_check(args):
    from apvar.shifted import DEFAULT_K, _fmt_alpha_cut, fake_main_term
    from apvar.specfun import as_kind
    t0 = time.time()
    n_need = int(math.ceil(args.x))
    tables, _ = _load_tables(n_need, _cache_dir(args))
    w = default_weight(args.x, args.q, "divisor")
    kinds = ("YY", "KK", "YK") if args.kind == "all" else (args.kind,)
    header = ["kind", "X", "q", "H", "value", "budget", "ratio",
              "lambda_K", "alpha_cut_a", "alpha_cut_b"]
    rows, results, failures = [], [], []
    for kind in kinds:
        value, budget, ratio = fake_main_term(kind, args.x, args.q, w,
                                              tables)
        cut_a = _fmt_alpha_cut(as_kind(kind[0]), w, 1e-6)
        cut_b = _fmt_alpha_cut(as_kind(kind[1]), w, 1e-6)
        rows.append([kind, _fmt(args.x), str(args.q), _fmt(w.H),
                     _fmt(value), _fmt(budget), _fmt(ratio),
                     str(DEFAULT_K), _fmt(cut_a), _fmt(cut_b)])
        results.append({"kind": kind, "X": args.x, "q": args.q,
                        "value": value, "budget": budget, "ratio": ratio})
        if args.max_ratio is not None and not ratio <= args.max_ratio:
            failures.append("shifted %s X=%g q=%d: ratio=%.3g > %.3g"
                            % (kind, args.x, args.q, ratio,
                               args.max_ratio))
    params = {"kind": args.kind, "x": args.x, "q": args.q,
              "max_ratio": args.max_ratio}
    return _finish(args, "shifted-check", params, header, rows, results,
                   {"ratio": args.max_ratio}, t0, failures)


_SWEEP_STATE = {}


def _sweep_init(x, table, c_hat):
    _SWEEP_STATE["x"] = x
    _SWEEP_STATE["table"] = table
    _SWEEP_STATE["c_hat"] = c_hat


def _sweep_one(q):
    return regime_report(_SWEEP_STATE["x"], q,
                         table=_SWEEP_STATE["table"], sequence="cusp",
                         c_hat=_SWEEP_STATE["c_hat"])


def cmd_sweep(args):
    t0 = time.time()
    qs = _q_grid(args.q_min, args.q_max, args.points, True)
    n_need = int(math.ceil(args.x))
    _, table = _load_tables(n_need, _cache_dir(args))
    c_hat = _default_c_hat(table)
    if args.threads > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(args.threads, _sweep_init,
                      (args.x, table, c_hat)) as pool:
            reports = pool.map(_sweep_one, qs)
    else:
        _sweep_init(args.x, table, c_hat)
        reports = [_sweep_one(q) for q in qs]
    # Order-normalized: rows are emitted in ascending q regardless of the
    # worker schedule, so any thread count produces identical CSV.
    reports.sort(key=lambda rep: rep.q)
    header = _variance_header(len(reports[0].error_budget))
    rows = [_variance_row(rep) for rep in reports]
    results = [_variance_result(rep) for rep in reports]
    failures = ["sweep X=%g q=%d: ratio not finite" % (args.x, rep.q)
                for rep in reports if not math.isfinite(rep.ratio)]
    params = {"x": args.x, "q_min": args.q_min, "q_max": args.q_max,
              "points": args.points, "threads": args.threads,
              "c_hat": c_hat}
    return _finish(args, "sweep", params, header, rows, results,
                   {"ratio": "finite"}, t0, failures)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="apvar",
        description="Numerical laboratory for arithmetic-progression "
                    "variances, Voronoi summation and shifted convolutions.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="CSV output path (JSON next to it)")
        p.add_argument("--cache-dir",
                       help="table cache directory (default: $%s or cwd)"
                       % CACHE_ENV)

    p = sub.add_parser("sieve", help="build and cache arithmetic tables")
    p.add_argument("--n-max", type=int, required=True)
    common(p)
    p.set_defaults(func=cmd_sieve)

    p = sub.add_parser("voronoi", help="verify a Voronoi identity instance")
    p.add_argument("--seq", choices=("cusp", "divisor"), required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--big-h", type=float, required=True,
                   help="plateau ramp width H of the smooth weight")
    p.add_argument("--tol", type=float, default=1e-5)
    common(p)
    p.set_defaults(func=cmd_voronoi)

    p = sub.add_parser("mellin-check",
                       help="Mellin-Barnes contour identity grid")
    p.add_argument("--tol", type=float, default=1e-8)
    common(p)
    p.set_defaults(func=cmd_mellin_check)

    p = sub.add_parser("variance",
                       help="exact progression variance vs prediction")
    p.add_argument("--seq", choices=("cusp", "divisor"), required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--q-max", type=int,
                   help="sweep q up to this value (default: single q)")
    p.add_argument("--points", type=int, default=1)
    p.add_argument("--geometric", action="store_true",
                   help="geometric q grid (default linear)")
    common(p)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("shifted-check",
                       help="fake-main-term magnitudes vs budget")
    p.add_argument("--kind", choices=("YY", "KK", "YK", "all"),
                   default="all")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--max-ratio", type=float, default=None,
                   help="fail (exit 1) when |value|/budget exceeds this")
    common(p)
    p.set_defaults(func=cmd_shifted_check)

    p = sub.add_parser("sweep", help="parallel cusp-variance regime sweep")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--q-min", type=int, required=True)
    p.add_argument("--q-max", type=int, required=True)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--threads", type=int, default=4)
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
