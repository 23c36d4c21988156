"""Command-line front end: reproducible runs of the engines and censuses.

Every artifact embeds the configuration that produced it (CSV header line or
a "config" key in JSON output), and `argv_from_config` rebuilds the exact
command line from such a header, so any stored artifact can be regenerated
byte-for-byte.

Exit codes: 0 success, 1 validation or engine error, 2 usage error,
3 invariant-check failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict

from .arith import CatMap, order_mod
from .census import (
    compute_integer_records,
    compute_prime_records,
    load_results,
    quantum_sweep,
    resume_point,
    small_order_report,
    store_results,
    summarize_integer_records,
    summarize_prime_records,
)
from .checks import all_passed, run_checks
from .errors import CatmapError
from .quadorder import (
    congruence_count,
    order_profile,
    split_by_class,
)
from .quantum import Observable, propagator, spectrum

DEFAULT_MATRIX = "2,1,3,2"
DEFAULT_ETA = 0.55


# ---------------------------------------------------------------------------
# argument parsing helpers


def parse_matrix(text: str) -> CatMap:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"matrix needs 4 comma-separated integers, got {text!r}")
    try:
        a, b, c, d = (int(p) for p in parts)
    except ValueError as exc:
        raise ValueError(f"matrix entries must be integers: {text!r}") from exc
    return CatMap(a, b, c, d)


def parse_vector(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"frequency needs 2 comma-separated integers, got {text!r}")
    return int(parts[0]), int(parts[1])


def parse_sizes(text: str) -> list[int]:
    """Comma-separated entries, each `a`, `a-b`, or `a-b:step` (inclusive)."""
    sizes: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        step = 1
        if ":" in chunk:
            chunk, step_text = chunk.rsplit(":", 1)
            step = int(step_text)
            if step < 1:
                raise ValueError(f"step must be >= 1 in {text!r}")
        if "-" in chunk.lstrip("-"):
            head, _, tail = chunk.rpartition("-")
            lo, hi = int(head), int(tail)
            if hi < lo:
                raise ValueError(f"empty range {chunk!r}")
            sizes.extend(range(lo, hi + 1, step))
        else:
            sizes.append(int(chunk))
    if not sizes:
        raise ValueError(f"no sizes in {text!r}")
    return sizes


def parse_observable(text: str) -> Observable:
    """`cos1` / `cos2` shorthands, or terms `c:(n1,n2)=re,im` joined by `;`."""
    if text == "cos1":
        return Observable.cosine(1)
    if text == "cos2":
        return Observable.cosine(2)
    coefficients: dict[tuple[int, int], complex] = {}
    for term in text.split(";"):
        term = term.strip()
        if not term:
            continue
        if not term.startswith("c:"):
            raise ValueError(f"observable term must start with 'c:': {term!r}")
        body = term[2:]
        left, eq, right = body.partition("=")
        if not eq:
            raise ValueError(f"observable term needs '=': {term!r}")
        left = left.strip()
        if not (left.startswith("(") and left.endswith(")")):
            raise ValueError(f"frequency must be parenthesized: {term!r}")
        n1, n2 = parse_vector(left[1:-1])
        vals = right.split(",")
        if len(vals) != 2:
            raise ValueError(f"coefficient needs re,im: {term!r}")
        z = complex(float(vals[0]), float(vals[1]))
        key = (n1, n2)
        coefficients[key] = coefficients.get(key, 0) + z
    if not coefficients:
        raise ValueError(f"no terms in observable spec {text!r}")
    return Observable(coefficients)


def _resolve_workers(value: int | None) -> int:
    if value is None:
        value = int(os.environ.get("CATMAP_WORKERS", "1"))
    if value < 1:
        raise ValueError(f"workers must be >= 1, got {value}")
    return value


# ---------------------------------------------------------------------------
# config embedding


def _config(args, *keys: str) -> dict[str, str]:
    """String map stored in artifact headers; enough to re-run the command."""
    out = {"command": args.command, "matrix": args.matrix}
    for key in keys:
        value = getattr(args, key)
        if value is None:
            continue
        if isinstance(value, bool):
            value = int(value)
        out[key] = str(value)
    return out


_FLAG_OF = {
    "N": "-N",
    "n": "-n",
    "x": "-x",
    "eta": "--eta",
    "f": "--f",
    "k_max": "--k-max",
    "sizes": "--sizes",
    "fmt": "--fmt",
    "matrix": "--matrix",
    "workers": "--workers",
    "dense_limit": "--dense-limit",
    "seed": "--seed",
}
_BOOL_FLAGS = {"timing": "--timing", "resume": "--resume", "quick": "--quick"}


def argv_from_config(config) -> list[str]:
    """Rebuild the argv that produced an artifact from its embedded config."""
    items = dict(config)
    items.pop("kind", None)
    argv = [items.pop("command")]
    for key, value in sorted(items.items()):
        if key in _BOOL_FLAGS:
            if value not in ("0", "", "False"):
                argv.append(_BOOL_FLAGS[key])
        elif key in _FLAG_OF:
            argv.extend([_FLAG_OF[key], value])
        else:
            raise ValueError(f"config key {key!r} has no known flag")
    return argv


# ---------------------------------------------------------------------------
# output helpers


def _dump(document: dict) -> str:
    return json.dumps(document, indent=1, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_order(args, m: CatMap) -> int:
    _emit(f"{order_mod(m, args.N)}\n", args.out)
    return 0


def _cmd_profile(args, m: CatMap) -> int:
    prof = order_profile(m, args.N)
    split = split_by_class(m, args.N, args.eta)
    if args.N >= 2:
        log_n = math.log(args.N)
        in_s = prof.s <= log_n and prof.omega <= 1.5 * math.log(log_n)
    else:
        in_s = False
    body = {
        "N": prof.N,
        "d": prof.d,
        "s": prof.s,
        "d0": prof.d0,
        "L": prof.L,
        "ord": prof.ord,
        "lower_bound": prof.lower_bound,
        "NG": split.N_G,
        "NB": split.N_B,
        "NT": split.N_T,
        "omega": prof.omega,
        "in_S": bool(in_s),
        "ord_over_sqrt": prof.ord / math.sqrt(prof.N),
    }
    _emit(_dump({"config": _config(args, "N", "eta"), "profile": body}), args.out)
    return 0


def _cmd_nu(args, m: CatMap) -> int:
    cc = congruence_count(m, args.N, parse_vector(args.n))
    body = {
        "N": cc.N,
        "n": list(cc.n),
        "r": cc.r,
        "count": cc.count,
        "trivial_count": cc.trivial_count,
        "minus_one_exponent": cc.minus_one_exponent,
    }
    _emit(_dump({"config": _config(args, "N", "n"), "nu": body}), args.out)
    return 0


def _cmd_small_order(args, m: CatMap) -> int:
    rows, failures = small_order_report(m, args.k_max)
    body = [
        {
            "k": row.k,
            "modulus": row.modulus,
            "ord": row.order,
            "ord_over_log": row.order_over_log,
            "certified": row.certified,
        }
        for row in rows
    ]
    doc = {
        "config": _config(args, "k_max"),
        "rows": body,
        "failures": list(failures),
    }
    _emit(_dump(doc), args.out)
    return 0


def _cmd_census_primes(args, m: CatMap) -> int:
    workers = _resolve_workers(args.workers)
    config = _config(args, "x", "eta", "fmt")
    lo = 2
    if args.resume and args.out and args.fmt == "csv":
        last = resume_point(args.out)
        if last is not None:
            lo = last + 1
    records, failures = compute_prime_records(
        m, args.x, args.eta, lo=lo, workers=workers
    )
    if args.out:
        store_results(
            records,
            args.out,
            kind="primes",
            config=config,
            fmt=args.fmt,
            append=args.resume and args.fmt == "csv",
        )
        everything = load_results(args.out).records
    else:
        everything = records
    summary = summarize_prime_records(everything, args.x, args.eta, failures)
    doc = {"config": config, "summary": asdict(summary)}
    if args.out:
        doc["rows_written"] = len(records)
    else:
        doc["records"] = [
            {
                "p": r.p,
                "chi": r.chi,
                "ord": r.order,
                "class": r.prime_class.value,
                "exceeds": r.exceeds,
            }
            for r in records
        ]
    sys.stdout.write(_dump(doc))
    return 0


def _cmd_census_integers(args, m: CatMap) -> int:
    workers = _resolve_workers(args.workers)
    config = _config(args, "x", "eta", "fmt")
    lo = 2
    if args.resume and args.out and args.fmt == "csv":
        last = resume_point(args.out)
        if last is not None:
            lo = last + 1
    records = compute_integer_records(m, args.x, args.eta, lo=lo, workers=workers)
    if args.out:
        store_results(
            records,
            args.out,
            kind="integers",
            config=config,
            fmt=args.fmt,
            append=args.resume and args.fmt == "csv",
        )
        everything = load_results(args.out).records
    else:
        everything = records
    summary = summarize_integer_records(everything, args.x, args.eta)
    doc = {"config": config, "summary": asdict(summary)}
    if args.out:
        doc["rows_written"] = len(records)
    else:
        doc["records"] = [
            {
                "N": r.N,
                "d": r.d,
                "s": r.s,
                "d0": r.d0,
                "L": r.L,
                "ord": r.order,
                "lower_bound": r.lower_bound,
                "NG": r.good_part,
                "NB": r.bad_part,
                "NT": r.terrible_part,
                "in_S": r.in_s,
            }
            for r in records
        ]
    sys.stdout.write(_dump(doc))
    return 0


def _cmd_propagator(args, m: CatMap) -> int:
    u = propagator(m, args.N)
    doc = {"config": _config(args, "N"), "operator": u.to_jsonable()}
    _emit(_dump(doc), args.out)
    return 0


def _cmd_spectrum(args, m: CatMap) -> int:
    eig = spectrum(propagator(m, args.N), order_mod(m, args.N))
    doc = {"config": _config(args, "N"), "spectrum": eig.to_jsonable()}
    _emit(_dump(doc), args.out)
    return 0


def _cmd_fourth_moment(args, m: CatMap) -> int:
    from .quantum import fourth_moment

    fm = fourth_moment(m, args.N, parse_vector(args.n))
    body = {
        "N": fm.N,
        "n": list(fm.n),
        "ord": fm.order,
        "solution_count": fm.solution_count,
        "s4": fm.s4,
        "bound": fm.bound,
        "ratio": fm.s4 / fm.bound,
    }
    _emit(_dump({"config": _config(args, "N", "n"), "fourth_moment": body}), args.out)
    return 0


def _cmd_sweep(args, m: CatMap) -> int:
    sizes = parse_sizes(args.sizes)
    f = parse_observable(args.f)
    records, failures = quantum_sweep(
        m,
        sizes,
        f,
        parse_vector(args.n),
        timing=args.timing,
        dense_limit=args.dense_limit,
    )
    config = _config(args, "sizes", "f", "n", "fmt", "dense_limit", "timing")
    if args.out:
        store_results(records, args.out, kind="sweep", config=config, fmt=args.fmt)
        doc = {
            "config": config,
            "rows_written": len(records),
            "failures": [[n, reason] for n, reason in failures],
        }
    else:
        doc = {
            "config": config,
            "records": [
                {
                    "N": r.N,
                    "n1": r.n1,
                    "n2": r.n2,
                    "S4": r.s4,
                    "bound": r.bound,
                    "ratio": r.ratio,
                    "variance": r.variance,
                    "max_dev": r.max_dev,
                    "rstar": r.rstar,
                    "ms": r.ms,
                }
                for r in records
            ],
            "failures": [[n, reason] for n, reason in failures],
        }
    sys.stdout.write(_dump(doc))
    return 0


def _cmd_check(args, m: CatMap) -> int:
    names = args.only.split(",") if args.only else None
    results = run_checks(quick=args.quick, seed=args.seed, names=names)
    for r in results:
        status = "ok" if r.ok else "FAIL"
        sys.stdout.write(f"[{status}] {r.name} ({r.seconds:.2f}s) {r.detail}\n")
    failed = [r.name for r in results if not r.ok]
    if failed:
        sys.stdout.write(f"FAILED {len(failed)}/{len(results)}: {', '.join(failed)}\n")
        return 3
    sys.stdout.write(f"all {len(results)} checks passed\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catmap",
        description="Quantized hyperbolic torus maps: orders, spectra, censuses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(handler=handler)
        p.add_argument(
            "--matrix",
            default=DEFAULT_MATRIX,
            help=f"a,b,c,d integers (default {DEFAULT_MATRIX})",
        )
        p.add_argument("--out", default=None, help="write output to this path")
        return p

    p = add("order", _cmd_order, help="multiplicative order of the matrix mod N")
    p.add_argument("-N", type=int, required=True)

    p = add("profile", _cmd_profile, help="order profile and class split of N")
    p.add_argument("-N", type=int, required=True)
    p.add_argument("--eta", type=float, default=DEFAULT_ETA)

    p = add("nu", _cmd_nu, help="congruence solution count at frequency n")
    p.add_argument("-N", type=int, required=True)
    p.add_argument("-n", default="1,0")

    p = add("small-order", _cmd_small_order, help="moduli with ord <= k")
    p.add_argument("--k-max", type=int, default=40, dest="k_max")

    p = add("census-primes", _cmd_census_primes, help="classify primes up to x")
    p.add_argument("-x", type=int, required=True)
    p.add_argument("--eta", type=float, default=DEFAULT_ETA)
    p.add_argument("--fmt", choices=("csv", "json"), default="csv")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--workers", type=int, default=None)

    p = add("census-integers", _cmd_census_integers, help="profile moduli up to x")
    p.add_argument("-x", type=int, required=True)
    p.add_argument("--eta", type=float, default=DEFAULT_ETA)
    p.add_argument("--fmt", choices=("csv", "json"), default="csv")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--workers", type=int, default=None)

    p = add("propagator", _cmd_propagator, help="unitary propagator matrix")
    p.add_argument("-N", type=int, required=True)

    p = add("spectrum", _cmd_spectrum, help="eigenphases, multiplicities, bases")
    p.add_argument("-N", type=int, required=True)

    p = add("fourth-moment", _cmd_fourth_moment, help="S4 statistic and its ceiling")
    p.add_argument("-N", type=int, required=True)
    p.add_argument("-n", default="1,0")

    p = add("sweep", _cmd_sweep, help="spectral statistics over many dimensions")
    p.add_argument("--sizes", required=True, help="e.g. 3,5,7 or 5-101:2")
    p.add_argument("--f", default="cos1", help="cos1, cos2, or c:(n1,n2)=re,im;...")
    p.add_argument("-n", default="1,0")
    p.add_argument("--fmt", choices=("csv", "json"), default="csv")
    p.add_argument("--timing", action="store_true")
    p.add_argument("--dense-limit", type=int, default=300, dest="dense_limit")

    p = add("check", _cmd_check, help="run the library invariant suite")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--only", default=None, help="comma-separated check names")
    p.add_argument("--seed", type=int, default=20240901)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        m = parse_matrix(args.matrix)
        return args.handler(args, m)
    except BrokenPipeError:
        return 0
    except (CatmapError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
