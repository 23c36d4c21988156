"""Large-scale order censuses and eigenfunction sweeps, with resumable storage.

Three kinds of tabulated records:

* ``PrimeRecord`` -- per-prime order data with the Good/Bad/Terrible class,
  produced by :func:`prime_census`;
* ``IntegerRecord`` -- the order profile of every modulus up to a cutoff,
  produced by :func:`integer_census`;
* ``SweepRecord`` -- spectral statistics of the quantized map over a list of
  dimensions, produced by :func:`quantum_sweep`.

Records go to disk as CSV (one header comment line, one column line, then one
row per record) or as a JSON document with identical field names.  CSV files
can be appended to and survive truncation mid-row: :func:`store_results` with
``append=True`` drops a partial trailing line before writing, and
:func:`resume_point` reports the largest key already present.  Serial and
worker-pool runs of the censuses produce byte-identical files.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from time import perf_counter

import numpy as np

from .arith import CatMap, Factorization, factorize, order_mod, primes_up_to
from .arith import _sieve_list
from .errors import (
    CatmapError,
    DegenerateK,
    EtaOutOfRange,
    FactorizationTimeout,
    SchemaMismatch,
)
from .quadorder import (
    PrimeClass,
    lcm_defect,
    small_order_modulus,
    splitting_character,
)
from .quantum import (
    Observable,
    fourth_moment,
    max_deviation,
    propagator,
    spectrum,
    variance_stat,
)

FORMAT_TAG = "catmap-census v1"
DEFAULT_DELTA_GRID = (0.05, 0.1, 0.2, 0.3)
DENSE_DIMENSION_LIMIT = 300

_INTEGER_SHARD = 50_000
_PRIME_SHARD = 20_000


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class PrimeRecord:
    """Order data for a single prime: chi(p), ord(A, p), class, threshold flag."""

    p: int
    chi: int
    order: int
    prime_class: PrimeClass
    exceeds: bool

    @property
    def key(self) -> int:
        return self.p


@dataclass(frozen=True)
class IntegerRecord:
    """Order profile of one modulus N = d * s**2 plus its class decomposition.

    ``good_part * bad_part == N`` with ``terrible_part | bad_part``; ``in_s``
    flags moduli with small square part (s <= log N) and few prime factors
    (omega(N) <= 1.5 * log log N).
    """

    N: int
    d: int
    s: int
    d0: int
    L: int
    order: int
    lower_bound: int
    good_part: int
    bad_part: int
    terrible_part: int
    in_s: bool

    @property
    def key(self) -> int:
        return self.N

    @property
    def order_over_sqrt(self) -> float:
        return self.order / math.sqrt(self.N)


@dataclass(frozen=True)
class SweepRecord:
    """Spectral statistics of the dimension-N propagator at one frequency.

    ``s4`` is the fourth-moment sum of the diagonal translation elements over
    the canonical eigenbasis and ``bound`` its rigorous ceiling; ``max_dev``
    is the largest diagonal element of the same pure harmonic, so
    ``max_dev**4 <= s4 <= bound`` always.  ``variance`` refers to the swept
    observable, which may differ from the harmonic.  ``ms`` is wall time in
    milliseconds and is left at 0 unless timing was requested, keeping
    repeated runs byte-identical.
    """

    N: int
    n1: int
    n2: int
    s4: float
    bound: float
    ratio: float
    variance: float
    max_dev: float
    rstar: int
    ms: int

    @property
    def key(self) -> int:
        return self.N


# ---------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class TailCount:
    """How many primes have order <= y, next to the y**2 comparison curve."""

    y: float
    count: int
    y_squared: float


@dataclass(frozen=True)
class PrimeCensusSummary:
    x: int
    eta: float
    prime_count: int
    exceed_count: int
    fraction: float
    c_eta: float
    good_count: int
    bad_count: int
    terrible_count: int
    tails: tuple[TailCount, ...]
    failures: tuple[int, ...]


@dataclass(frozen=True)
class DecadeFractions:
    """Fractions of moduli N <= bound violating each smallness condition."""

    bound: int
    count: int
    big_order: float
    large_square: float
    many_factors: float
    all_bad: float
    in_s: float


@dataclass(frozen=True)
class IntegerCensusSummary:
    x: int
    eta: float
    count: int
    decades: tuple[DecadeFractions, ...]
    l_distribution: tuple[tuple[int, int], ...]
    growth_fractions: tuple[tuple[float, float], ...]
    unit_skipped: bool
    failures: tuple[int, ...]


@dataclass(frozen=True)
class SmallOrderRow:
    """ord(A, N_k) <= k for the modulus N_k built from the k-th power."""

    k: int
    modulus: int
    order: int
    order_over_log: float
    certified: bool


def c_eta(eta: float) -> float:
    """Asymptotic lower density (3 - 5*eta) / (2 - 2*eta) of exceeding primes."""
    if not 0.5 < eta < 0.6:
        raise EtaOutOfRange(f"eta must lie in (0.5, 0.6), got {eta}")
    return (3 - 5 * eta) / (2 * (1 - eta))


# ---------------------------------------------------------------------------
# per-process computation engine


class _OrderEngine:
    """Memoized order / character / class lookups for one map in one process."""

    def __init__(self, m: CatMap, eta: float):
        self.m = m
        self.eta = eta
        self._orders: dict[tuple[int, int], int] = {}
        self._chi: dict[int, int] = {}
        self._cls: dict[int, PrimeClass] = {}

    def order_pp(self, p: int, e: int = 1) -> int:
        key = (p, e)
        got = self._orders.get(key)
        if got is None:
            fac = Factorization(((p, e),))
            got = order_mod(self.m, p**e, fac)
            self._orders[key] = got
        return got

    def chi(self, p: int) -> int:
        got = self._chi.get(p)
        if got is None:
            got = splitting_character(self.m, p)
            self._chi[p] = got
        return got

    def prime_class(self, p: int) -> PrimeClass:
        got = self._cls.get(p)
        if got is None:
            if self.m.discriminant % p == 0:
                got = PrimeClass.TERRIBLE
            else:
                o = self.order_pp(p)
                if o < math.sqrt(p) / math.log(p):
                    got = PrimeClass.TERRIBLE
                elif o >= p**self.eta:
                    got = PrimeClass.GOOD
                else:
                    got = PrimeClass.BAD
            self._cls[p] = got
        return got

    def prime_record(self, p: int, threshold: float) -> PrimeRecord:
        o = self.order_pp(p)
        return PrimeRecord(p, self.chi(p), o, self.prime_class(p), o > threshold)

    def integer_record(self, N: int, fac: tuple[tuple[int, int], ...]) -> IntegerRecord:
        d = 1
        s = 1
        for p, e in fac:
            if e % 2:
                d *= p
            s *= p ** (e // 2)
        d0 = d // math.gcd(d, self.m.discriminant)
        cof = [p - self.chi(p) for p, _ in fac if d0 % p == 0]
        L = lcm_defect(cof) if cof else 1
        prod_orders = 1
        for p, _ in fac:
            if d0 % p == 0:
                prod_orders *= self.order_pp(p)
        order = 1
        for p, e in fac:
            order = math.lcm(order, self.order_pp(p, e))
        ng = nb = nt = 1
        for p, e in fac:
            q = p**e
            cls = self.prime_class(p)
            if cls is PrimeClass.GOOD:
                ng *= q
            else:
                nb *= q
                if cls is PrimeClass.TERRIBLE:
                    nt *= q
        log_n = math.log(N)
        in_s = s <= log_n and len(fac) <= 1.5 * math.log(log_n)
        return IntegerRecord(
            N, d, s, d0, L, order, prod_orders // L, ng, nb, nt, in_s
        )


def _factored_range(lo: int, hi: int):
    """Yield (N, factorization) for every N in [lo, hi) via a segmented sieve."""
    count = hi - lo
    remain = np.arange(lo, hi, dtype=np.int64)
    factors: list[list[tuple[int, int]]] = [[] for _ in range(count)]
    for p in _sieve_list(math.isqrt(max(hi - 1, 1))):
        start = ((lo + p - 1) // p) * p
        if start >= hi:
            continue
        idx = np.arange(start - lo, count, p, dtype=np.int64)
        sub = remain[idx]
        exps = np.zeros(idx.size, dtype=np.int64)
        while True:
            mask = sub % p == 0
            if not mask.any():
                break
            sub[mask] //= p
            exps[mask] += 1
        remain[idx] = sub
        for i, e in zip(idx.tolist(), exps.tolist()):
            factors[i].append((p, e))
    leftovers = remain > 1
    for i in np.flatnonzero(leftovers).tolist():
        factors[i].append((int(remain[i]), 1))
    for offset in range(count):
        yield lo + offset, tuple(factors[offset])


def _integer_shard_worker(args):
    abcd, eta, lo, hi = args
    engine = _OrderEngine(CatMap(*abcd), eta)
    return [engine.integer_record(N, fac) for N, fac in _factored_range(lo, hi)]


def _prime_shard_worker(args):
    abcd, eta, threshold, plist = args
    engine = _OrderEngine(CatMap(*abcd), eta)
    records = []
    failures = []
    for p in plist:
        try:
            records.append(engine.prime_record(p, threshold))
        except FactorizationTimeout:
            failures.append(p)
    return records, failures


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("CATMAP_WORKERS", "1"))
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def _run_shards(worker, shard_args, workers: int):
    if workers <= 1 or len(shard_args) <= 1:
        return [worker(a) for a in shard_args]
    with ProcessPoolExecutor(max_workers=min(workers, len(shard_args))) as pool:
        return list(pool.map(worker, shard_args))


# ---------------------------------------------------------------------------
# censuses


def compute_prime_records(
    m: CatMap,
    x: int,
    eta: float,
    *,
    lo: int = 2,
    workers: int | None = None,
) -> tuple[list[PrimeRecord], list[int]]:
    """Order records for all primes in [lo, x]; factoring failures are listed,
    not fatal."""
    if x < 100:
        raise ValueError(f"cutoff x must be >= 100, got {x}")
    c_eta(eta)  # validates the range
    workers = _resolve_workers(workers)
    threshold = float(x) ** eta
    plist = [int(p) for p in primes_up_to(x) if p >= lo]
    abcd = (m.a, m.b, m.c, m.d)
    shards = [
        (abcd, eta, threshold, plist[i : i + _PRIME_SHARD])
        for i in range(0, len(plist), _PRIME_SHARD)
    ]
    records: list[PrimeRecord] = []
    failures: list[int] = []
    for recs, fails in _run_shards(_prime_shard_worker, shards, workers):
        records.extend(recs)
        failures.extend(fails)
    return records, failures


def summarize_prime_records(
    records, x: int, eta: float, failures=()
) -> PrimeCensusSummary:
    """Exceedance fraction vs c(eta), class counts, and small-order tails."""
    orders = np.array([r.order for r in records], dtype=np.float64)
    exceed = sum(1 for r in records if r.exceeds)
    classes = Counter(r.prime_class for r in records)
    tails = []
    for expo in (0.2, 0.3, 0.4):
        y = float(x) ** expo
        tails.append(TailCount(y, int(np.count_nonzero(orders <= y)), y * y))
    total = len(records)
    return PrimeCensusSummary(
        x=x,
        eta=eta,
        prime_count=total,
        exceed_count=exceed,
        fraction=exceed / total if total else 0.0,
        c_eta=c_eta(eta),
        good_count=classes.get(PrimeClass.GOOD, 0),
        bad_count=classes.get(PrimeClass.BAD, 0),
        terrible_count=classes.get(PrimeClass.TERRIBLE, 0),
        tails=tuple(tails),
        failures=tuple(failures),
    )


def prime_census(
    m: CatMap, x: int, eta: float, *, workers: int | None = None
) -> tuple[list[PrimeRecord], PrimeCensusSummary]:
    """Classify every prime up to x and compare the Good fraction with c(eta)."""
    records, failures = compute_prime_records(m, x, eta, workers=workers)
    return records, summarize_prime_records(records, x, eta, failures)


def compute_integer_records(
    m: CatMap,
    x: int,
    eta: float,
    *,
    lo: int = 2,
    workers: int | None = None,
) -> list[IntegerRecord]:
    """Order profiles for every modulus in [max(lo, 2), x], in order."""
    if x < 2:
        raise ValueError(f"cutoff x must be >= 2, got {x}")
    c_eta(eta)
    workers = _resolve_workers(workers)
    lo = max(lo, 2)
    abcd = (m.a, m.b, m.c, m.d)
    shards = []
    start = lo
    while start <= x:
        stop = min(start + _INTEGER_SHARD, x + 1)
        shards.append((abcd, eta, start, stop))
        start = stop
    records: list[IntegerRecord] = []
    for chunk in _run_shards(_integer_shard_worker, shards, workers):
        records.extend(chunk)
    return records


@lru_cache(maxsize=1 << 18)
def _omega_of(n: int) -> int:
    return len(factorize(n).factors)


def _record_omega(rec: IntegerRecord) -> int:
    # d and s are coprime-free splits of the same prime support as N
    return _omega_of(rec.d * rec.s)


def summarize_integer_records(
    records,
    x: int,
    eta: float,
    *,
    delta_grid=DEFAULT_DELTA_GRID,
    unit_skipped: bool = True,
    failures=(),
) -> IntegerCensusSummary:
    """Decade fractions of the five smallness statistics plus growth fractions.

    Per decade bound (x, x/10, x/100): the fractions of moduli with
    ord > sqrt(N), with s > log N, with omega(N) >= 1.5 * log log N, with no
    Good prime factor, and lying in the small set.  The L distribution is
    tabulated over the full range, and the growth fractions count moduli with
    ord >= sqrt(N) * exp((log N)**delta) for each delta in the grid.
    """
    recs = list(records)
    decades = []
    for bound in (x, x // 10, x // 100):
        if bound < 2:
            continue
        sub = [r for r in recs if r.N <= bound]
        total = len(sub)
        if total == 0:
            decades.append(DecadeFractions(bound, 0, 0.0, 0.0, 0.0, 0.0, 0.0))
            continue
        big = sum(1 for r in sub if r.order * r.order > r.N)
        square = sum(1 for r in sub if r.s > math.log(r.N))
        many = sum(
            1 for r in sub if _record_omega(r) >= 1.5 * math.log(math.log(r.N))
        )
        allbad = sum(1 for r in sub if r.good_part == 1)
        small = sum(1 for r in sub if r.in_s)
        decades.append(
            DecadeFractions(
                bound,
                total,
                big / total,
                square / total,
                many / total,
                allbad / total,
                small / total,
            )
        )
    l_counter = Counter(r.L for r in recs)
    growth = []
    for delta in delta_grid:
        hits = sum(
            1
            for r in recs
            if r.order >= math.sqrt(r.N) * math.exp(math.log(r.N) ** delta)
        )
        growth.append((float(delta), hits / len(recs) if recs else 0.0))
    return IntegerCensusSummary(
        x=x,
        eta=eta,
        count=len(recs),
        decades=tuple(decades),
        l_distribution=tuple(sorted(l_counter.items())),
        growth_fractions=tuple(growth),
        unit_skipped=unit_skipped,
        failures=tuple(failures),
    )


def integer_census(
    m: CatMap,
    x: int,
    eta: float,
    *,
    workers: int | None = None,
    delta_grid=DEFAULT_DELTA_GRID,
) -> tuple[list[IntegerRecord], IntegerCensusSummary]:
    """Profile every modulus 2..x (N = 1 is skipped and flagged)."""
    records = compute_integer_records(m, x, eta, workers=workers)
    summary = summarize_integer_records(
        records, x, eta, delta_grid=delta_grid, unit_skipped=True
    )
    return records, summary


def small_order_report(
    m: CatMap, k_max: int, *, factor_budget: int | None = None
) -> tuple[list[SmallOrderRow], list[int]]:
    """Moduli N_k with ord(A, N_k) <= k, for k = 2..k_max.

    N_k is extracted from the k-th power of the map; rows with N_k = 1 are
    dropped, and k values whose factorization timed out are returned in the
    failure list.  ``order_over_log`` = ord / log N_k measures how slowly the
    order grows compared to log N_k.
    """
    rows: list[SmallOrderRow] = []
    failures: list[int] = []
    for k in range(2, k_max + 1):
        try:
            sof = small_order_modulus(m, k, factor_budget=factor_budget)
        except (FactorizationTimeout, DegenerateK):
            failures.append(k)
            continue
        if sof.degenerate:
            continue
        fac = Factorization(
            tuple(
                (entry.prime, entry.modulus_exponent)
                for entry in sof.entries
                if entry.modulus_exponent > 0
            ),
            certified=sof.certified,
        )
        order = order_mod(m, sof.N_k, fac)
        rows.append(
            SmallOrderRow(k, sof.N_k, order, order / math.log(sof.N_k), sof.certified)
        )
    return rows, failures


def quantum_sweep(
    m: CatMap,
    sizes,
    f: Observable,
    n,
    *,
    timing: bool = False,
    dense_limit: int = DENSE_DIMENSION_LIMIT,
) -> tuple[list[SweepRecord], list[tuple[int, str]]]:
    """Propagator spectra over a list of dimensions, one SweepRecord each.

    For every dimension: build the propagator, extract the spectrum, compute
    the fourth moment at frequency n with its ceiling, the variance of the
    observable f, and the largest diagonal element of the pure harmonic at n.
    The ratio s4/bound never exceeds 1 and max_dev**4 <= bound is re-checked
    per record.  Dimensions that fail (no construction path, beyond the dense
    cutoff, degenerate frequency) are reported in the failure list and do not
    abort the sweep.  ``ms`` stays 0 unless ``timing`` is set, so default
    sweeps are deterministic byte-for-byte.
    """
    n1, n2 = int(n[0]), int(n[1])
    probe = Observable.harmonic((n1, n2))
    records: list[SweepRecord] = []
    failures: list[tuple[int, str]] = []
    for N in sizes:
        N = int(N)
        if N > dense_limit:
            failures.append((N, f"dimension beyond dense limit {dense_limit}"))
            continue
        began = perf_counter()
        try:
            eigsys = spectrum(propagator(m, N), order_mod(m, N))
            moment = fourth_moment(m, N, (n1, n2), eigsys=eigsys)
            variance = variance_stat(m, N, f, eigsys=eigsys)
            dev = max_deviation(m, N, probe, eigsys=eigsys)
        except (CatmapError, ValueError) as exc:
            failures.append((N, f"{type(exc).__name__}: {exc}"))
            continue
        ratio = moment.s4 / moment.bound
        slack = 1 + 1e-6
        if ratio > slack or dev**4 > moment.bound * slack:
            raise AssertionError(
                f"fourth-moment ceiling violated at N={N}: "
                f"ratio={ratio!r}, max_dev={dev!r}"
            )
        elapsed = int((perf_counter() - began) * 1000) if timing else 0
        records.append(
            SweepRecord(
                N,
                n1,
                n2,
                moment.s4,
                moment.bound,
                ratio,
                variance,
                dev,
                eigsys.scalar_period,
                elapsed,
            )
        )
    return records, failures


# ---------------------------------------------------------------------------
# storage


_COLUMNS = {
    "primes": ("p", "chi", "ord", "class", "exceeds"),
    "integers": (
        "N",
        "d",
        "s",
        "d0",
        "L",
        "ord",
        "lower_bound",
        "NG",
        "NB",
        "NT",
        "in_S",
    ),
    "sweep": (
        "N",
        "n1",
        "n2",
        "S4",
        "bound",
        "ratio",
        "variance",
        "max_dev",
        "rstar",
        "ms",
    ),
}

_KIND_OF = {PrimeRecord: "primes", IntegerRecord: "integers", SweepRecord: "sweep"}


def _f17(v: float) -> str:
    return format(float(v), ".17g")


def _record_cells(rec) -> list[str]:
    if isinstance(rec, PrimeRecord):
        return [
            str(rec.p),
            str(rec.chi),
            str(rec.order),
            rec.prime_class.value,
            str(int(rec.exceeds)),
        ]
    if isinstance(rec, IntegerRecord):
        return [
            str(rec.N),
            str(rec.d),
            str(rec.s),
            str(rec.d0),
            str(rec.L),
            str(rec.order),
            str(rec.lower_bound),
            str(rec.good_part),
            str(rec.bad_part),
            str(rec.terrible_part),
            str(int(rec.in_s)),
        ]
    if isinstance(rec, SweepRecord):
        return [
            str(rec.N),
            str(rec.n1),
            str(rec.n2),
            _f17(rec.s4),
            _f17(rec.bound),
            _f17(rec.ratio),
            _f17(rec.variance),
            _f17(rec.max_dev),
            str(rec.rstar),
            str(rec.ms),
        ]
    raise TypeError(f"unknown record type {type(rec).__name__}")


def _parse_cells(kind: str, cells: list[str]):
    if kind == "primes":
        return PrimeRecord(
            int(cells[0]),
            int(cells[1]),
            int(cells[2]),
            PrimeClass(cells[3]),
            bool(int(cells[4])),
        )
    if kind == "integers":
        ints = [int(c) for c in cells[:10]]
        return IntegerRecord(*ints, bool(int(cells[10])))
    if kind == "sweep":
        return SweepRecord(
            int(cells[0]),
            int(cells[1]),
            int(cells[2]),
            float(cells[3]),
            float(cells[4]),
            float(cells[5]),
            float(cells[6]),
            float(cells[7]),
            int(cells[8]),
            int(cells[9]),
        )
    raise SchemaMismatch(f"unknown record kind {kind!r}")


_FLOAT_COLS = frozenset({"S4", "bound", "ratio", "variance", "max_dev"})
_BOOL_COLS = frozenset({"exceeds", "in_S"})
_STR_COLS = frozenset({"class"})


def _json_value(rec) -> dict:
    cols = _COLUMNS[_KIND_OF[type(rec)]]
    cells = _record_cells(rec)
    out = {}
    for name, cell in zip(cols, cells):
        if name in _STR_COLS:
            out[name] = cell
        elif name in _BOOL_COLS:
            out[name] = bool(int(cell))
        elif name in _FLOAT_COLS:
            out[name] = float(cell)
        else:
            out[name] = int(cell)
    return out


def _from_json_value(kind: str, obj: dict):
    cols = _COLUMNS[kind]
    try:
        cells = []
        for name in cols:
            v = obj[name]
            if isinstance(v, bool):
                cells.append(str(int(v)))
            elif isinstance(v, float):
                cells.append(_f17(v))
            else:
                cells.append(str(v))
        return _parse_cells(kind, cells)
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaMismatch(f"bad {kind} record {obj!r}: {exc}") from exc


def _infer_kind(records, kind: str | None) -> str:
    if kind is None:
        if not records:
            raise ValueError("cannot infer the record kind of an empty stream")
        kind = _KIND_OF.get(type(records[0]))
        if kind is None:
            raise TypeError(f"unknown record type {type(records[0]).__name__}")
    if kind not in _COLUMNS:
        raise ValueError(f"unknown record kind {kind!r}")
    for rec in records:
        if _KIND_OF.get(type(rec)) != kind:
            raise TypeError(f"record {rec!r} does not belong to kind {kind!r}")
    return kind


def _header_line(kind: str, config) -> str:
    items = {str(k): str(v) for k, v in (config or {}).items()}
    items["kind"] = kind
    joined = "; ".join(f"{k}={items[k]}" for k in sorted(items))
    return f"#{FORMAT_TAG}; {joined}"


def _parse_header(line: str) -> dict[str, str]:
    if not line.startswith("#"):
        raise SchemaMismatch(f"missing header comment, got {line[:40]!r}")
    parts = line[1:].rstrip("\n").split("; ")
    if parts[0] != FORMAT_TAG:
        raise SchemaMismatch(f"unsupported format tag {parts[0]!r}")
    config: dict[str, str] = {}
    for part in parts[1:]:
        if part and "=" in part:
            k, _, v = part.partition("=")
            config[k] = v
    return config


def _trim_partial_tail(path) -> None:
    """Drop a trailing line without its newline (interrupted append)."""
    with open(path, "rb+") as fh:
        fh.seek(0, os.SEEK_END)
        size = fh.tell()
        if size == 0:
            return
        fh.seek(size - 1)
        if fh.read(1) == b"\n":
            return
        back = min(size, 1 << 20)
        fh.seek(size - back)
        chunk = fh.read(back)
        cut = chunk.rfind(b"\n")
        fh.truncate(size - back + cut + 1 if cut >= 0 else 0)


@dataclass(frozen=True)
class LoadedResults:
    kind: str
    config: dict
    records: tuple

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def store_results(
    records,
    path,
    *,
    kind: str | None = None,
    config=None,
    fmt: str | None = None,
    append: bool = False,
) -> int:
    """Write records to path as CSV (default) or JSON; returns rows written.

    CSV appending is resume-safe: an existing file is checked for a matching
    header, a partially written final line is discarded, and new rows are
    added after the surviving ones.  JSON is whole-document only.
    """
    records = list(records)
    kind = _infer_kind(records, kind)
    if fmt is None:
        fmt = "json" if str(path).endswith(".json") else "csv"
    if fmt == "json":
        if append:
            raise ValueError("JSON storage is whole-document; append is not supported")
        doc = {
            "version": FORMAT_TAG,
            "kind": kind,
            "config": {str(k): str(v) for k, v in (config or {}).items()},
            "records": [_json_value(r) for r in records],
        }
        with open(path, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        return len(records)
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")

    header = _header_line(kind, config)
    columns = ",".join(_COLUMNS[kind])
    fresh = True
    if append and os.path.exists(path) and os.path.getsize(path) > 0:
        _trim_partial_tail(path)
        with open(path, "r", newline="\n") as fh:
            old_header = fh.readline().rstrip("\n")
            old_columns = fh.readline().rstrip("\n")
        if old_columns:
            if old_header != header:
                raise SchemaMismatch(
                    f"cannot append: header {old_header!r} != {header!r}"
                )
            if old_columns != columns:
                raise SchemaMismatch(
                    f"cannot append: columns {old_columns!r} != {columns!r}"
                )
            fresh = False
        # else: truncation ate the data; rewrite from scratch
    mode = "a" if not fresh else "w"
    with open(path, mode, newline="\n") as fh:
        if fresh:
            fh.write(header + "\n")
            fh.write(columns + "\n")
        for rec in records:
            fh.write(",".join(_record_cells(rec)) + "\n")
    return len(records)


def load_results(path) -> LoadedResults:
    """Read a stored census back; the inverse of store_results.

    A final line cut off mid-write (no newline, or unparsable) is dropped;
    any earlier malformed line raises SchemaMismatch.  JSON files are
    detected by their leading brace.
    """
    with open(path, "rb") as fh:
        head = fh.read(1)
    if head == b"{":
        with open(path, "r") as fh:
            doc = json.load(fh)
        if doc.get("version") != FORMAT_TAG:
            raise SchemaMismatch(f"unsupported format tag {doc.get('version')!r}")
        kind = doc.get("kind")
        if kind not in _COLUMNS:
            raise SchemaMismatch(f"unknown record kind {kind!r}")
        records = tuple(_from_json_value(kind, obj) for obj in doc.get("records", ()))
        return LoadedResults(kind, dict(doc.get("config", {})), records)

    with open(path, "r", newline="\n") as fh:
        lines = fh.readlines()
    if not lines:
        raise SchemaMismatch("empty file")
    config = _parse_header(lines[0])
    kind = config.pop("kind", None)
    if len(lines) < 2:
        raise SchemaMismatch("missing column line")
    columns = lines[1].rstrip("\n")
    by_columns = {",".join(v): k for k, v in _COLUMNS.items()}
    col_kind = by_columns.get(columns)
    if col_kind is None:
        raise SchemaMismatch(f"unknown column set {columns!r}")
    if kind is not None and kind != col_kind:
        raise SchemaMismatch(f"header kind {kind!r} does not match columns {col_kind!r}")
    kind = col_kind
    want = len(_COLUMNS[kind])
    records = []
    last = len(lines) - 1
    for i, line in enumerate(lines[2:], start=2):
        complete = line.endswith("\n")
        cells = line.rstrip("\n").split(",")
        try:
            if len(cells) != want:
                raise ValueError(f"expected {want} cells, got {len(cells)}")
            records.append(_parse_cells(kind, cells))
        except (ValueError, IndexError) as exc:
            if i == last and not complete:
                break  # interrupted write; resume will redo this row
            raise SchemaMismatch(f"bad row {i + 1}: {line!r}: {exc}") from exc
        if i == last and not complete:
            records.pop()  # complete-looking prefix of a longer row
    return LoadedResults(kind, config, tuple(records))


def resume_point(path) -> int | None:
    """Largest key already stored at path, or None if nothing usable survives.

    Only complete lines count, so a file truncated mid-write (even inside the
    header) reports the last fully stored key; a complete but alien header
    still raises SchemaMismatch.
    """
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        return None
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob.lstrip()[:1] == b"{":
        loaded = load_results(path)
        return max((r.key for r in loaded.records), default=None)
    cut = blob.rfind(b"\n")
    if cut < 0:
        return None
    lines = blob[:cut].split(b"\n")
    _parse_header(lines[0].decode())
    best = None
    for line in lines[2:]:
        try:
            key = int(line.split(b",", 1)[0])
        except ValueError:
            continue
        if best is None or key > best:
            best = key
    return best
