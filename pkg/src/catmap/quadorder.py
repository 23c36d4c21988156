"""Arithmetic of the real quadratic order attached to a hyperbolic map.

Splitting character, norm-one counts on residue rings, order profiles built
from the squarefree decomposition, good/bad/terrible prime classification,
the small-order modulus sequence, and the quartic congruence counter that
controls fourth moments of matrix elements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .arith import (
    CatMap,
    Factorization,
    _legendre,
    _pair_hits,
    _pair_pow,
    _power_is_identity,
    factorize,
    is_probable_prime,
    order_mod,
)
from .errors import (
    BudgetExceeded,
    DegenerateK,
    EtaOutOfRange,
    NotPrime,
    ZeroVector,
)

__all__ = [
    "SplitType",
    "PrimeClass",
    "OrderProfile",
    "ClassSplit",
    "SmallOrderEntry",
    "SmallOrderFactorization",
    "CongruenceCount",
    "splitting_character",
    "norm_one_count",
    "lcm_defect",
    "order_profile",
    "classify_prime",
    "split_by_class",
    "small_order_modulus",
    "congruence_count",
    "trivial_solution_count",
    "minus_one_exponent",
]

ETA_LOW, ETA_HIGH = 0.5, 0.6

NORM_COUNT_LIMIT = 4096  # norm_one_count is O(M^2); refuse beyond this


class SplitType(Enum):
    SPLIT = "split"
    INERT = "inert"
    RAMIFIED = "ramified"


class PrimeClass(Enum):
    GOOD = "good"
    BAD = "bad"
    TERRIBLE = "terrible"


def _check_prime(p: int) -> None:
    if p < 2 or not is_probable_prime(p):
        raise NotPrime(f"{p} is not prime")


def _check_eta(eta: float) -> None:
    if not (ETA_LOW < eta < ETA_HIGH):
        raise EtaOutOfRange(f"eta must lie in ({ETA_LOW}, {ETA_HIGH}), got {eta}")


def splitting_character(m: CatMap, p: int) -> int:
    """chi(p): 0 if p divides the discriminant, else Legendre of tr^2 - 4."""
    _check_prime(p)
    if m.discriminant % p == 0:
        return 0
    return _legendre(m.trace * m.trace - 4, p)


def norm_one_count(m: CatMap, modulus: int, *, limit: int = NORM_COUNT_LIMIT) -> int:
    """Count pairs (x, y) mod M with x^2 + tr*x*y + y^2 = 1 mod M.

    This is the number of norm-one elements of the quadratic order reduced
    mod M, because det(x*I + y*A) equals that quadratic form.  Brute force,
    O(M^2); guarded by `limit`.
    """
    if modulus < 1:
        raise ValueError(f"modulus must be >= 1, got {modulus}")
    if modulus > limit:
        raise BudgetExceeded(f"norm_one_count is O(M^2); M={modulus} > limit={limit}")
    t = m.trace % modulus
    y = np.arange(modulus, dtype=np.int64)
    total = 0
    block = max(1, (1 << 22) // max(modulus, 1))
    for lo in range(0, modulus, block):
        x = np.arange(lo, min(lo + block, modulus), dtype=np.int64)[:, None]
        vals = (x * x + t * x * y[None, :] + y[None, :] ** 2) % modulus
        total += int(np.count_nonzero(vals == 1 % modulus))
    return total


def lcm_defect(ms: list[int] | tuple[int, ...]) -> int:
    """(prod of ms) / lcm(ms): how far a list of integers is from coprime.

    Equals 1 for a single entry and gcd(m1, m2) for a pair.
    """
    if not ms:
        return 1
    if any(v < 1 for v in ms):
        raise ValueError("entries must be >= 1")
    return math.prod(ms) // math.lcm(*ms)


@dataclass(frozen=True)
class OrderProfile:
    """Squarefree decomposition N = d*s^2 and the order lower bound data."""

    N: int
    d: int
    s: int
    d0: int
    L: int
    ord: int
    lower_bound: int
    omega: int


def _squarefree_decomposition(fac: Factorization) -> tuple[int, int]:
    d = s = 1
    for p, e in fac:
        if e % 2:
            d *= p
        s *= p ** (e // 2)
    return d, s


def order_profile(m: CatMap, N: int, factors: Factorization | None = None) -> OrderProfile:
    """Profile of N: d, s, d0 = d/gcd(d, D), L(N), ord, and the lower bound.

    The lower bound prod_{p | d0} ord(A, p) / L(N) (rounded down) never
    exceeds ord(A, N).
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    fac = factors if factors is not None else factorize(N)
    d, s = _squarefree_decomposition(fac)
    d0 = d // math.gcd(d, m.discriminant)
    d0_primes = [p for p, _ in fac if d0 % p == 0]
    L = lcm_defect([p - splitting_character(m, p) for p in d0_primes]) if d0_primes else 1
    prod_orders = math.prod(order_mod(m, p) for p in d0_primes)
    return OrderProfile(
        N=N,
        d=d,
        s=s,
        d0=d0,
        L=L,
        ord=order_mod(m, N, fac),
        lower_bound=prod_orders // L,
        omega=len(fac.factors),
    )


def classify_prime(m: CatMap, p: int, eta: float) -> PrimeClass:
    """Good / Bad / Terrible, as a function of (p, ord(A, p)) alone.

    Good: p coprime to the discriminant and ord(A,p) >= p^eta.
    Terrible: p divides the discriminant, or ord(A,p) < sqrt(p)/log(p).
    Bad: everything else.  (Terrible primes are also Bad; they are reported
    as Terrible.)
    """
    _check_eta(eta)
    _check_prime(p)
    if m.discriminant % p == 0:
        return PrimeClass.TERRIBLE
    o = order_mod(m, p)
    if o < math.sqrt(p) / math.log(p):
        return PrimeClass.TERRIBLE
    if o >= p**eta:
        return PrimeClass.GOOD
    return PrimeClass.BAD


@dataclass(frozen=True)
class ClassSplit:
    """N = N_G * N_B with N_T | N_B collecting the terrible part."""

    N_G: int
    N_B: int
    N_T: int
    eta: float


def split_by_class(m: CatMap, N: int, eta: float) -> ClassSplit:
    """Split N into good and bad parts by classifying each prime factor."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    _check_eta(eta)
    ng = nb = nt = 1
    for p, e in factorize(N):
        cls = classify_prime(m, p, eta)
        q = p**e
        if cls is PrimeClass.GOOD:
            ng *= q
        else:
            nb *= q
            if cls is PrimeClass.TERRIBLE:
                nt *= q
    return ClassSplit(N_G=ng, N_B=nb, N_T=nt, eta=eta)


@dataclass(frozen=True)
class SmallOrderEntry:
    prime: int
    det_exponent: int
    split: SplitType
    modulus_exponent: int


@dataclass(frozen=True)
class SmallOrderFactorization:
    """Factorization of |det(A^k - I)| and the modulus N_k extracted from it."""

    k: int
    det_value: int
    entries: tuple[SmallOrderEntry, ...]
    N_k: int
    shrunk: bool
    certified: bool

    @property
    def ramified_product(self) -> int:
        return math.prod(
            e.prime for e in self.entries if e.split is SplitType.RAMIFIED
        )

    @property
    def degenerate(self) -> bool:
        """True when no usable modulus was extracted (N_k = 1)."""
        return self.N_k == 1


def _pow_exact(m: CatMap, k: int) -> tuple[int, int, int, int]:
    """A^k over the integers (no reduction)."""
    u, v = 1, 0  # A^k = u*I + v*A via the characteristic polynomial
    bu, bv = 0, 1
    t = m.trace
    while k:
        if k & 1:
            u, v = u * bu - v * bv, u * bv + v * bu + t * v * bv
        bu, bv = bu * bu - bv * bv, 2 * bu * bv + t * bv * bv
        k >>= 1
    return (u + v * m.a, v * m.b, v * m.c, u + v * m.d)


def small_order_modulus(
    m: CatMap, k: int, *, factor_budget: int | None = None
) -> SmallOrderFactorization:
    """Build the modulus N_k <= sqrt-ish of |det(A^k - I)| with A^k = I mod N_k.

    Split and inert primes contribute half their (always even) exponent in
    det(A^k - I); primes dividing the discriminant contribute the floor of
    half.  A final descent shrinks N_k if A^k = I fails at some prime power
    (the construction only guarantees divisibility in the maximal order).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pa, pb, pc, pd = _pow_exact(m, k)
    det = (pa - 1) * (pd - 1) - pb * pc
    if det == 0:
        raise DegenerateK(f"A^{k} = I over the integers")
    fac = factorize(abs(det), budget=factor_budget)
    entries = []
    n_k = 1
    shrunk = False
    for p, e in fac:
        if m.discriminant % p == 0:
            split = SplitType.RAMIFIED
            contrib = e // 2
        else:
            split = (
                SplitType.SPLIT
                if _legendre(m.trace * m.trace - 4, p) == 1
                else SplitType.INERT
            )
            if e % 2:
                raise RuntimeError(
                    f"odd exponent {e} at unramified prime {p} in det(A^{k} - I)"
                )
            contrib = e // 2
        # descent: drop the exponent until A^k = I mod p^contrib actually holds
        while contrib > 0 and not _power_is_identity(m, k, p**contrib):
            contrib -= 1
            shrunk = True
        entries.append(SmallOrderEntry(p, e, split, contrib))
        n_k *= p**contrib
    return SmallOrderFactorization(
        k=k,
        det_value=abs(det),
        entries=tuple(entries),
        N_k=n_k,
        shrunk=shrunk,
        certified=fac.certified,
    )


# --------------------------------------------------------------------------
# the quartic congruence counter
# --------------------------------------------------------------------------

def _reduced_vector(n: tuple[int, int], modulus: int) -> tuple[int, int]:
    v = (n[0] % modulus, n[1] % modulus)
    if v == (0, 0):
        raise ZeroVector(f"n = {n} is congruent to (0,0) mod {modulus}")
    return v


def minus_one_exponent(m: CatMap, modulus: int) -> int | None:
    """Smallest t >= 1 with A^t = -I mod `modulus`, or None."""
    r = order_mod(m, modulus)
    t_mod = m.trace % modulus
    u, v = 1 % modulus, 0
    for t in range(1, r + 1):
        u, v = (-v) % modulus, (u + t_mod * v) % modulus  # multiply by A
        if _pair_hits((u, v), m, modulus, -1):
            return t
    return None


@dataclass(frozen=True)
class CongruenceCount:
    """Solution count of n(A^i - A^j + A^k - A^l) = 0 mod N over [1,r]^4."""

    N: int
    n: tuple[int, int]
    r: int
    count: int
    trivial_count: int
    minus_one_exponent: int | None


def _orbit(m: CatMap, modulus: int, n: tuple[int, int]) -> list[tuple[int, int]]:
    """Row vectors n*A^i mod `modulus` for i = 1..ord(A, modulus)."""
    r = order_mod(m, modulus)
    x, y = n[0] % modulus, n[1] % modulus
    rows = []
    for _ in range(r):
        x, y = (x * m.a + y * m.c) % modulus, (x * m.b + y * m.d) % modulus
        rows.append((x, y))
    return rows


def congruence_count(m: CatMap, modulus: int, n: tuple[int, int]) -> CongruenceCount:
    """Count quadruples (i,j,k,l) with n(A^i - A^j + A^k - A^l) = 0 mod N.

    O(r^2): tabulate the multiset {n(A^i - A^j) mod N} and pair each value v
    with -v.  The count controls the fourth moment of matrix elements of the
    quantized translation by n.
    """
    if modulus < 2:
        raise ValueError(f"modulus must be >= 2, got {modulus}")
    _reduced_vector(n, modulus)
    rows = _orbit(m, modulus, n)
    r = len(rows)
    table: dict[tuple[int, int], int] = {}
    for xi, yi in rows:
        for xj, yj in rows:
            key = ((xi - xj) % modulus, (yi - yj) % modulus)
            table[key] = table.get(key, 0) + 1
    total = 0
    for (x, y), cnt in table.items():
        total += cnt * table.get(((-x) % modulus, (-y) % modulus), 0)
    t = minus_one_exponent(m, modulus)
    return CongruenceCount(
        N=modulus,
        n=n,
        r=r,
        count=total,
        trivial_count=trivial_solution_count(m, modulus, n),
        minus_one_exponent=t,
    )


def trivial_solution_count(m: CatMap, modulus: int, n: tuple[int, int]) -> int:
    """Size of the union of the three always-solving index families.

    The families, with indices mod r: (i,k) = (j,l); {i = l, j = k}; and,
    when some power t has A^t = -I mod N, the pairs (i,j) = (t+k, t+l)
    coming from (A^i, A^j) = (-A^k, -A^l).  Counted by inclusion-exclusion:
    2r^2 - r without t, and 3r^2 - 3r + [r | t]*r with it.
    """
    if modulus < 2:
        raise ValueError(f"modulus must be >= 2, got {modulus}")
    _reduced_vector(n, modulus)
    r = order_mod(m, modulus)
    t = minus_one_exponent(m, modulus)
    if t is None:
        return 2 * r * r - r
    return 3 * r * r - 3 * r + (r if t % r == 0 else 0)
