"""Tests for the quadratic-order machinery against brute-force oracles."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catmap import CatMap, DEFAULT_MAP, factorize, order_mod, order_mod_brute, primes_up_to
from catmap.errors import (
    BudgetExceeded,
    EtaOutOfRange,
    NotPrime,
    ZeroVector,
)
from catmap.quadorder import (
    ClassSplit,
    CongruenceCount,
    PrimeClass,
    SplitType,
    classify_prime,
    congruence_count,
    lcm_defect,
    minus_one_exponent,
    norm_one_count,
    order_profile,
    small_order_modulus,
    split_by_class,
    splitting_character,
    trivial_solution_count,
)

A = DEFAULT_MAP


# --- oracles ---------------------------------------------------------------

def orbit_rows(m: CatMap, N: int, n: tuple[int, int]) -> list[tuple[int, int]]:
    r = order_mod(m, N)
    x, y = n
    out = []
    for _ in range(r):
        x, y = (x * m.a + y * m.c) % N, (x * m.b + y * m.d) % N
        out.append((x, y))
    return out


def brute_nu(m: CatMap, N: int, n: tuple[int, int]) -> int:
    """O(r^4) enumeration of the quartic congruence, the oracle."""
    rows = orbit_rows(m, N, n)
    wx = np.array([p[0] for p in rows], dtype=np.int64)
    wy = np.array([p[1] for p in rows], dtype=np.int64)
    X = (
        wx[:, None, None, None]
        - wx[None, :, None, None]
        + wx[None, None, :, None]
        - wx[None, None, None, :]
    ) % N
    Y = (
        wy[:, None, None, None]
        - wy[None, :, None, None]
        + wy[None, None, :, None]
        - wy[None, None, None, :]
    ) % N
    return int(np.count_nonzero((X == 0) & (Y == 0)))


def brute_trivial(m: CatMap, N: int) -> int:
    """Direct enumeration of the three index families."""
    r = order_mod(m, N)
    t = minus_one_exponent(m, N)
    count = 0
    for i in range(r):
        for j in range(r):
            for k in range(r):
                for l in range(r):
                    fam12 = (i == j and k == l) or (i == l and j == k)
                    fam3 = t is not None and (i - t - k) % r == 0 and (j - t - l) % r == 0
                    if fam12 or fam3:
                        count += 1
    return count


def brute_norm_one(m: CatMap, M: int) -> int:
    t = m.trace
    return sum(
        1
        for x in range(M)
        for y in range(M)
        if (x * x + t * x * y + y * y) % M == 1 % M
    )


def is_square_mod(a: int, p: int) -> bool:
    return any((x * x - a) % p == 0 for x in range(p))


# --- splitting character ---------------------------------------------------

def test_chi_examples():
    assert splitting_character(A, 11) == 1
    assert splitting_character(A, 2) == 0
    assert splitting_character(A, 3) == 0
    assert splitting_character(A, 5) == -1


def test_chi_against_square_search():
    for p in primes_up_to(100).tolist():
        chi = splitting_character(A, p)
        if A.discriminant % p == 0:
            assert chi == 0
        else:
            assert chi == (1 if is_square_mod(A.trace**2 - 4, p) else -1)


def test_chi_rejects_composite():
    with pytest.raises(NotPrime):
        splitting_character(A, 10)


# --- norm-one counts -------------------------------------------------------

def test_norm_one_examples():
    assert norm_one_count(A, 1) == 1
    assert norm_one_count(A, 5) == 6
    assert norm_one_count(A, 25) == 30


def test_norm_one_against_brute():
    for M in [1, 2, 3, 4, 6, 7, 8, 9, 12, 13, 31, 49]:
        assert norm_one_count(A, M) == brute_norm_one(A, M)


def test_norm_one_formula_prime_powers():
    for p in (5, 7, 11, 13):
        chi = splitting_character(A, p)
        for k in (1, 2):
            assert norm_one_count(A, p**k) == p ** (k - 1) * (p - chi)


def test_norm_one_multiplicative():
    rng = random.Random(42)
    done = 0
    while done < 20:
        a = rng.randrange(2, 50)
        b = rng.randrange(2, 50)
        if math.gcd(a, b) != 1:
            continue
        assert norm_one_count(A, a * b) == norm_one_count(A, a) * norm_one_count(A, b)
        done += 1


def test_norm_one_budget():
    with pytest.raises(BudgetExceeded):
        norm_one_count(A, 5000)


def test_order_at_most_norm_one_group():
    # the order of A mod N cannot exceed the size of the norm-one group
    for N in range(2, 400):
        count = 1
        for p, e in factorize(N):
            if A.discriminant % p == 0:
                count *= norm_one_count(A, p**e)
            else:
                count *= p ** (e - 1) * (p - splitting_character(A, p))
        assert order_mod(A, N) <= count


# --- lcm defect ------------------------------------------------------------

def test_lcm_defect_examples():
    assert lcm_defect([7]) == 1
    assert lcm_defect([6, 10]) == math.gcd(6, 10)
    assert lcm_defect([6, 10, 15]) == 30
    assert lcm_defect([]) == 1


@given(
    st.lists(st.integers(1, 50), min_size=1, max_size=5),
    st.lists(st.integers(1, 6), min_size=5, max_size=5),
)
@settings(max_examples=300, deadline=None)
def test_lcm_defect_divisibility(ms, mults):
    # if m_j | n_j entrywise then the defect of M divides the defect of N
    ns = [m * mults[i] for i, m in enumerate(ms)]
    assert lcm_defect(ns) % lcm_defect(ms) == 0


def test_lcm_defect_thousand_random_divisor_pairs():
    rng = random.Random(99)
    for _ in range(1000):
        ms = [rng.randrange(1, 60) for _ in range(rng.randrange(1, 6))]
        ns = [m * rng.randrange(1, 8) for m in ms]
        assert lcm_defect(ns) % lcm_defect(ms) == 0


# --- order profiles --------------------------------------------------------

def test_profile_55():
    p = order_profile(A, 55)
    assert (p.d, p.s, p.d0, p.L, p.ord, p.lower_bound) == (55, 1, 55, 2, 30, 15)
    assert p.omega == 2


def test_profile_360():
    p = order_profile(A, 360)
    assert (p.d, p.s, p.d0) == (10, 6, 5)


def test_profile_prime():
    for p in (7, 11, 13):
        prof = order_profile(A, p)
        assert prof.d0 == p
        assert prof.L == 1
        assert prof.lower_bound == order_mod(A, p)


def test_profile_invariants_small_range():
    for N in range(1, 600):
        p = order_profile(A, N)
        assert p.d * p.s * p.s == N
        dfac = factorize(p.d)
        assert all(e == 1 for _, e in dfac)
        assert math.gcd(p.d0, A.discriminant) == 1
        assert p.ord >= p.lower_bound
        prod = math.prod(q - splitting_character(A, q) for q in factorize(p.d0).primes())
        assert prod % p.L == 0


# --- prime classes ---------------------------------------------------------

def test_classify_examples():
    assert classify_prime(A, 2, 0.55) is PrimeClass.TERRIBLE
    assert classify_prime(A, 11, 0.55) is PrimeClass.GOOD
    assert classify_prime(A, 5, 0.55) is PrimeClass.GOOD


def test_classify_eta_range():
    with pytest.raises(EtaOutOfRange):
        classify_prime(A, 11, 0.5)
    with pytest.raises(EtaOutOfRange):
        classify_prime(A, 11, 0.6)


def test_classify_not_prime():
    with pytest.raises(NotPrime):
        classify_prime(A, 9, 0.55)


def test_split_by_class_examples():
    assert split_by_class(A, 8, 0.55) == ClassSplit(1, 8, 8, 0.55)
    assert split_by_class(A, 55, 0.55) == ClassSplit(55, 1, 1, 0.55)
    assert split_by_class(A, 110, 0.55) == ClassSplit(55, 2, 2, 0.55)


def test_split_by_class_invariants():
    for N in range(1, 300):
        cs = split_by_class(A, N, 0.55)
        assert cs.N_G * cs.N_B == N
        assert cs.N_B % cs.N_T == 0


# --- small-order moduli ----------------------------------------------------

def test_small_order_k1_degenerate():
    so = small_order_modulus(A, 1)
    assert so.det_value == 2
    assert so.N_k == 1
    assert so.degenerate


def test_small_order_k2():
    so = small_order_modulus(A, 2)
    assert so.det_value == 12
    assert so.N_k == 2
    assert all(e.split is SplitType.RAMIFIED for e in so.entries)
    assert order_mod(A, 2) == 2


def test_small_order_k3():
    so = small_order_modulus(A, 3)
    assert so.det_value == 50
    assert so.N_k == 5
    by_prime = {e.prime: e for e in so.entries}
    assert by_prime[2].split is SplitType.RAMIFIED
    assert by_prime[2].modulus_exponent == 0
    assert by_prime[5].split is SplitType.INERT
    assert by_prime[5].det_exponent == 2
    assert by_prime[5].modulus_exponent == 1
    assert order_mod(A, 5) == 3


def test_small_order_invariants_range():
    for k in range(2, 16):
        so = small_order_modulus(A, k)
        # A^k = I mod N_k, so the order divides (hence is at most) k
        if so.N_k > 1:
            assert k % order_mod(A, so.N_k) == 0
        # N_k <= det <= N_k^2 * delta
        assert so.N_k <= so.det_value <= so.N_k**2 * so.ramified_product
        for e in so.entries:
            if e.split is not SplitType.RAMIFIED:
                assert e.det_exponent % 2 == 0


# --- congruence counts -----------------------------------------------------

def test_nu_N5_exact():
    c = congruence_count(A, 5, (1, 0))
    assert c.r == 3
    assert c.minus_one_exponent is None
    assert c.count == 15  # brute force over all 81 tuples
    assert c.trivial_count == 15
    assert 2 * 9 - 3 <= c.count <= 27


def test_nu_N7_exact():
    c = congruence_count(A, 7, (1, 0))
    assert c.r == 8
    assert c.minus_one_exponent == 4
    assert c.count == 168  # brute force over all 4096 tuples
    assert c.trivial_count == 168


def test_nu_zero_vector():
    with pytest.raises(ZeroVector):
        congruence_count(A, 5, (5, 5))


def test_nu_matches_brute():
    for N, n in [(5, (1, 0)), (7, (1, 0)), (7, (2, 3)), (11, (1, 0)), (13, (0, 1)),
                 (9, (1, 1)), (10, (1, 0)), (14, (3, 1))]:
        c = congruence_count(A, N, n)
        assert c.count == brute_nu(A, N, n), (N, n)
        assert c.trivial_count <= c.count <= c.r**4
        assert c.count >= 2 * c.r**2 - c.r


def test_trivial_count_matches_family_enumeration():
    for N in (5, 7, 9, 10, 11, 13):
        assert trivial_solution_count(A, N, (1, 0)) == brute_trivial(A, N), N


def test_trivial_count_r1():
    # a map congruent to the identity mod 3 has order 1 there
    m = CatMap(10, 3, 33, 10)
    assert order_mod(m, 3) == 1
    assert trivial_solution_count(m, 3, (1, 0)) == 1


def test_nu_prime_bound():
    # 2r^2 - r <= nu <= 3r^2 at primes not dividing D_A*det(M_n), n=(1,0)
    for p in primes_up_to(50).tolist():
        if A.discriminant % p == 0:
            continue
        c = congruence_count(A, p, (1, 0))
        assert 2 * c.r**2 - c.r <= c.count <= 3 * c.r**2, p


def test_nu_squarefree_composite_bound():
    # squarefree N coprime to D_A: nu <= 3^omega(N) * r^2
    for N in range(2, 200):
        fac = factorize(N)
        if any(e > 1 for _, e in fac) or math.gcd(N, A.discriminant) != 1:
            continue
        c = congruence_count(A, N, (1, 0))
        assert c.count <= 3 ** len(fac.factors) * c.r**2, N
