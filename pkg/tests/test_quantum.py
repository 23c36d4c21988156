"""Tests for the quantum engine: translations, propagator, spectra, stats."""

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from catmap import CatMap, DEFAULT_MAP, order_mod
from catmap.errors import (
    BudgetExceeded,
    NoScalarPower,
    NotNormalized,
    ZeroVector,
)
from catmap.quantum import (
    Observable,
    Operator,
    StateVector,
    egorov_residual,
    expectation,
    fourth_moment,
    max_deviation,
    propagator,
    propagator_intertwiner,
    spectrum,
    translation,
    translation_trace,
    variance_stat,
    weyl_quantize,
)

A = DEFAULT_MAP
OTHER = CatMap(1, 2, 2, 5)

# frozen regression fixtures, computed with this package and cross-checked
# against a dense numpy eigendecomposition of the same propagator
VARIANCE_N5_COS = 0.32519377823691187
MAX_DEV_N5_COS = 0.7564684118432917
S4_N5 = 0.04730367248713313
BOUND_N5 = 25.0 / 27.0


def naive_translation(N, n):
    """Entry-by-entry construction straight from the defining action."""
    n1, n2 = n
    M = np.zeros((N, N), dtype=complex)
    for Q in range(N):
        M[Q, (Q + n1) % N] = np.exp(1j * np.pi * n1 * n2 / N) * np.exp(
            2j * np.pi * n2 * Q / N
        )
    return M


def row_times(m, n):
    return (n[0] * m.a + n[1] * m.c, n[0] * m.b + n[1] * m.d)


# ---------------------------------------------------------------- translations


def test_translation_matches_naive():
    for N in (1, 2, 3, 5, 8, 12):
        for n in [(0, 0), (1, 0), (0, 1), (2, 3), (-1, 4), (-3, -7), (11, -2)]:
            got = translation(N, n).matrix
            want = naive_translation(N, n)
            assert np.abs(got - want).max() < 1e-12


def test_translation_identity_at_zero():
    assert np.abs(translation(5, (0, 0)).matrix - np.eye(5)).max() == 0.0


def test_translation_adjoint_is_negation():
    for N in (4, 7, 20):
        for n in [(1, 0), (2, 5), (-3, 1), (6, -2)]:
            left = translation(N, n).matrix.conj().T
            right = translation(N, (-n[0], -n[1])).matrix
            assert np.abs(left - right).max() < 1e-10


def test_translation_composition_symplectic_phase():
    for N in (3, 7, 16):
        for m, n in [((1, 2), (3, 4)), ((0, 1), (1, 0)), ((-2, 5), (3, -1))]:
            w = m[0] * n[1] - m[1] * n[0]
            lhs = translation(N, m).matrix @ translation(N, n).matrix
            rhs = np.exp(1j * np.pi * w / N) * translation(N, (m[0] + n[0], m[1] + n[1])).matrix
            assert np.abs(lhs - rhs).max() < 1e-10


def test_heisenberg_relation():
    # t1^a t2^b = t2^b t1^a e_N(ab) entrywise
    for N in (2, 3, 5, 8):
        t1 = translation(N, (1, 0)).matrix
        t2 = translation(N, (0, 1)).matrix
        for a in range(1, N + 1):
            for b in range(1, N + 1):
                lhs = np.linalg.matrix_power(t1, a) @ np.linalg.matrix_power(t2, b)
                rhs = (
                    np.exp(2j * np.pi * a * b / N)
                    * np.linalg.matrix_power(t2, b)
                    @ np.linalg.matrix_power(t1, a)
                )
                assert np.abs(lhs - rhs).max() < 1e-10, (N, a, b)


def test_translation_lattice_period_sign():
    # shifting the index by N*w only flips the sign in a prescribed pattern
    for N in (4, 5, 9):
        for n in [(1, 0), (2, 3), (-1, 2)]:
            for w in [(1, 0), (0, 1), (1, 1), (-1, 2)]:
                shifted = translation(N, (n[0] + N * w[0], n[1] + N * w[1])).matrix
                sign = (-1) ** (w[0] * n[1] + w[1] * n[0] + N * w[0] * w[1])
                assert np.abs(shifted - sign * translation(N, n).matrix).max() < 1e-10


@settings(max_examples=60, deadline=None)
@given(
    N=st.integers(min_value=1, max_value=24),
    n1=st.integers(min_value=-50, max_value=50),
    n2=st.integers(min_value=-50, max_value=50),
)
def test_translation_unitary_property(N, n1, n2):
    assert translation(N, (n1, n2)).is_unitary()


def test_trace_dichotomy_examples():
    assert abs(translation_trace(5, (0, 0)) - 5) < 1e-12
    assert abs(abs(translation_trace(5, (5, 10))) - 5) < 1e-10
    assert abs(translation_trace(5, (1, 3))) <= 1e-8


def test_trace_dichotomy_sweep():
    for N in (4, 7):
        for n1 in range(-2 * N, 2 * N + 1):
            for n2 in range(-2 * N, 2 * N + 1):
                t = abs(translation_trace(N, (n1, n2)))
                if n1 % N == 0 and n2 % N == 0:
                    assert abs(t - N) < 1e-10
                else:
                    assert t <= 1e-8


# ---------------------------------------------------------------- quantization


def test_weyl_single_harmonic_is_translation():
    f = Observable.harmonic((2, -1))
    got = weyl_quantize(9, f).matrix
    assert np.abs(got - translation(9, (2, -1)).matrix).max() < 1e-12


def test_weyl_constant():
    op = weyl_quantize(6, Observable.constant(2.5 - 1j))
    assert np.abs(op.matrix - (2.5 - 1j) * np.eye(6)).max() < 1e-12


def test_weyl_cosine_hermitian():
    f = Observable.cosine(1)
    assert f.is_real_valued()
    assert f.mean == 0
    op = weyl_quantize(11, f)
    assert op.hermiticity_defect() <= 1e-10


def test_observable_validation():
    assert Observable.cosine(2).is_real_valued()
    with pytest.raises(ValueError):
        Observable.cosine(3)
    g = Observable({(1, 0): 1.0, (-1, 0): 0.5})
    assert not g.is_real_valued()


@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_weyl_random_real_observable_hermitian(data):
    N = data.draw(st.integers(min_value=2, max_value=14))
    supp = data.draw(
        st.lists(
            st.tuples(st.integers(-4, 4), st.integers(-4, 4)),
            min_size=1,
            max_size=4,
            unique=True,
        )
    )
    coeffs = {}
    for k, n in enumerate(supp):
        z = complex(1.0 / (k + 1), 0.3 * k)
        coeffs[n] = coeffs.get(n, 0) + z
        neg = (-n[0], -n[1])
        coeffs[neg] = coeffs.get(neg, 0) + z.conjugate()
    f = Observable(coeffs)
    assert f.is_real_valued(1e-9)
    assert weyl_quantize(N, f).hermiticity_defect() <= 1e-10


# ----------------------------------------------------------------- propagator


def test_propagator_egorov_across_paths():
    # odd N hit both closed-form branches; even N go through averaging
    for N in (3, 4, 5, 6, 8, 9, 10, 15, 16, 25, 35, 41):
        U = propagator(A, N)
        assert U.is_unitary()
        assert egorov_residual(U, A, 3) <= 1e-9, N


def test_propagator_other_map():
    for N in (4, 5, 6, 9, 14):
        U = propagator(OTHER, N)
        assert egorov_residual(U, OTHER, 2) <= 1e-9, N


def test_propagator_large_odd_dimension():
    U = propagator(A, 299)
    assert U.unitarity_defect() <= 1e-10
    assert egorov_residual(U, A, 1) <= 1e-9


def test_propagator_matches_intertwiner_oracle():
    # N=35 exercises the closed-form path against the averaging oracle
    for N in (5, 9, 35):
        fast = propagator(A, N)
        oracle = propagator_intertwiner(A, N)
        assert np.abs(fast.matrix - oracle.matrix).max() <= 1e-9, N


def test_propagator_conjugates_zero_vector_to_identity():
    U = propagator(A, 5)
    got = U.matrix @ translation(5, (0, 0)).matrix @ U.matrix.conj().T
    assert np.abs(got - np.eye(5)).max() < 1e-10


def test_egorov_residual_detects_corruption():
    U = propagator(A, 7)
    bad = U.matrix.copy()
    bad[2, 3] += 0.01
    assert egorov_residual(Operator(7, bad), A, 2) > 1e-3


def test_egorov_residual_nmax_zero():
    assert egorov_residual(propagator(A, 9), A, 0) == 0.0


def test_propagator_input_validation():
    with pytest.raises(ValueError):
        propagator(A, 1)
    with pytest.raises(BudgetExceeded):
        propagator(A, 66)  # even, beyond the averaging cap
    with pytest.raises(BudgetExceeded):
        propagator_intertwiner(A, 70)


def test_propagator_phase_convention():
    for N in (5, 8, 35):
        col = propagator(A, N).matrix[:, 0]
        mags = np.abs(col)
        idx = int(np.argmax(mags >= mags.max() * (1 - 1e-9)))
        assert abs(col[idx].imag) < 1e-12 and col[idx].real > 0


# -------------------------------------------------------------------- spectra


def test_spectrum_identity_operator():
    sp = spectrum(Operator.identity(7), 1)
    assert sp.scalar_period == 1
    assert sp.multiplicities() == (7,)
    assert abs(sp.levels[0].eigenphase - 1) < 1e-12


def test_spectrum_completeness_and_orthonormality():
    for N in (5, 8, 11, 16, 21):
        U = propagator(A, N)
        r = order_mod(A, N)
        sp = spectrum(U, r)
        assert r <= sp.scalar_period <= 2 * r or sp.scalar_period <= r
        assert sum(sp.multiplicities()) == N
        B = sp.eigenbasis()
        gram = B.conj().T @ B / N
        assert np.abs(gram - np.eye(N)).max() <= 1e-10
        lam = sp.eigenphases_per_vector()
        resid = U.matrix @ B - lam[None, :] * B
        per_vec = np.sqrt((np.abs(resid) ** 2).sum(axis=0) / N)
        assert per_vec.max() <= 1e-8
        # every eigenphase is an r*-th root of the global scalar
        for level in sp.levels:
            assert abs(level.eigenphase**sp.scalar_period - np.exp(1j * sp.global_phase)) < 1e-10


def test_spectrum_distinct_phase_count_bounded():
    sp = spectrum(propagator(A, 11), order_mod(A, 11))
    assert len(sp.levels) <= sp.scalar_period <= 2 * order_mod(A, 11) == 20


def test_spectrum_reconstructs_operator():
    for N in (5, 12):
        U = propagator(A, N)
        sp = spectrum(U, order_mod(A, N))
        total = np.zeros((N, N), dtype=complex)
        for level in sp.levels:
            total += level.eigenphase * (level.basis @ level.basis.conj().T) / N
        assert np.abs(total - U.matrix).max() <= 1e-8


def test_spectrum_projectors_idempotent():
    for N in (5, 8):
        sp = spectrum(propagator(A, N), order_mod(A, N))
        for level in sp.levels:
            P = level.basis @ level.basis.conj().T / N
            assert np.abs(P @ P - P).max() <= 1e-8


def test_spectrum_rejects_aperiodic_unitary():
    angles = 2 * np.pi * np.array([0.1234567, 0.7071067, 0.3141592, 0.9182736])
    U = Operator(4, np.diag(np.exp(1j * angles)))
    with pytest.raises(NoScalarPower):
        spectrum(U, 3)


# --------------------------------------------------------------- expectations


def test_expectation_identity_and_constant():
    psi = StateVector(6, np.ones(6))
    assert abs(expectation(Operator.identity(6), psi) - 1) < 1e-12
    op = weyl_quantize(6, Observable.constant(3.25))
    assert abs(expectation(op, psi) - 3.25) < 1e-12


def test_expectation_requires_normalized_state():
    psi = StateVector(4, 2 * np.ones(4))
    with pytest.raises(NotNormalized):
        expectation(Operator.identity(4), psi)


def test_expectation_hermitian_real_and_bounded():
    sp = spectrum(propagator(A, 13), order_mod(A, 13))
    op = weyl_quantize(13, Observable.cosine(1))
    T = translation(13, (1, 0))
    for level in sp.levels:
        for i in range(level.multiplicity):
            psi = StateVector(13, level.basis[:, i])
            val = expectation(op, psi)
            assert abs(val.imag) <= 1e-10
            # unit operator norm gives a Cauchy-Schwarz bound
            assert abs(expectation(T, psi)) <= 1 + 1e-10


def test_state_vector_basics():
    psi = StateVector(4, [2, 0, 0, 0])
    assert abs(psi.norm() - 1.0) < 1e-12
    assert psi.is_normalized()
    phi = psi.normalized()
    assert np.allclose(phi.amplitudes, psi.amplitudes)
    assert abs(psi.inner(psi) - 1.0) < 1e-12
    with pytest.raises(ValueError):
        StateVector(3, [1, 2])
    with pytest.raises(ValueError):
        StateVector(2, [0, 0]).normalized()


# ------------------------------------------------------------------ statistics


def test_variance_fixture_n5():
    assert variance_stat(A, 5, Observable.cosine(1)) == pytest.approx(
        VARIANCE_N5_COS, abs=1e-8
    )


def test_max_deviation_fixture_n5():
    assert max_deviation(A, 5, Observable.cosine(1)) == pytest.approx(
        MAX_DEV_N5_COS, abs=1e-8
    )


def test_variance_constant_observable_vanishes():
    assert variance_stat(A, 7, Observable.constant(4.2)) <= 1e-12
    assert max_deviation(A, 7, Observable.constant(4.2)) <= 1e-10


def test_variance_in_unit_interval_n5():
    v = variance_stat(A, 5, Observable.cosine(1))
    assert 0.0 <= v <= 1.0


def test_variance_decreasing_trend():
    f = Observable.cosine(1)
    values = []
    for N in (11, 23, 47, 101):
        sp = spectrum(propagator(A, N), order_mod(A, N))
        values.append(variance_stat(A, N, f, eigsys=sp))
    assert values == sorted(values, reverse=True)


def test_fourth_moment_fixture_and_bound():
    fm = fourth_moment(A, 5, (1, 0))
    assert fm.s4 == pytest.approx(S4_N5, abs=1e-9)
    assert fm.bound == pytest.approx(BOUND_N5, rel=1e-12)
    assert fm.solution_count == 15 and fm.order == 3
    assert fm.s4 <= fm.bound * (1 + 1e-6)


def test_fourth_moment_bound_primes():
    for N in (7, 11, 13):
        fm = fourth_moment(A, N, (1, 0))
        assert fm.s4 <= fm.bound * (1 + 1e-6) + 1e-10


def test_fourth_moment_zero_vector_rejected():
    with pytest.raises(ZeroVector):
        fourth_moment(A, 5, (0, 0))
    with pytest.raises(ZeroVector):
        fourth_moment(A, 5, (5, 10))


def test_fourth_moment_single_term_below_total():
    sp = spectrum(propagator(A, 11), order_mod(A, 11))
    fm = fourth_moment(A, 11, (1, 0), eigsys=sp)
    B = sp.eigenbasis()
    vals = (np.conj(B) * (translation(11, (1, 0)).matrix @ B)).sum(axis=0) / 11
    assert (np.abs(vals) ** 4).max() <= fm.s4 + 1e-15


def _rotated_basis(sp, seed):
    cols = []
    for k, level in enumerate(sp.levels):
        m = level.multiplicity
        if m == 1:
            W = np.eye(1)
        else:
            W = scipy.stats.unitary_group.rvs(m, random_state=seed + k)
        cols.append(level.basis @ W)
    return np.hstack(cols)


def test_block_statistic_invariant_under_rotations():
    # the full within-eigenspace Frobenius mass is basis-independent even
    # though the plain diagonal variance is not
    N = 5
    sp = spectrum(propagator(A, N), order_mod(A, N))
    op = weyl_quantize(N, Observable.cosine(1)).matrix

    def block_mass(B):
        total = 0.0
        offset = 0
        for level in sp.levels:
            m = level.multiplicity
            V = B[:, offset : offset + m]
            block = V.conj().T @ (op @ V) / N
            total += float(np.sum(np.abs(block) ** 2))
            offset += m
        return total / N

    base = block_mass(sp.eigenbasis())
    for seed in (1, 2, 3):
        assert block_mass(_rotated_basis(sp, 100 * seed)) == pytest.approx(base, abs=1e-10)


def test_diagonal_variance_is_basis_dependent():
    # documents why reported statistics fix the canonical basis: rotating
    # inside degenerate eigenspaces moves the diagonal-only variance
    N = 5
    sp = spectrum(propagator(A, N), order_mod(A, N))
    op = weyl_quantize(N, Observable.cosine(1)).matrix
    base = variance_stat(A, N, Observable.cosine(1), eigsys=sp)
    spread = 0.0
    for seed in (11, 22, 33):
        B = _rotated_basis(sp, seed)
        vals = (np.conj(B) * (op @ B)).sum(axis=0) / N
        spread = max(spread, abs(float(np.mean(np.abs(vals) ** 2)) - base))
    assert spread > 1e-3


def test_fourth_moment_bound_holds_for_rotated_bases():
    # the ceiling is uniform over eigenbases, not just the canonical one
    for N in (5, 13):
        sp = spectrum(propagator(A, N), order_mod(A, N))
        fm = fourth_moment(A, N, (1, 0), eigsys=sp)
        T = translation(N, (1, 0)).matrix
        for seed in (5, 6):
            B = _rotated_basis(sp, seed)
            vals = (np.conj(B) * (T @ B)).sum(axis=0) / N
            s4 = float(np.sum(np.abs(vals) ** 4))
            assert s4 <= fm.bound * (1 + 1e-6) + 1e-10


# -------------------------------------------------------------- serialization


def test_operator_json_roundtrip():
    U = propagator(A, 6)
    data = U.to_jsonable()
    assert data["N"] == 6
    back = Operator.from_jsonable(data)
    assert np.abs(back.matrix - U.matrix).max() < 1e-15


def test_spectrum_jsonable_layout():
    sp = spectrum(propagator(A, 5), order_mod(A, 5))
    data = sp.to_jsonable()
    assert data["N"] == 5 and data["scalar_period"] == sp.scalar_period
    level = data["levels"][0]
    cos, sin = level["eigenphase"]
    assert abs(complex(cos, sin)) == pytest.approx(1.0, abs=1e-12)
    assert len(level["basis"]) == level["multiplicity"]
    assert sum(lv["multiplicity"] for lv in data["levels"]) == 5
