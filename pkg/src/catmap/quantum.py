"""Quantum model on an N-point discretized torus.

States are complex functions on Z/NZ with the normalized inner product
<phi, psi> = (1/N) * sum_Q phi(Q) * conj(psi(Q)).  Phase-space translations
act through the finite Heisenberg group; quantizing an integer cat map gives
a unitary propagator that conjugates translations according to the classical
action on lattice vectors (row vector times matrix).

Construction of the propagator uses a closed-form quadratic-phase kernel for
odd N (directly when the lower-left entry is invertible mod N, otherwise for
the rotated map conjugated back through the discrete Fourier transform), and
a group-averaged projection onto the intertwiner space for the remaining
dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd, pi, sqrt
from typing import Iterator, Mapping

import numpy as np
import scipy.linalg

from .arith import CatMap, order_mod
from .errors import (
    BudgetExceeded,
    ConstructionFailed,
    NoScalarPower,
    NotNormalized,
    NotUnitary,
    ZeroVector,
)
from .quadorder import CongruenceCount, congruence_count

UNITARY_TOL = 1e-10
EGOROV_TOL = 1e-9
SPECTRAL_TOL = 1e-8
MULTIPLICITY_TOL = 1e-6
INTERTWINER_LIMIT = 64

# memory cap for simultaneously accumulated spectral projectors
_PROJECTOR_CHUNK_BYTES = 256 << 20


def _as_complex_matrix(matrix, N: int) -> np.ndarray:
    out = np.array(matrix, dtype=np.complex128)
    if out.shape != (N, N):
        raise ValueError(f"expected a {N}x{N} matrix, got shape {out.shape}")
    return out


@dataclass(frozen=True, eq=False)
class StateVector:
    """Wave function on Z/NZ under the normalized inner product."""

    N: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("dimension must be positive")
        arr = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if arr.shape != (self.N,):
            raise ValueError(f"expected {self.N} amplitudes, got {arr.shape}")
        object.__setattr__(self, "amplitudes", arr)

    def inner(self, other: "StateVector") -> complex:
        """<self, other>, conjugate-linear in the second argument."""
        return complex(np.vdot(other.amplitudes, self.amplitudes)) / self.N

    def norm(self) -> float:
        return sqrt(float(np.sum(np.abs(self.amplitudes) ** 2)) / self.N)

    def normalized(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero state")
        return StateVector(self.N, self.amplitudes / nrm)

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.norm() ** 2 - 1.0) <= tol


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense linear operator on the N-point state space."""

    N: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("dimension must be positive")
        object.__setattr__(self, "matrix", _as_complex_matrix(self.matrix, self.N))

    @classmethod
    def identity(cls, N: int) -> "Operator":
        return cls(N, np.eye(N, dtype=np.complex128))

    def adjoint(self) -> "Operator":
        return Operator(self.N, self.matrix.conj().T)

    def apply(self, psi: StateVector) -> StateVector:
        if psi.N != self.N:
            raise ValueError("dimension mismatch")
        return StateVector(self.N, self.matrix @ psi.amplitudes)

    def __matmul__(self, other: "Operator") -> "Operator":
        if other.N != self.N:
            raise ValueError("dimension mismatch")
        return Operator(self.N, self.matrix @ other.matrix)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def unitarity_defect(self) -> float:
        delta = self.matrix.conj().T @ self.matrix - np.eye(self.N)
        return float(np.abs(delta).max())

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        return self.unitarity_defect() <= tol

    def is_hermitian(self, tol: float = UNITARY_TOL) -> bool:
        return self.hermiticity_defect() <= tol

    def to_jsonable(self) -> dict:
        """JSON layout: {"N": int, "matrix": rows of [re, im] pairs}."""
        stacked = np.stack([self.matrix.real, self.matrix.imag], axis=-1)
        return {"N": self.N, "matrix": stacked.tolist()}

    @classmethod
    def from_jsonable(cls, data: dict) -> "Operator":
        raw = np.asarray(data["matrix"], dtype=float)
        return cls(int(data["N"]), raw[..., 0] + 1j * raw[..., 1])


@dataclass(frozen=True, eq=False)
class Observable:
    """Classical observable given by finitely many Fourier coefficients.

    Keys are integer lattice vectors n = (n1, n2); the coefficient at (0, 0)
    is the phase-space average of the function.
    """

    coefficients: Mapping[tuple, complex]

    def __post_init__(self):
        clean = {}
        for key, value in self.coefficients.items():
            n1, n2 = key
            clean[(int(n1), int(n2))] = complex(value)
        object.__setattr__(self, "coefficients", clean)

    @classmethod
    def constant(cls, value: complex) -> "Observable":
        return cls({(0, 0): value})

    @classmethod
    def harmonic(cls, n) -> "Observable":
        """The single plane wave with unit coefficient at frequency n."""
        return cls({(int(n[0]), int(n[1])): 1.0})

    @classmethod
    def cosine(cls, axis: int = 1) -> "Observable":
        """2*cos(2*pi*x_axis) for axis 1 or 2."""
        if axis == 1:
            return cls({(1, 0): 1.0, (-1, 0): 1.0})
        if axis == 2:
            return cls({(0, 1): 1.0, (0, -1): 1.0})
        raise ValueError("axis must be 1 or 2")

    @property
    def mean(self) -> complex:
        return self.coefficients.get((0, 0), 0.0 + 0.0j)

    def is_real_valued(self, tol: float = 1e-12) -> bool:
        keys = set(self.coefficients)
        for n1, n2 in keys | {(-n1, -n2) for n1, n2 in keys}:
            left = self.coefficients.get((n1, n2), 0.0)
            right = self.coefficients.get((-n1, -n2), 0.0)
            if abs(complex(left).conjugate() - complex(right)) > tol:
                return False
        return True

    def items(self) -> Iterator:
        return iter(sorted(self.coefficients.items()))


def translation(N: int, n) -> Operator:
    """Phase-space translation operator for the lattice vector n.

    Acts by (T psi)(Q) = exp(i*pi*n1*n2/N) * exp(2*pi*i*n2*Q/N) * psi(Q + n1).
    All phase arguments are reduced as exact integers, so the matrix depends
    on n only through n mod 2N.
    """
    if N < 1:
        raise ValueError("dimension must be positive")
    n1, n2 = int(n[0]), int(n[1])
    Q = np.arange(N)
    half = (n1 * n2) % (2 * N)
    ramp = ((n2 % N) * Q) % N
    phase = np.exp(1j * pi * half / N) * np.exp(2j * pi * ramp / N)
    matrix = np.zeros((N, N), dtype=np.complex128)
    matrix[Q, (Q + n1) % N] = phase
    return Operator(N, matrix)


def translation_trace(N: int, n) -> complex:
    """Trace of the translation operator at n (N when n vanishes mod N)."""
    return translation(N, n).trace()


def weyl_quantize(N: int, f: Observable) -> Operator:
    """Operator sum of translations weighted by the Fourier coefficients."""
    matrix = np.zeros((N, N), dtype=np.complex128)
    for n, coeff in f.items():
        matrix += coeff * translation(N, n).matrix
    return Operator(N, matrix)


def _row_times(m: CatMap, n) -> tuple:
    """Row vector n times the matrix, in exact integers."""
    return (n[0] * m.a + n[1] * m.c, n[0] * m.b + n[1] * m.d)


def _gauss_kernel(m: CatMap, N: int) -> np.ndarray:
    """Quadratic-phase propagator kernel; needs odd N and gcd(c, N) = 1."""
    beta = pow((2 * m.c) % N, -1, N)
    a = m.a % N
    d = m.d % N
    Q = np.arange(N)
    expo = (beta * (a * Q[:, None] ** 2 - 2 * Q[:, None] * Q[None, :] + d * Q[None, :] ** 2)) % N
    return np.exp(2j * pi * expo / N) / sqrt(N)


def _fourier_matrix(N: int) -> np.ndarray:
    P = np.arange(N)
    return np.exp(-2j * pi * np.outer(P, P) / N) / sqrt(N)


def _generator_defect(matrix: np.ndarray, m: CatMap, N: int) -> float:
    worst = 0.0
    for g in ((1, 0), (0, 1)):
        lhs = translation(N, g).matrix @ matrix
        rhs = matrix @ translation(N, _row_times(m, g)).matrix
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def _cyclic_average(X: np.ndarray, left: np.ndarray, right: np.ndarray, steps: int) -> np.ndarray:
    acc = X.copy()
    Y = X
    for _ in range(steps - 1):
        Y = left @ Y @ right
        acc += Y
    return acc / steps


def _averaged_intertwiner(m: CatMap, N: int) -> np.ndarray:
    """Solve the generator intertwining relations by group averaging.

    Conjugating a matrix by the translation pair of each generator is a
    unitary map of order dividing 2N on matrix space, and the two maps
    commute, so averaging both orbits projects orthogonally onto the joint
    fixed space.  That space is exactly the solution set of the two linear
    generator relations, and is at most one-dimensional because the
    translation operators act irreducibly.
    """
    left1 = translation(N, (-1, 0)).matrix
    right1 = translation(N, _row_times(m, (1, 0))).matrix
    left2 = translation(N, (0, -1)).matrix
    right2 = translation(N, _row_times(m, (0, 1))).matrix

    def project(X):
        once = _cyclic_average(X, left1, right1, 2 * N)
        return _cyclic_average(once, left2, right2, 2 * N)

    # A seed with a nonzero component along the intertwiner survives the
    # projection; some entry of row 0 of the (unitary) solution has modulus
    # at least N**-0.5, so scanning one matrix row must pass the threshold.
    threshold = 1.0 / (sqrt(2.0) * N)
    candidates = [np.eye(N, dtype=np.complex128)]
    image = None
    for q in range(N + 1):
        if q > 0:
            seed = np.zeros((N, N), dtype=np.complex128)
            seed[0, q - 1] = 1.0
            candidates.append(seed)
        Y = project(candidates[-1])
        if np.linalg.norm(Y) >= threshold:
            image = Y
            break
    if image is None:
        raise ConstructionFailed(
            f"intertwiner projection vanished on every seed at N={N}"
        )
    return image * (sqrt(N) / np.linalg.norm(image))


def _fix_global_phase(matrix: np.ndarray) -> np.ndarray:
    """Rotate so the leading entry of column 0 is positive real.

    Ties in magnitude (flat columns are common here) break to the smallest
    row index, which keeps the convention reproducible across code paths.
    """
    col = matrix[:, 0]
    mags = np.abs(col)
    top = mags.max()
    if top == 0.0:
        raise ConstructionFailed("zero leading column while fixing the phase")
    idx = int(np.argmax(mags >= top * (1.0 - 1e-9)))
    pivot = col[idx]
    return matrix * (abs(pivot) / pivot)


def propagator(m: CatMap, N: int, *, intertwiner_limit: int = INTERTWINER_LIMIT) -> Operator:
    """Unitary quantization of the cat map on the N-point state space.

    Conjugation by the result maps the translation at n to the translation
    at n*A (row action) for every lattice vector n.  The global phase is
    normalized so the leading entry of column 0 is positive real.
    """
    if N < 2:
        raise ValueError("dimension must be at least 2")
    if N % 2 == 1 and gcd(m.c, N) == 1:
        matrix = _gauss_kernel(m, N)
    elif N % 2 == 1 and gcd(m.b, N) == 1:
        partner = CatMap(m.d, -m.c, -m.b, m.a)
        F = _fourier_matrix(N)
        matrix = F.conj().T @ _gauss_kernel(partner, N) @ F
    elif N <= intertwiner_limit:
        matrix = _averaged_intertwiner(m, N)
    else:
        raise BudgetExceeded(
            f"no closed-form path at N={N} and the averaging construction "
            f"is capped at N={intertwiner_limit}"
        )
    defect = _generator_defect(matrix, m, N)
    if defect > EGOROV_TOL:
        raise ConstructionFailed(
            f"generator intertwining defect {defect:.3e} at N={N}"
        )
    U = Operator(N, _fix_global_phase(matrix))
    if not U.is_unitary():
        raise NotUnitary(f"propagator at N={N} failed the unitarity tolerance")
    return U


def propagator_intertwiner(m: CatMap, N: int, *, limit: int = INTERTWINER_LIMIT) -> Operator:
    """Reference construction through group averaging alone (any small N)."""
    if N < 2:
        raise ValueError("dimension must be at least 2")
    if N > limit:
        raise BudgetExceeded(f"averaging construction capped at N={limit}")
    matrix = _averaged_intertwiner(m, N)
    defect = _generator_defect(matrix, m, N)
    if defect > EGOROV_TOL:
        raise ConstructionFailed(
            f"generator intertwining defect {defect:.3e} at N={N}"
        )
    U = Operator(N, _fix_global_phase(matrix))
    if not U.is_unitary():
        raise NotUnitary(f"intertwiner at N={N} failed the unitarity tolerance")
    return U


def egorov_residual(U: Operator, m: CatMap, n_max: int) -> float:
    """Worst conjugation error over lattice vectors with |n|_inf <= n_max.

    Compares U* T(n) U against the translation at the exact integer image
    n*A; the vector n = (0, 0) is skipped, so n_max = 0 gives 0.0.
    """
    N = U.N
    Uh = U.matrix.conj().T
    worst = 0.0
    for n1 in range(-n_max, n_max + 1):
        for n2 in range(-n_max, n_max + 1):
            if n1 == 0 and n2 == 0:
                continue
            lhs = Uh @ translation(N, (n1, n2)).matrix @ U.matrix
            rhs = translation(N, _row_times(m, (n1, n2))).matrix
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


@dataclass(frozen=True, eq=False)
class SpectralLevel:
    """One eigenphase with its multiplicity and an orthonormal basis.

    Basis columns have Euclidean norm sqrt(N), i.e. unit norm under the
    normalized inner product.
    """

    eigenphase: complex
    multiplicity: int
    basis: np.ndarray


@dataclass(frozen=True, eq=False)
class Spectrum:
    N: int
    scalar_period: int
    global_phase: float
    levels: tuple

    def eigenbasis(self) -> np.ndarray:
        """All basis columns side by side, N columns in level order."""
        return np.hstack([level.basis for level in self.levels])

    def eigenphases_per_vector(self) -> np.ndarray:
        reps = [np.full(level.multiplicity, level.eigenphase) for level in self.levels]
        return np.concatenate(reps)

    def multiplicities(self) -> tuple:
        return tuple(level.multiplicity for level in self.levels)

    def to_jsonable(self) -> dict:
        """JSON layout: eigenphases as [cos, sin], bases as lists of columns
        of [re, im] pairs."""
        levels = []
        for level in self.levels:
            cols = np.stack(
                [level.basis.T.real, level.basis.T.imag], axis=-1
            ).tolist()
            levels.append(
                {
                    "eigenphase": [float(level.eigenphase.real), float(level.eigenphase.imag)],
                    "multiplicity": level.multiplicity,
                    "basis": cols,
                }
            )
        return {
            "N": self.N,
            "scalar_period": self.scalar_period,
            "global_phase": self.global_phase,
            "levels": levels,
        }


def _scalar_defect(matrix: np.ndarray, N: int) -> tuple:
    scale = np.trace(matrix) / N
    defect = float(np.abs(matrix - scale * np.eye(N)).max())
    return scale, defect


def spectrum(U: Operator, r_hint: int, *, tol: float = SPECTRAL_TOL) -> Spectrum:
    """Eigen-decomposition driven by the scalar-power structure.

    Searches for the least r* <= 2*r_hint with U^{r*} proportional to the
    identity, places the eigenphases at the r*-th roots of the resulting
    scalar, reads multiplicities off a discrete Fourier transform of the
    power traces, and orthonormalizes each spectral projector by pivoted QR.
    """
    if r_hint < 1:
        raise ValueError("the order hint must be positive")
    N = U.N
    traces = [complex(N)]
    power = U.matrix.copy()
    r_star = None
    for k in range(1, 2 * r_hint + 1):
        scale, defect = _scalar_defect(power, N)
        if defect <= tol:
            r_star = k
            phase = float(np.angle(scale))
            break
        traces.append(complex(np.trace(power)))
        power = power @ U.matrix
    if r_star is None:
        raise NoScalarPower(
            f"no power up to {2 * r_hint} of the propagator is scalar"
        )

    ks = np.arange(r_star)
    trace_arr = np.array(traces[:r_star])
    lams = np.exp(1j * (phase + 2 * pi * ks) / r_star)
    mults = []
    for j in range(r_star):
        raw = np.sum(lams[j] ** (-ks) * trace_arr) / r_star
        mult = round(raw.real)
        if abs(raw - mult) > MULTIPLICITY_TOL:
            raise ConstructionFailed(
                f"projector trace {raw} is not close to an integer"
            )
        mults.append(mult)
    if sum(mults) != N:
        raise ConstructionFailed(
            f"multiplicities {mults} do not sum to the dimension {N}"
        )

    occupied = [j for j in range(r_star) if mults[j] > 0]
    per_projector = 16 * N * N
    chunk = max(1, _PROJECTOR_CHUNK_BYTES // per_projector)
    levels = []
    for start in range(0, len(occupied), chunk):
        block = occupied[start : start + chunk]
        accum = {j: np.zeros((N, N), dtype=np.complex128) for j in block}
        power = np.eye(N, dtype=np.complex128)
        for k in range(r_star):
            for j in block:
                accum[j] += lams[j] ** (-k) * power
            if k + 1 < r_star:
                power = power @ U.matrix
        for j in block:
            proj = accum[j] / r_star
            q, _, _ = scipy.linalg.qr(proj, pivoting=True)
            basis = q[:, : mults[j]] * sqrt(N)
            resid = U.matrix @ basis - lams[j] * basis
            worst = float(np.sqrt((np.abs(resid) ** 2).sum(axis=0) / N).max())
            if worst > tol:
                raise ConstructionFailed(
                    f"eigenvector residual {worst:.3e} at eigenphase index {j}"
                )
            gram = basis.conj().T @ basis / N
            if float(np.abs(gram - np.eye(mults[j])).max()) > UNITARY_TOL:
                raise ConstructionFailed(
                    f"basis at eigenphase index {j} is not orthonormal"
                )
            levels.append(SpectralLevel(complex(lams[j]), mults[j], basis))
    return Spectrum(N, r_star, phase, tuple(levels))


def expectation(op: Operator, psi: StateVector, *, norm_tol: float = 1e-12) -> complex:
    """<Op psi, psi> for a normalized state."""
    if op.N != psi.N:
        raise ValueError("dimension mismatch")
    if not psi.is_normalized(norm_tol):
        raise NotNormalized("expectation requires a normalized state")
    return complex(np.vdot(psi.amplitudes, op.matrix @ psi.amplitudes)) / psi.N


def _diagonal_elements(op_matrix: np.ndarray, basis: np.ndarray, N: int) -> np.ndarray:
    return (np.conj(basis) * (op_matrix @ basis)).sum(axis=0) / N


def _eigensystem(m: CatMap, N: int, eigsys):
    if eigsys is not None:
        return eigsys
    return spectrum(propagator(m, N), order_mod(m, N))


def variance_stat(m: CatMap, N: int, f: Observable, *, eigsys: Spectrum | None = None) -> float:
    """Mean squared deviation of eigenbasis expectations from the average.

    Computed over the deterministic eigenbasis produced by spectrum(); the
    value does depend on the choice of basis inside degenerate eigenspaces,
    so reported numbers always refer to that canonical basis.
    """
    eigsys = _eigensystem(m, N, eigsys)
    op = weyl_quantize(N, f)
    vals = _diagonal_elements(op.matrix, eigsys.eigenbasis(), N)
    return float(np.mean(np.abs(vals - f.mean) ** 2))


def max_deviation(m: CatMap, N: int, f: Observable, *, eigsys: Spectrum | None = None) -> float:
    """Largest deviation of an eigenbasis expectation from the average."""
    eigsys = _eigensystem(m, N, eigsys)
    op = weyl_quantize(N, f)
    vals = _diagonal_elements(op.matrix, eigsys.eigenbasis(), N)
    return float(np.abs(vals - f.mean).max())


@dataclass(frozen=True)
class FourthMoment:
    N: int
    n: tuple
    order: int
    solution_count: int
    s4: float
    bound: float


def fourth_moment(
    m: CatMap,
    N: int,
    n,
    *,
    eigsys: Spectrum | None = None,
    count: CongruenceCount | None = None,
) -> FourthMoment:
    """Fourth moment of translation matrix elements over the eigenbasis.

    Returns both the moment and the rigorous ceiling
    N * nu / ord^4 coming from the congruence solution count nu.
    """
    n = (int(n[0]), int(n[1]))
    if n[0] % N == 0 and n[1] % N == 0:
        raise ZeroVector("the frequency vector vanishes mod N")
    if count is None:
        count = congruence_count(m, N, n)
    eigsys = _eigensystem(m, N, eigsys)
    vals = _diagonal_elements(translation(N, n).matrix, eigsys.eigenbasis(), N)
    s4 = float(np.sum(np.abs(vals) ** 4))
    r = count.r
    bound = N * count.count / r**4
    return FourthMoment(N, n, r, count.count, s4, bound)
