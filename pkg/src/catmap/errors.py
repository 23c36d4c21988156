"""Exception hierarchy for the catmap package.

Every error raised by the library derives from :class:`CatmapError`, so callers
can catch one base class.  I/O failures while storing or loading census files
are reported with the builtin :class:`OSError`.
"""

from __future__ import annotations


class CatmapError(Exception):
    """Base class for all catmap errors."""


# --- map validation -------------------------------------------------------

class NotUnimodular(CatmapError):
    """Matrix determinant is not 1."""


class NotHyperbolic(CatmapError):
    """Matrix trace has absolute value <= 2."""


class NotQuantizable(CatmapError):
    """Matrix fails the parity condition a*b, c*d both even."""


# --- integer arithmetic ---------------------------------------------------

class FactorizationTimeout(CatmapError):
    """Factorization work budget was exhausted before completion."""


class NotAMultiple(CatmapError):
    """Claimed multiple of a multiplicative order is not actually one."""


class NotPrime(CatmapError):
    """Argument required to be prime is composite (or < 2)."""


class EtaOutOfRange(CatmapError):
    """Classification exponent eta outside the open interval (1/2, 3/5)."""


class BudgetExceeded(CatmapError):
    """Requested exhaustive computation exceeds its configured size bound."""


class ZeroVector(CatmapError):
    """Integer vector is congruent to (0, 0) modulo N."""


class DegenerateK(CatmapError):
    """Power k makes A^k - I singular, so no modulus can be extracted."""


# --- quantum engine -------------------------------------------------------

class ConstructionFailed(CatmapError):
    """Propagator intertwining system did not have a one-dimensional solution."""


class NotUnitary(CatmapError):
    """Operator expected to be unitary fails the unitarity check."""


class NoScalarPower(CatmapError):
    """No power of the propagator within the search bound is a scalar matrix."""


class NotNormalized(CatmapError):
    """State vector does not have norm 1 in the normalized inner product."""


# --- storage --------------------------------------------------------------

class SchemaMismatch(CatmapError):
    """Stored census file has an unknown version line or column layout."""
