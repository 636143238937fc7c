"""Exact rational scalars.

Everything in this package computes over Q with no rounding anywhere.
`gmpy2.mpq` is used when available (it is a large constant factor faster
than `fractions.Fraction` on elimination-heavy workloads); the stdlib
Fraction is a drop-in fallback.  Both keep values reduced with a positive
denominator, which is the representation invariant we rely on.
"""

from __future__ import annotations

from fractions import Fraction

try:
    from gmpy2 import mpq as _mpq, mpz as _mpz

    def Q(num=0, den=1):
        return _mpq(num, den)

    def is_rational(x) -> bool:
        return isinstance(x, (int, type(_mpq(0)), type(_mpz(0)), Fraction))

    HAVE_GMPY2 = True
except ImportError:  # pragma: no cover - exercised only without gmpy2
    def Q(num=0, den=1):
        return Fraction(num, den)

    def is_rational(x) -> bool:
        return isinstance(x, (int, Fraction))

    HAVE_GMPY2 = False

ZERO = Q(0)
ONE = Q(1)


def numer(x) -> int:
    return int(x.numerator)


def denom(x) -> int:
    return int(x.denominator)


def as_fraction(x) -> Fraction:
    return Fraction(numer(x), denom(x))


def qstr(x) -> str:
    """Canonical text form: `a` or `a/b` with b > 0."""
    n, d = numer(x), denom(x)
    return str(n) if d == 1 else f"{n}/{d}"


def parse_q(s: str):
    s = s.strip()
    if "/" in s:
        a, b = s.split("/")
        return Q(int(a), int(b))
    return Q(int(s))
