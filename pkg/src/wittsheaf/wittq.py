"""Witt-group arithmetic over Q and over the prime fields F_p (p odd).

A rational symmetric form is classified up to Witt equivalence by its
signature, the 2-adic valuation of its determinant mod 2, and one finite
F_p Witt class for each odd prime; this module implements that invariant
tuple together with the group laws, so Witt equivalence of diagonal forms
is decidable exactly.

The F_p class of a rank-r diagonal form <u_1,...,u_r> is stored as
(r mod 2, legendre((-1)^{r(r-1)/2} det, p)); the signed discriminant makes
the identity element (0, +1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .rationals import Q, numer, denom

__all__ = [
    "WFpClass",
    "WittClassQ",
    "DiagonalForm",
    "wfp_add",
    "residue_at_p",
    "witt_class",
    "witt_equal",
    "witt_mul",
    "witt_class_of_symmetric_matrix",
    "squarefree_part",
    "legendre",
]


def is_odd_prime(p: int) -> bool:
    if p < 3 or p % 2 == 0:
        return False
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def legendre(a: int, p: int) -> int:
    """Legendre symbol (a/p) in {-1, 0, +1} for odd prime p."""
    a %= p
    if a == 0:
        return 0
    r = pow(a, (p - 1) // 2, p)
    return 1 if r == 1 else -1


def squarefree_part(n: int) -> int:
    """Largest squarefree divisor of |n|, with the sign of n.

    Plain trial division; inputs come from small pairing matrices so full
    factorization is acceptable, and a perfect-square check short-circuits
    the leftover cofactor.
    """
    if n == 0:
        raise ValueError("squarefree part of 0 is undefined")
    sign = -1 if n < 0 else 1
    n = abs(n)
    out = 1
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            if e % 2:
                out *= d
        d += 1 if d == 2 else 2
        if n > 1:
            r = math.isqrt(n)
            if r * r == n:
                n = 1
    return sign * out * n


@dataclass(frozen=True)
class WFpClass:
    """Element of W(F_p) for an odd prime p."""

    p: int
    dim_parity: int
    signed_disc: int

    def __post_init__(self):
        if not is_odd_prime(self.p):
            raise ValueError(f"{self.p} is not an odd prime")
        if self.dim_parity not in (0, 1) or self.signed_disc not in (1, -1):
            raise ValueError("invalid W(F_p) data")

    @staticmethod
    def identity(p: int) -> "WFpClass":
        return WFpClass(p, 0, 1)

    def is_identity(self) -> bool:
        return self.dim_parity == 0 and self.signed_disc == 1

    def __add__(self, other: "WFpClass") -> "WFpClass":
        return wfp_add(self, other)

    def __neg__(self) -> "WFpClass":
        # inverse: the class of the negated form
        chi = legendre(-1, self.p)
        return WFpClass(self.p, self.dim_parity,
                        self.signed_disc * (chi ** self.dim_parity))

    def order(self) -> int:
        acc = WFpClass.identity(self.p)
        for k in range(1, 5):
            acc = acc + self
            if acc.is_identity():
                return k
        raise AssertionError("W(F_p) has exponent dividing 4")


def wfp_add(a: WFpClass, b: WFpClass) -> WFpClass:
    """Group law of W(F_p) on (dim parity, signed discriminant) data.

    The discriminant of an orthogonal sum picks up chi(-1) once per pair
    of odd-rank summands, where chi(-1) = +1 iff p = 1 mod 4.
    """
    if a.p != b.p:
        raise ValueError(f"mismatched primes {a.p} != {b.p}")
    chi = legendre(-1, a.p)
    disc = a.signed_disc * b.signed_disc * (chi ** (a.dim_parity * b.dim_parity))
    return WFpClass(a.p, (a.dim_parity + b.dim_parity) % 2, disc)


class DiagonalForm:
    """Nondegenerate diagonal rational form <a_1, ..., a_r>."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        ent = []
        for a in entries:
            a = Q(a) if isinstance(a, int) else a
            if a == 0:
                raise ValueError("diagonal forms must have nonzero entries")
            ent.append(a)
        self.entries = tuple(ent)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def direct_sum(self, other: "DiagonalForm") -> "DiagonalForm":
        return DiagonalForm(self.entries + other.entries)

    def scaled_by_squares(self, scalars) -> "DiagonalForm":
        return DiagonalForm([a * s * s for a, s in zip(self.entries, scalars)])

    def __repr__(self):
        return "<" + ",".join(str(a) for a in self.entries) + ">"


def _vp(x, p: int) -> int:
    """p-adic valuation of a nonzero rational."""
    v = 0
    n = numer(x)
    while n % p == 0:
        n //= p
        v += 1
    d = denom(x)
    while d % p == 0:
        d //= p
        v -= 1
    return v


def _unit_mod_p(x, p: int, v: int) -> int:
    """The p-unit part of x = p^v u, reduced mod p."""
    n, d = numer(x), denom(x)
    for _ in range(max(0, v)):
        n //= p
    for _ in range(max(0, -v)):
        d //= p
    return (n % p) * pow(d % p, p - 2, p) % p


def residue_at_p(f: DiagonalForm, p: int) -> WFpClass:
    """Second-residue class of a diagonal form at the odd prime p.

    Each entry a = p^k u contributes nothing for k even and the rank-one
    class with signed discriminant (u/p) for k odd; contributions are
    accumulated with the W(F_p) group law.  This map kills hyperbolic
    planes, which the property tests check directly.
    """
    if not is_odd_prime(p):
        raise ValueError(f"{p} is not an odd prime")
    acc = WFpClass.identity(p)
    for a in f:
        k = _vp(a, p)
        if k % 2:
            u = _unit_mod_p(a, p, k)
            acc = acc + WFpClass(p, 1, legendre(u, p))
    return acc


@dataclass(frozen=True)
class WittClassQ:
    """Complete invariant of a class in W(Q).

    sig: signature; two_residue: v_2(det) mod 2; odd_residues: map from odd
    primes to nontrivial W(F_p) classes (identity components are omitted).
    """

    sig: int
    two_residue: int
    odd_residues: tuple  # sorted tuple of (p, WFpClass)

    @staticmethod
    def make(sig: int, two_residue: int, residues: dict) -> "WittClassQ":
        items = tuple(sorted((p, c) for p, c in residues.items()
                             if not c.is_identity()))
        return WittClassQ(sig, two_residue % 2, items)

    @staticmethod
    def zero() -> "WittClassQ":
        return WittClassQ.make(0, 0, {})

    def is_zero(self) -> bool:
        return self.sig == 0 and self.two_residue == 0 and not self.odd_residues

    def residue(self, p: int) -> WFpClass:
        for q, c in self.odd_residues:
            if q == p:
                return c
        return WFpClass.identity(p)

    def __add__(self, other: "WittClassQ") -> "WittClassQ":
        primes = {p for p, _ in self.odd_residues} | {p for p, _ in other.odd_residues}
        res = {p: self.residue(p) + other.residue(p) for p in primes}
        return WittClassQ.make(self.sig + other.sig,
                               self.two_residue ^ other.two_residue, res)

    def __neg__(self) -> "WittClassQ":
        res = {p: -c for p, c in self.odd_residues}
        return WittClassQ.make(-self.sig, self.two_residue, res)

    def render(self) -> str:
        """Canonical text form: `sig=<int>; r2=<0|1>` plus residues by prime."""
        parts = [f"sig={self.sig}", f"r2={self.two_residue}"]
        for p, c in self.odd_residues:
            sign = "+1" if c.signed_disc == 1 else "-1"
            parts.append(f"p={p}:({c.dim_parity},{sign})")
        return "; ".join(parts)

    @staticmethod
    def parse(text: str) -> "WittClassQ":
        sig = 0
        r2 = 0
        res = {}
        for part in text.split(";"):
            part = part.strip()
            if part.startswith("sig="):
                sig = int(part[4:])
            elif part.startswith("r2="):
                r2 = int(part[3:])
            elif part.startswith("p="):
                head, tail = part[2:].split(":")
                p = int(head)
                parity, sign = tail.strip("()").split(",")
                res[p] = WFpClass(p, int(parity), int(sign))
        return WittClassQ.make(sig, r2, res)


def witt_class(f: DiagonalForm) -> WittClassQ:
    """Witt class in W(Q) of a nondegenerate diagonal form."""
    sig = sum(1 if a > 0 else -1 for a in f)
    two = sum(_vp(a, 2) for a in f) % 2
    primes = set()
    for a in f:
        m = abs(squarefree_part(numer(a) * denom(a)))
        if m % 2 == 0:
            m //= 2
        d = 3
        while d * d <= m:
            if m % d == 0:
                primes.add(d)
                m //= d  # m is squarefree
            d += 2
        if m > 1:
            primes.add(m)
    residues = {p: residue_at_p(f, p) for p in sorted(primes)}
    return WittClassQ.make(sig, two, residues)


def witt_equal(f: DiagonalForm, g: DiagonalForm) -> bool:
    return witt_class(f) == witt_class(g)


def witt_mul(f: DiagonalForm, g: DiagonalForm) -> WittClassQ:
    """Class of the tensor product form {a*b}; the ring structure of W(Q)."""
    return witt_class(DiagonalForm([a * b for a in f for b in g]))


def witt_class_of_symmetric_matrix(s) -> WittClassQ:
    """Witt class of a symmetric rational matrix.

    The radical (zero diagonal entries after congruence diagonalization)
    carries no Witt information and is dropped.
    """
    from .exactlinalg import congruence_diagonalize

    _, diag = congruence_diagonalize(s)
    nz = [d for d in diag if d != 0]
    if not nz:
        return WittClassQ.zero()
    return witt_class(DiagonalForm(nz))
