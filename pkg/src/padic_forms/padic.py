"""Exact arithmetic on finitely presented p-adic numbers ``sign * p**v * u``.

Every nonzero rational has exactly one such form with ``u`` a positive
rational whose numerator and denominator are both prime to ``p``.  Integer
literals give integer units; quotients taken during normalization may leave a
unit like ``1/3`` (a p-adic unit for ``p != 3``).  Zero is the only value with
valuation :data:`INF`.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union


class PAdicError(ValueError):
    pass


class MalformedLiteral(PAdicError):
    pass


class WrongPrime(PAdicError):
    pass


class ZeroUnit(PAdicError):
    pass


class PrimeMismatch(PAdicError):
    pass


class NotAUnit(PAdicError):
    pass


class NegativeValuation(PAdicError):
    pass


@functools.total_ordering
class _Infinity:
    """Valuation of zero. Greater than every integer and absorbing under +."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __eq__(self, other):
        return other is self

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __hash__(self):
        return hash("padic-inf")

    def __repr__(self):
        return "INF"


INF = _Infinity()
Valuation = Union[int, _Infinity]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def valuation_of_int(n: int, p: int) -> Valuation:
    if n == 0:
        return INF
    v = 0
    n = abs(n)
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True, eq=False)
class PAdicScalar:
    prime: int
    sign: int
    valuation: Valuation
    unit: Fraction

    def __post_init__(self):
        if self.valuation is INF:
            return
        u = Fraction(self.unit)
        object.__setattr__(self, "unit", u)
        if u <= 0 or u.numerator % self.prime == 0 or u.denominator % self.prime == 0:
            raise ValueError(f"unit {u} is not a positive p-adic unit for p={self.prime}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    # construction ---------------------------------------------------------

    @classmethod
    def zero(cls, prime: int) -> "PAdicScalar":
        return cls(prime, 1, INF, 0)

    @classmethod
    def from_int(cls, n: int, prime: int) -> "PAdicScalar":
        return cls.from_fraction(Fraction(n), prime)

    @classmethod
    def from_fraction(cls, x: Fraction, prime: int) -> "PAdicScalar":
        x = Fraction(x)
        if x == 0:
            return cls.zero(prime)
        num, den = x.numerator, x.denominator
        vn = valuation_of_int(num, prime)
        vd = valuation_of_int(den, prime)
        unit = Fraction(abs(num) // prime**vn, den // prime**vd)
        return cls(prime, 1 if num > 0 else -1, vn - vd, unit)

    # views ------------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.valuation is INF

    @property
    def is_unit(self) -> bool:
        """Membership in the unit group: valuation exactly 0."""
        return self.valuation == 0

    @property
    def is_integral(self) -> bool:
        return self.valuation is INF or self.valuation >= 0

    def to_fraction(self) -> Fraction:
        if self.is_zero:
            return Fraction(0)
        return self.sign * Fraction(self.prime) ** self.valuation * self.unit

    def __eq__(self, other):
        if isinstance(other, int):
            other = PAdicScalar.from_int(other, self.prime)
        if not isinstance(other, PAdicScalar):
            return NotImplemented
        if self.prime != other.prime:
            return False
        if self.is_zero or other.is_zero:
            return self.is_zero and other.is_zero
        return (self.sign, self.valuation, self.unit) == (other.sign, other.valuation, other.unit)

    def __hash__(self):
        if self.is_zero:
            return hash((self.prime, "zero"))
        return hash((self.prime, self.sign, self.valuation, self.unit))

    def __repr__(self):
        return f"PAdicScalar({format_literal(self)!r}, p={self.prime})"

    # operators delegate to the module functions ------------------------------

    def _coerce(self, other) -> "PAdicScalar":
        if isinstance(other, PAdicScalar):
            return other
        if isinstance(other, (int, Fraction)):
            return PAdicScalar.from_fraction(Fraction(other), self.prime)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        return NotImplemented if other is NotImplemented else add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        other = self._coerce(other)
        return NotImplemented if other is NotImplemented else add(self, neg(other))

    def __rsub__(self, other):
        other = self._coerce(other)
        return NotImplemented if other is NotImplemented else add(other, neg(self))

    def __mul__(self, other):
        other = self._coerce(other)
        return NotImplemented if other is NotImplemented else mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        return NotImplemented if other is NotImplemented else mul(self, inverse(other))


def _check_primes(x: PAdicScalar, y: PAdicScalar) -> None:
    if x.prime != y.prime:
        raise PrimeMismatch(f"cannot combine p={x.prime} with p={y.prime}")


def add(x: PAdicScalar, y: PAdicScalar) -> PAdicScalar:
    _check_primes(x, y)
    if x.is_zero:
        return y
    if y.is_zero:
        return x
    p = x.prime
    v = min(x.valuation, y.valuation)
    # shifted to a common valuation; cancellation can only raise it
    total = x.sign * x.unit * p ** (x.valuation - v) + y.sign * y.unit * p ** (y.valuation - v)
    if total == 0:
        return PAdicScalar.zero(p)
    extra = valuation_of_int(total.numerator, p)
    return PAdicScalar(p, 1 if total > 0 else -1, v + extra, abs(total) / p**extra)


def neg(x: PAdicScalar) -> PAdicScalar:
    if x.is_zero:
        return x
    return PAdicScalar(x.prime, -x.sign, x.valuation, x.unit)


def mul(x: PAdicScalar, y: PAdicScalar) -> PAdicScalar:
    _check_primes(x, y)
    if x.is_zero or y.is_zero:
        return PAdicScalar.zero(x.prime)
    return PAdicScalar(x.prime, x.sign * y.sign, x.valuation + y.valuation, x.unit * y.unit)


def inverse(x: PAdicScalar) -> PAdicScalar:
    if x.is_zero:
        raise ZeroDivisionError("p-adic zero has no inverse")
    return PAdicScalar(x.prime, x.sign, -x.valuation, 1 / x.unit)


def divide(x: PAdicScalar, y: PAdicScalar) -> PAdicScalar:
    return mul(x, inverse(y))


def _unit_residue(x: PAdicScalar, m: int) -> int:
    return x.sign * x.unit.numerator * pow(x.unit.denominator, -1, m) % m


def invert_mod(x: PAdicScalar, n: int) -> int:
    """Inverse of the unit ``x`` modulo ``p**n``, in ``[1, p**n - 1]``."""
    if x.valuation != 0:
        raise NotAUnit(f"valuation {x.valuation} is not 0; not invertible in the p-adic integers")
    if n < 1:
        raise ValueError("modulus exponent must be >= 1")
    m = x.prime**n
    return pow(_unit_residue(x, m), -1, m)


def reduce_mod(x: PAdicScalar, n: int) -> int:
    """Residue of an integral ``x`` modulo ``p**n``."""
    m = x.prime**n
    if x.is_zero:
        return 0
    if x.valuation < 0:
        raise NegativeValuation(f"{format_literal(x)} is not a p-adic integer")
    if x.valuation >= n:
        return 0
    return x.prime**x.valuation * _unit_residue(x, m) % m


_LITERAL = re.compile(r"^(-?)(?:(\d+)\^(-?\d+)(?:\*(\d+))?|(\d+))$")


def parse_literal(text: str, prime: int) -> PAdicScalar:
    """Parse ``[-]INT`` or ``[-]P^EXP[*UNIT]``; ``P`` must equal ``prime``."""
    if not is_prime(prime):
        raise ValueError(f"{prime} is not prime")
    m = _LITERAL.match(text)
    if m is None:
        raise MalformedLiteral(f"cannot parse p-adic literal {text!r}")
    minus, base, exp, unit, plain = m.groups()
    sign = -1 if minus else 1
    if plain is not None:
        return PAdicScalar.from_int(sign * int(plain), prime)
    if int(base) != prime:
        raise WrongPrime(f"literal {text!r} uses base {base}, expected {prime}")
    u = int(unit) if unit is not None else 1
    if u == 0:
        raise ZeroUnit(f"literal {text!r} has zero unit part")
    value = sign * Fraction(prime) ** int(exp) * u
    return PAdicScalar.from_fraction(value, prime)


def format_literal(x: PAdicScalar) -> str:
    """Inverse of :func:`parse_literal` on canonical values."""
    if x.is_zero:
        return "0"
    s = "-" if x.sign < 0 else ""
    if x.unit.denominator != 1:
        # rational units have no literal form; fall back to the exact rational
        return str(x.to_fraction())
    u = x.unit.numerator
    if x.valuation == 0:
        return f"{s}{u}"
    tail = "" if u == 1 else f"*{u}"
    return f"{s}{x.prime}^{x.valuation}{tail}"
