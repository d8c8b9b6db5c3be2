"""Exact distributions and characteristic functions on ``Z/p^n``.

``Z/p^n`` stands for the quotient of the p-adic integers by ``p^n``; its dual
is identified with ``Z/p^n`` again through the pairing
``(x, y) = exp(2*pi*i*x*y / p^n)``.  Under this pairing the torsion subgroup
``{y : p^j y = 0}`` of the dual is ``p^(n-j) Z/p^n`` and the annihilator of
``p^j Z/p^n`` is ``p^(n-j) Z/p^n``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

TOL = 1e-9


class FiniteModelError(ValueError):
    pass


class NotPositiveDefinite(FiniteModelError):
    pass


class InvalidInnerFunction(FiniteModelError):
    pass


class GroupMismatch(FiniteModelError):
    pass


@dataclass(frozen=True)
class CyclicGroup:
    prime: int
    exponent: int

    def __post_init__(self):
        if self.exponent < 0:
            raise FiniteModelError("exponent must be >= 0")

    @property
    def order(self) -> int:
        return self.prime**self.exponent


@dataclass(frozen=True)
class Subgroup:
    """``p^j Z/p^n`` with ``j = index_exponent``."""

    group: CyclicGroup
    index_exponent: int

    def __post_init__(self):
        if not 0 <= self.index_exponent <= self.group.exponent:
            raise FiniteModelError(f"index exponent {self.index_exponent} out of range")

    @property
    def order(self) -> int:
        return self.group.prime ** (self.group.exponent - self.index_exponent)

    @property
    def generator(self) -> int:
        return self.group.prime**self.index_exponent % self.group.order

    def elements(self) -> np.ndarray:
        return np.arange(self.order, dtype=np.int64) * self.group.prime**self.index_exponent

    def contains(self, x: int) -> bool:
        return x % (self.group.prime**self.index_exponent) == 0

    def as_group(self) -> CyclicGroup:
        return CyclicGroup(self.group.prime, self.group.exponent - self.index_exponent)


def torsion(group: CyclicGroup, j: int) -> Subgroup:
    """``{y : p^j y = 0}`` inside the dual, for ``0 <= j <= n``."""
    return Subgroup(group, group.exponent - j)


@dataclass(frozen=True)
class FiniteDistribution:
    group: CyclicGroup
    probs: tuple[Fraction, ...]

    def __post_init__(self):
        probs = tuple(Fraction(x) for x in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) != self.group.order:
            raise FiniteModelError(f"expected {self.group.order} probabilities, got {len(probs)}")
        if any(x < 0 for x in probs):
            raise FiniteModelError("negative probability")
        if sum(probs) != 1:
            raise FiniteModelError(f"probabilities sum to {sum(probs)}, not 1")

    @property
    def support(self) -> list[int]:
        return [x for x, w in enumerate(self.probs) if w]

    def as_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.probs])

    def integer_weights(self) -> tuple[np.ndarray, int]:
        """``(w, D)`` with ``probs == w / D`` exactly, ``w`` as Python ints."""
        return self._weights

    @functools.cached_property
    def _weights(self) -> tuple[np.ndarray, int]:
        den = 1
        for x in self.probs:
            den = math.lcm(den, x.denominator)
        w = np.array([x.numerator * (den // x.denominator) for x in self.probs], dtype=object)
        return w, den

    def to_json(self) -> dict:
        return {
            "p": self.group.prime,
            "n": self.group.exponent,
            "probs": [f"{x.numerator}/{x.denominator}" for x in self.probs],
        }

    @classmethod
    def from_json(cls, data: dict) -> "FiniteDistribution":
        group = CyclicGroup(int(data["p"]), int(data["n"]))
        return cls(group, tuple(Fraction(s) for s in data["probs"]))


@dataclass(frozen=True, eq=False)
class CharFunction:
    group: CyclicGroup
    values: np.ndarray
    indicator_exact: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.group.order,):
            raise FiniteModelError("value array does not match the group order")
        if abs(vals[0] - 1) > TOL:
            raise FiniteModelError(f"characteristic function must be 1 at 0, got {vals[0]}")
        if self.indicator_exact is not None:
            ind = tuple(int(v) for v in self.indicator_exact)
            object.__setattr__(self, "indicator_exact", ind)
            if any(v not in (0, 1) for v in ind) or not np.array_equal(vals, np.array(ind, dtype=complex)):
                raise FiniteModelError("indicator array disagrees with the values")

    @classmethod
    def indicator(cls, group: CyclicGroup, members: Sequence[bool]) -> "CharFunction":
        ind = tuple(1 if m else 0 for m in members)
        return cls(group, np.array(ind, dtype=complex), ind)

    def to_json(self) -> dict:
        return {
            "p": self.group.prime,
            "n": self.group.exponent,
            "re": [float(v) for v in self.values.real],
            "im": [float(v) for v in self.values.imag],
        }


def pairing_matrix(group: CyclicGroup, sign: int = 1) -> np.ndarray:
    n = group.order
    xs = np.arange(n)
    return np.exp(sign * 2j * np.pi * (np.outer(xs, xs) % n) / n)


def char_values(probs: np.ndarray, group: CyclicGroup) -> np.ndarray:
    """Float transform of one (or a stack of) probability vectors."""
    return probs @ pairing_matrix(group)


def char_fn(mu: FiniteDistribution) -> CharFunction:
    vals = char_values(mu.as_float(), mu.group)
    vals[0] = 1.0
    exact = exact_char_classes(mu)
    ind = None
    if all(c in (0, 1) for c in exact):
        ind = tuple(exact)
        vals = np.array(ind, dtype=complex)
    return CharFunction(mu.group, vals, ind)


def exact_char_classes(mu: FiniteDistribution) -> list[Optional[int]]:
    """For each ``y``: 1 if ``mu^(y) == 1``, 0 if ``mu^(y) == 0``, else None.

    Both tests are exact.  Write ``mu^(y) = sum_e a_e z^e`` with ``z`` a
    primitive ``p^n``-th root of unity and ``a_e`` the mass of ``{x : xy = e}``.
    The value is 1 iff all mass sits at ``e = 0``; it is 0 iff ``a_e`` is
    constant along every coset of ``p^(n-1) Z/p^n`` (the cyclotomic
    polynomial of order ``p^n`` is ``1 + t + ... + t^(p-1)`` with
    ``t = z^(p^(n-1))``).
    """
    coeffs = coefficient_table(mu)
    g = mu.group
    if g.order == 1:
        return [1]
    step = g.order // g.prime
    out: list[Optional[int]] = []
    for y in range(g.order):
        row = coeffs[y]
        if row[0] == row.sum():
            out.append(1)
        elif np.all(row.reshape(g.prime, step) == row[:step]):
            out.append(0)
        else:
            out.append(None)
    return out


def coefficient_table(mu: FiniteDistribution) -> np.ndarray:
    """``a[y, e] = D * mu({x : x*y = e})`` as exact integers."""
    w, _ = mu.integer_weights()
    n = mu.group.order
    supp = [x for x in range(n) if w[x]]
    table = np.zeros((n, n), dtype=object)
    ys = np.arange(n)
    for x in supp:
        e = (x * ys) % n
        table[ys, e] += w[x]
    return table


def char_nonzero_mask(mu: FiniteDistribution) -> np.ndarray:
    return np.array([c != 0 for c in exact_char_classes(mu)], dtype=bool)


@functools.lru_cache(maxsize=1024)
def haar_on(sub: Subgroup) -> FiniteDistribution:
    n = sub.group.order
    mass = Fraction(1, sub.order)
    probs = [mass if sub.contains(x) else Fraction(0) for x in range(n)]
    return FiniteDistribution(sub.group, tuple(probs))


def uniform(group: CyclicGroup) -> FiniteDistribution:
    return haar_on(Subgroup(group, 0))


def point_mass(group: CyclicGroup, x: int = 0) -> FiniteDistribution:
    probs = [Fraction(0)] * group.order
    probs[x % group.order] = Fraction(1)
    return FiniteDistribution(group, tuple(probs))


def annihilator(sub: Subgroup) -> Subgroup:
    return Subgroup(sub.group, sub.group.exponent - sub.index_exponent)


def rationalize(values: np.ndarray, denominator: int) -> list[Fraction]:
    """Nearest multiples of ``1/denominator`` renormalised to sum 1."""
    nums = [max(0, int(round(v * denominator))) for v in values]
    total = sum(nums)
    if total == 0:
        raise NotPositiveDefinite("recovered mass vanishes")
    return [Fraction(m, total) for m in nums]


def from_char(f: CharFunction, tol: float = TOL) -> FiniteDistribution:
    g = f.group
    if abs(f.values[0] - 1) > tol:
        raise NotPositiveDefinite("value at 0 is not 1")
    recovered = (pairing_matrix(g, -1) @ f.values) / g.order
    if np.max(np.abs(recovered.imag)) >= tol:
        raise NotPositiveDefinite(f"complex residue {np.max(np.abs(recovered.imag)):.3g}")
    real = recovered.real
    if np.min(real) <= -tol:
        raise NotPositiveDefinite(f"negative mass {np.min(real):.3g}")
    real = np.where(real < 0, 0.0, real)
    probs = rationalize(real, g.order * 2**30)
    if max(abs(float(pr) - r) for pr, r in zip(probs, real)) > tol:
        raise NotPositiveDefinite("renormalisation moved some mass by more than tol")
    return FiniteDistribution(g, tuple(probs))


def extend_by_zero(f0: CharFunction, sub: Subgroup) -> CharFunction:
    """Function equal to ``f0`` on ``sub`` (``f0`` indexed by ``sub``'s own
    coordinates: entry ``i`` lives at ``i * generator``) and 0 off ``sub``."""
    if f0.group != sub.as_group():
        raise InvalidInnerFunction("inner function does not live on the given subgroup")
    try:
        from_char(f0)
    except NotPositiveDefinite as exc:
        raise InvalidInnerFunction(f"inner function is not positive definite: {exc}") from exc
    g = sub.group
    vals = np.zeros(g.order, dtype=complex)
    vals[sub.elements()] = f0.values
    ind = None
    if f0.indicator_exact is not None:
        full = [0] * g.order
        for i, y in enumerate(sub.elements()):
            full[int(y)] = f0.indicator_exact[i]
        ind = tuple(full)
    return CharFunction(g, vals, ind)


def convolve(mu: FiniteDistribution, nu: FiniteDistribution) -> FiniteDistribution:
    if mu.group != nu.group:
        raise GroupMismatch("convolution across different groups")
    n = mu.group.order
    out = [Fraction(0)] * n
    for x in mu.support:
        for z in nu.support:
            out[(x + z) % n] += mu.probs[x] * nu.probs[z]
    return FiniteDistribution(mu.group, tuple(out))


def reflect(mu: FiniteDistribution) -> FiniteDistribution:
    n = mu.group.order
    return FiniteDistribution(mu.group, tuple(mu.probs[(-x) % n] for x in range(n)))


def symmetrize(mu: FiniteDistribution) -> FiniteDistribution:
    return convolve(mu, reflect(mu))


def translate(mu: FiniteDistribution, a: int) -> FiniteDistribution:
    n = mu.group.order
    return FiniteDistribution(mu.group, tuple(mu.probs[(x - a) % n] for x in range(n)))


def push_forward(mu: FiniteDistribution, multiplier: int) -> FiniteDistribution:
    n = mu.group.order
    out = [Fraction(0)] * n
    for x in mu.support:
        out[(multiplier * x) % n] += mu.probs[x]
    return FiniteDistribution(mu.group, tuple(out))


def lift(mu: FiniteDistribution, extra: int) -> FiniteDistribution:
    """Pull back to ``Z/p^(n+extra)`` spreading each atom uniformly over its
    fibre, i.e. convolve the p-adic lift with Haar on ``p^n`` times the integers."""
    g = CyclicGroup(mu.group.prime, mu.group.exponent + extra)
    n = mu.group.order
    spread = Fraction(1, g.order // n)
    return FiniteDistribution(g, tuple(mu.probs[x % n] * spread for x in range(g.order)))


def _min_valuation(values: Sequence[int], group: CyclicGroup) -> int:
    """Smallest valuation among residues (``n`` for residue 0)."""
    best = group.exponent
    for x in values:
        if x % group.order == 0:
            continue
        v = 0
        while x % group.prime == 0:
            x //= group.prime
            v += 1
        best = min(best, v)
    return best


def is_degenerate(mu: FiniteDistribution) -> bool:
    return any(x == 1 for x in mu.probs)


def is_idempotent(mu: FiniteDistribution) -> bool:
    """Exact: the support is a coset of a subgroup and the mass is uniform on it."""
    supp = mu.support
    a = supp[0]
    diffs = [(x - a) % mu.group.order for x in supp]
    j = _min_valuation(diffs, mu.group)
    sub = Subgroup(mu.group, j)
    if len(supp) != sub.order:
        return False
    mass = mu.probs[a]
    return all(mu.probs[x] == mass and sub.contains(x - a) for x in supp)


def one_set(mu: FiniteDistribution) -> Subgroup:
    """``{y : mu^(y) = 1}``, the annihilator of the subgroup spanned by the support."""
    j = _min_valuation(mu.support, mu.group)
    return annihilator(Subgroup(mu.group, j))
