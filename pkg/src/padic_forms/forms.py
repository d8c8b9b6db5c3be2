"""Reduction of three linear forms to the canonical shapes ``L1`` / ``L2``.

``L1`` has rows ``(1,1,1), (1,d1,d2), (1,e1,e2)`` and ``L2`` has rows
``(1,1,1), (d1,1,d2), (1,e1,e2)``; in both the four free coefficients are
p-adic integers.  Determinants are computed exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .padic import INF, PAdicScalar, divide, parse_literal

LAMBDA1 = "L1"
LAMBDA2 = "L2"


class FormsError(ValueError):
    pass


class SingularForms(FormsError):
    pass


class WrongShape(FormsError):
    pass


class MalformedMatrix(FormsError):
    pass


Matrix = tuple[tuple[PAdicScalar, ...], ...]


@dataclass(frozen=True)
class RawForms:
    prime: int
    coefficients: Matrix

    def __post_init__(self):
        if len(self.coefficients) != 3 or any(len(r) != 3 for r in self.coefficients):
            raise MalformedMatrix("expected a 3x3 coefficient matrix")
        for row in self.coefficients:
            for x in row:
                if x.prime != self.prime:
                    raise MalformedMatrix(f"entry {x!r} is not over p={self.prime}")
                if x.is_zero:
                    raise MalformedMatrix("coefficients must be nonzero (automorphisms)")

    @classmethod
    def from_ints(cls, prime: int, rows: Sequence[Sequence[int]]) -> "RawForms":
        return cls(prime, tuple(tuple(PAdicScalar.from_int(x, prime) for x in r) for r in rows))


@dataclass(frozen=True)
class NormalizedForms:
    """Canonical coefficients plus the bookkeeping that maps back to the raw
    matrix: ``raw[r][column_permutation[c]] ==
    canonical[r][c] * row_scalings[r] * column_scalings[c]``."""

    prime: int
    shape: str
    delta1: PAdicScalar
    delta2: PAdicScalar
    eps1: PAdicScalar
    eps2: PAdicScalar
    column_permutation: tuple[int, int, int] = (0, 1, 2)
    row_scalings: tuple[PAdicScalar, ...] = field(default=())
    column_scalings: tuple[PAdicScalar, ...] = field(default=())

    def __post_init__(self):
        if self.shape not in (LAMBDA1, LAMBDA2):
            raise WrongShape(f"unknown shape {self.shape!r}")
        for x in self.coefficients:
            if x.is_zero or x.valuation < 0:
                raise FormsError(f"canonical coefficient {x!r} must be a nonzero p-adic integer")
        one = PAdicScalar.from_int(1, self.prime)
        if not self.row_scalings:
            object.__setattr__(self, "row_scalings", (one, one, one))
        if not self.column_scalings:
            object.__setattr__(self, "column_scalings", (one, one, one))

    @classmethod
    def canonical(cls, prime: int, shape: str, d1, d2, e1, e2) -> "NormalizedForms":
        """Build directly from the four free coefficients (ints or scalars)."""

        def lift(x):
            return x if isinstance(x, PAdicScalar) else PAdicScalar.from_int(x, prime)

        return cls(prime, shape, lift(d1), lift(d2), lift(e1), lift(e2))

    @property
    def coefficients(self) -> tuple[PAdicScalar, ...]:
        return (self.delta1, self.delta2, self.eps1, self.eps2)

    @property
    def k1(self) -> int:
        return self.delta1.valuation

    @property
    def k2(self) -> int:
        return self.delta2.valuation

    @property
    def l1(self) -> int:
        return self.eps1.valuation

    @property
    def l2(self) -> int:
        return self.eps2.valuation

    @property
    def k(self) -> int:
        return min(self.k1, self.k2, self.l1, self.l2)

    @property
    def matrix(self) -> Matrix:
        one = PAdicScalar.from_int(1, self.prime)
        if self.shape == LAMBDA1:
            return ((one, one, one), (one, self.delta1, self.delta2), (one, self.eps1, self.eps2))
        return ((one, one, one), (self.delta1, one, self.delta2), (one, self.eps1, self.eps2))

    def reconstruct(self) -> Matrix:
        """The raw matrix this canonical form was derived from."""
        canon = self.matrix
        raw: list[list[PAdicScalar | None]] = [[None] * 3 for _ in range(3)]
        for r in range(3):
            for c in range(3):
                value = canon[r][c] * self.row_scalings[r] * self.column_scalings[c]
                raw[r][self.column_permutation[c]] = value
        return tuple(tuple(row) for row in raw)  # type: ignore[arg-type]

    def describe(self) -> str:
        return (
            f"{self.shape} p={self.prime} d1={self.delta1.to_fraction()} d2={self.delta2.to_fraction()} "
            f"e1={self.eps1.to_fraction()} e2={self.eps2.to_fraction()}"
        )


@dataclass(frozen=True)
class DetDecomposition:
    q: int
    lambda_unit: PAdicScalar

    @property
    def determinant(self) -> PAdicScalar:
        return PAdicScalar.from_int(self.lambda_unit.prime**self.q, self.lambda_unit.prime) * self.lambda_unit


def parse_matrix(text: str, prime: int) -> RawForms:
    """Rows separated by ``;``, entries by ``,``; entries are p-adic literals."""
    rows = [r for r in text.strip().split(";")]
    if len(rows) != 3:
        raise MalformedMatrix(f"expected 3 rows, got {len(rows)}")
    parsed = []
    for r in rows:
        entries = r.split(",")
        if len(entries) != 3:
            raise MalformedMatrix(f"expected 3 entries in row {r!r}")
        parsed.append(tuple(parse_literal(e.strip(), prime) for e in entries))
    return RawForms(prime, tuple(parsed))


def normalize(raw: RawForms) -> NormalizedForms:
    """Substitute variables and rescale forms until the matrix is ``L1`` or ``L2``.

    Column ``j`` is divided by its row-1 entry, the column holding the
    smallest row-2 valuation is moved first (ties: a column that also holds
    the smallest row-3 valuation, then the smallest index), and the
    remaining rows are divided by the entries carrying their minima.  When
    no column holds both minima the row-3 minimum goes first instead and the
    row-2 minimum second, which gives ``L2`` with the forms in place.
    """
    a = raw.coefficients
    col_div = [a[0][j] for j in range(3)]
    b = [[divide(a[i][j], col_div[j]) for j in range(3)] for i in range(3)]
    kv = [b[1][j].valuation for j in range(3)]
    lv = [b[2][j].valuation for j in range(3)]
    kmin, lmin = min(kv), min(lv)
    tied = [j for j in range(3) if kv[j] == kmin]
    both = [j for j in tied if lv[j] == lmin]
    lead = both[0] if both else tied[0]
    order = [lead] + [j for j in range(3) if j != lead]

    if lv[lead] == lmin:
        shape = LAMBDA1
        divisors = (None, b[1][lead], b[2][lead])
    else:
        # the row-3 minimum moves to column 1 and the row-2 minimum to column 2
        shape = LAMBDA2
        first = min(j for j in range(3) if lv[j] == lmin)
        order = [first, lead] + [j for j in range(3) if j not in (first, lead)]
        divisors = (None, b[1][lead], b[2][first])

    one = PAdicScalar.from_int(1, raw.prime)
    row_scalings = (one, divisors[1], divisors[2])
    canon = [
        [divide(b[r][order[c]], row_scalings[r]) for c in range(3)] for r in range(3)
    ]
    if shape == LAMBDA1:
        d1, d2, e1, e2 = canon[1][1], canon[1][2], canon[2][1], canon[2][2]
    else:
        d1, d2, e1, e2 = canon[1][0], canon[1][2], canon[2][1], canon[2][2]
    return NormalizedForms(
        prime=raw.prime,
        shape=shape,
        delta1=d1,
        delta2=d2,
        eps1=e1,
        eps2=e2,
        column_permutation=tuple(order),  # type: ignore[arg-type]
        row_scalings=row_scalings,
        column_scalings=tuple(col_div[order[c]] for c in range(3)),
    )


def cofactor_det(m) -> PAdicScalar | Fraction:
    """Cofactor expansion along the first row (works on scalars or rationals)."""
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def closed_form_det(nf: NormalizedForms) -> PAdicScalar:
    return PAdicScalar.from_fraction(_closed_form_rational(nf), nf.prime)


def _closed_form_rational(nf: NormalizedForms) -> Fraction:
    d1, d2, e1, e2 = (x.to_fraction() for x in nf.coefficients)
    if nf.shape == LAMBDA1:
        return d1 * e2 - d2 * e1 - d1 + d2 + e1 - e2
    return d1 * e1 - d2 * e1 - d1 * e2 + d2 + e2 - 1


def det_decompose(nf: NormalizedForms) -> DetDecomposition:
    det = _closed_form_rational(nf)
    check = cofactor_det([[x.to_fraction() for x in row] for row in nf.matrix])
    if det != check:
        raise AssertionError(f"closed-form determinant {det} disagrees with cofactor {check}")
    if det == 0:
        raise SingularForms(f"det = 0 for {nf.describe()}")
    scalar = PAdicScalar.from_fraction(det, nf.prime)
    unit = PAdicScalar(nf.prime, scalar.sign, 0, scalar.unit)
    return DetDecomposition(q=scalar.valuation, lambda_unit=unit)


def expand_det_by_valuations(nf: NormalizedForms) -> PAdicScalar:
    """Term-by-term expansion of det L1 through valuations and unit parts."""
    if nf.shape != LAMBDA1:
        raise WrongShape("the valuation expansion is written for L1 only")
    p = nf.prime

    def term(v: int, unit: PAdicScalar) -> PAdicScalar:
        return PAdicScalar.from_int(p**v, p) * unit

    def unit_of(x: PAdicScalar) -> PAdicScalar:
        return PAdicScalar(p, x.sign, 0, x.unit)

    c1, c2 = unit_of(nf.delta1), unit_of(nf.delta2)
    d1, d2 = unit_of(nf.eps1), unit_of(nf.eps2)
    k1, k2, l1, l2 = nf.k1, nf.k2, nf.l1, nf.l2
    return (
        term(k1 + l2, c1 * d2)
        - term(k2 + l1, c2 * d1)
        + term(k2, c2)
        - term(k1, c1)
        + term(l1, d1)
        - term(l2, d2)
    )


def elementary_exponents(nf: NormalizedForms) -> tuple[int, int, int]:
    """Exponents ``e1 <= e2 <= e3`` of the Smith form of the canonical matrix
    over the p-adic integers (``e1 + e2 + e3 = q``)."""
    m = nf.matrix
    q = det_decompose(nf).q
    e1 = min(x.valuation for row in m for x in row)
    minors = []
    for r in ((0, 1), (0, 2), (1, 2)):
        for c in ((0, 1), (0, 2), (1, 2)):
            minors.append(m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]])
    e12 = min(x.valuation for x in minors)
    if e12 is INF:
        raise SingularForms("all 2x2 minors vanish")
    return e1, e12 - e1, q - e12
