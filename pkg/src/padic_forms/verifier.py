"""Exact independence tests for ``(L1, L2, L3) = A (xi1, xi2, xi3)`` on ``Z/p^n``.

Two routes are kept apart on purpose: the joint law of the forms (exact
integers) and the characteristic-function equation (floats, or exact when
all three functions are indicators).  :func:`independence_lifted` answers
the question for the p-adic integers themselves, where each distribution on
``Z/p^n`` is read as a ``p^n``-invariant distribution on the p-adic integers.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .finite import (
    TOL,
    CharFunction,
    CyclicGroup,
    FiniteDistribution,
    GroupMismatch,
    char_fn,
)
from .forms import NormalizedForms, SingularForms, elementary_exponents
from .padic import reduce_mod

EXACT_JOINT = "ExactJoint"
FUNCTIONAL_EQUATION = "FunctionalEquation"
LIFTED_EXACT = "LiftedExact"

# float64 holds integers exactly below 2**53; products in the two-stage
# comparison must stay below 2**63
_FLOAT_EXACT = 2**53
_PRODUCT_SAFE = 3_000_000_000


class Disagreement(AssertionError):
    pass


@dataclass(frozen=True)
class FiniteForms:
    group: CyclicGroup
    matrix: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        n = self.group.order
        m = tuple(tuple(int(x) % n for x in row) for row in self.matrix)
        if len(m) != 3 or any(len(r) != 3 for r in m):
            raise ValueError("expected a 3x3 matrix")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_normalized(cls, nf: NormalizedForms, n: int) -> "FiniteForms":
        return cls(CyclicGroup(nf.prime, n), tuple(tuple(reduce_mod(x, n) for x in row) for row in nf.matrix))

    @classmethod
    def from_rows(cls, prime: int, n: int, rows: Sequence[Sequence[int]]) -> "FiniteForms":
        return cls(CyclicGroup(prime, n), tuple(tuple(r) for r in rows))

    def reduced(self, h: int) -> "FiniteForms":
        g = CyclicGroup(self.group.prime, h)
        return FiniteForms(g, self.matrix)

    def invertible_mod_p(self) -> bool:
        p = self.group.prime
        m = self.matrix
        det = (
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        )
        return det % p != 0


@dataclass(frozen=True)
class IndependenceReport:
    independent: bool
    method: str
    failing_cell: Optional[tuple[int, int, int]] = None
    max_residual: Optional[float] = None
    reason: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "independent": self.independent,
            "method": self.method,
            "failing_cell": None if self.failing_cell is None else list(self.failing_cell),
            "max_residual": self.max_residual,
        }


def _check_groups(mus: Sequence[FiniteDistribution], group: CyclicGroup) -> None:
    for mu in mus:
        if mu.group != group:
            raise GroupMismatch(f"distribution on {mu.group} but forms on {group}")


# ---------------------------------------------------------------------------
# joint-law route


def invariance_level(mu: FiniteDistribution) -> int:
    """Smallest ``h`` with ``mu`` invariant under translation by ``p^h Z/p^n``."""
    g = mu.group
    w, _ = mu.integer_weights()
    for h in range(g.exponent + 1):
        step = g.prime**h
        if (w.reshape(-1, step) == w[:step]).all():
            return h
    return g.exponent


def reduce_distribution(mu: FiniteDistribution, h: int) -> FiniteDistribution:
    """Image under ``Z/p^n -> Z/p^h``."""
    g = CyclicGroup(mu.group.prime, h)
    w, den = mu.integer_weights()
    folded = w.reshape(-1, g.order).sum(axis=0)
    return FiniteDistribution(g, tuple(Fraction(int(x), den) for x in folded))


def _joint_law(mus: Sequence[FiniteDistribution], forms: FiniteForms):
    """Sparse joint law of the three forms as integers over a common
    denominator: ``(cells, counts, den)`` with ``cells`` the flat indices
    ``(a*N + b)*N + c`` of the support."""
    n = forms.group.order
    supports, weights, dens = [], [], []
    for mu in mus:
        w, d = mu.integer_weights()
        supp = np.array(mu.support, dtype=np.int64)
        supports.append(supp)
        weights.append(w[supp])
        dens.append(d)
    den = dens[0] * dens[1] * dens[2]
    x1 = supports[0][:, None, None]
    x2 = supports[1][None, :, None]
    x3 = supports[2][None, None, :]
    m = forms.matrix
    coords = [(m[r][0] * x1 + m[r][1] * x2 + m[r][2] * x3) % n for r in range(3)]
    flat = ((coords[0] * n + coords[1]) * n + coords[2]).ravel()
    wt = (weights[0][:, None, None] * weights[1][None, :, None] * weights[2][None, None, :]).ravel()
    cells, inverse = np.unique(flat, return_inverse=True)
    if den < _FLOAT_EXACT:
        counts = np.bincount(inverse, weights=wt.astype(np.float64)).astype(np.int64)
    else:
        counts = np.zeros(len(cells), dtype=object)
        for i, val in zip(inverse.tolist(), wt.tolist()):
            counts[i] += val
    return cells, counts, den


def _marginal(index: np.ndarray, counts: np.ndarray, size: int) -> np.ndarray:
    if counts.dtype == object:
        out = np.zeros(size, dtype=object)
        for i, c in zip(index.tolist(), counts.tolist()):
            out[i] += c
        return out
    return np.bincount(index, weights=counts.astype(np.float64), minlength=size).astype(np.int64)


def _dense_independence(mus: Sequence[FiniteDistribution], forms: FiniteForms) -> Optional[tuple[int, int, int]]:
    """None when the joint law factorises, else a cell where it does not.

    Equality is only tested on the support of the joint law: both sides are
    probability laws, so agreement there forces the product of marginals to
    vanish everywhere else.
    """
    n = forms.group.order
    cells, counts, den = _joint_law(mus, forms)
    if den >= _PRODUCT_SAFE and counts.dtype != object:
        counts = counts.astype(object)
    a, rest = np.divmod(cells, n * n)
    b, c = np.divmod(rest, n)
    m1, m2, m3 = (_marginal(idx, counts, n) for idx in (a, b, c))
    pair_cells, pair_inv = np.unique(a * n + b, return_inverse=True)
    j12 = _marginal(pair_inv, counts, len(pair_cells))
    pa, pb = np.divmod(pair_cells, n)
    # J12/D = m1 m2 and J/D = (J12/D) m3 together say J/D = m1 m2 m3
    bad = np.flatnonzero(j12 * den != m1[pa] * m2[pb])
    if len(bad):
        ia, ib = int(pa[bad[0]]), int(pb[bad[0]])
        row = {int(cc): int(v) for aa, bb, cc, v in zip(a, b, c, counts) if aa == ia and bb == ib}
        for cc in range(n):
            if row.get(cc, 0) * den * den != int(m1[ia]) * int(m2[ib]) * int(m3[cc]):
                return ia, ib, cc
        raise AssertionError("pairwise marginal mismatch without a failing cell")
    bad = np.flatnonzero(counts * den != j12[pair_inv] * m3[c])
    if len(bad):
        i = bad[0]
        return int(a[i]), int(b[i]), int(c[i])
    return None


def _inverse_mod(m: Sequence[Sequence[int]], mod: int) -> list[list[int]]:
    """Inverse of a 3x3 matrix whose determinant is a unit mod ``mod``."""
    cof = [[0] * 3 for _ in range(3)]
    for r in range(3):
        for c in range(3):
            rows = [i for i in range(3) if i != r]
            cols = [j for j in range(3) if j != c]
            minor = m[rows[0]][cols[0]] * m[rows[1]][cols[1]] - m[rows[0]][cols[1]] * m[rows[1]][cols[0]]
            cof[r][c] = (-1) ** (r + c) * minor
    det = sum(m[0][c] * cof[0][c] for c in range(3))
    inv_det = pow(det % mod, -1, mod)
    return [[cof[c][r] * inv_det % mod for c in range(3)] for r in range(3)]


@dataclass(frozen=True, eq=False)
class _Quotient:
    """``(Z/p^n)^3 / H`` for ``H = A (p^h Z/p^n)^3``, realised as
    ``prod Z/d_i`` through ``L -> (P L) mod d``."""

    pm: np.ndarray
    pm_inverse: list[list[int]]
    moduli: tuple[int, int, int]
    # generators of the images of the marginal subgroups A_i (p^h Z)^3
    marginal_generators: tuple[tuple[int, int, int], ...]

    @property
    def size(self) -> int:
        return self.moduli[0] * self.moduli[1] * self.moduli[2]

    def flat(self, coords: np.ndarray) -> np.ndarray:
        """Flat cell index of quotient coordinates (last axis of length 3)."""
        d = self.moduli
        c = coords % np.array(d, dtype=np.int64)
        return (c[..., 0] * d[1] + c[..., 1]) * d[2] + c[..., 2]


@functools.lru_cache(maxsize=8192)
def _quotient(forms: FiniteForms, h: int) -> _Quotient:
    p, n = forms.group.prime, forms.group.exponent
    mod = p**n
    scaled = [[x * p**h % mod for x in row] for row in forms.matrix]
    pm, exps, _ = smith_mod(scaled, p, n)
    moduli = tuple(p**e for e in exps)
    gens = []
    for i in range(3):
        row = forms.matrix[i]
        v = min(_valuations_mod(np.array(row, dtype=np.int64), p, n))
        if v + h >= n:
            continue
        step = p ** (v + h)
        gens.append(tuple(int(pm[r][i] * step % moduli[r]) for r in range(3)))
    return _Quotient(np.array(pm, dtype=np.int64), _inverse_mod(pm, mod), moduli, tuple(gens))  # type: ignore[arg-type]


def _subgroup_elements(gens: Sequence[tuple[int, int, int]], moduli: Sequence[int]) -> np.ndarray:
    d = np.array(moduli, dtype=np.int64)
    elems = np.zeros((1, 3), dtype=np.int64)
    for g in gens:
        g = np.array(g, dtype=np.int64)
        orbit = [elems]
        step = g % d
        while step.any():
            orbit.append((elems + step) % d)
            step = (step + g) % d
        elems = np.unique(np.concatenate(orbit), axis=0)
    return elems


def _exact_array(size: int, bound: int):
    return np.zeros(size, dtype=np.int64 if bound < 2**62 else object)


def _quotient_independence(mus: Sequence[FiniteDistribution], forms: FiniteForms, h: int) -> Optional[tuple[int, int, int]]:
    """Independence test for laws invariant under ``p^h Z/p^n``.

    Writing each law as a law ``nu_j`` on ``Z/p^h`` plus independent Haar
    noise on ``p^h Z/p^n``, the joint law of the forms and the product of
    its marginals are both invariant under ``H = A (p^h Z)^3``, so they agree
    iff their images on the quotient by ``H`` do.  On the quotient the joint
    law is the image of ``nu_1 x nu_2 x nu_3``; the product of marginals is
    the convolution of the images of the three forms, smeared over the
    subgroup ``S`` generated by the images of the marginal noise.
    """
    p = forms.group.prime
    quo = _quotient(forms, h)
    d = np.array(quo.moduli, dtype=np.int64)
    m = np.array(forms.matrix, dtype=np.int64)
    nus = [reduce_distribution(mu, h) for mu in mus]
    supports, weights, dens = [], [], []
    for nu in nus:
        w, den = nu.integer_weights()
        supp = np.array(nu.support, dtype=np.int64)
        supports.append(supp)
        weights.append(w[supp])
        dens.append(den)
    den = dens[0] * dens[1] * dens[2]
    x = np.stack(np.meshgrid(*supports, indexing="ij"), axis=-1).reshape(-1, 3)
    wt = (weights[0][:, None, None] * weights[1][None, :, None] * weights[2][None, None, :]).reshape(-1)
    forms_at = (x @ m.T) % forms.group.order  # (combos, 3): values of the forms
    s_elems = _subgroup_elements(quo.marginal_generators, quo.moduli)
    size, s_size = quo.size, len(s_elems)
    bound = den**3 * s_size

    def image(cells: np.ndarray) -> np.ndarray:
        out = _exact_array(size, bound)
        np.add.at(out, cells, wt.astype(out.dtype))
        return out

    joint = image(quo.flat(forms_at @ quo.pm.T))
    # law of each form, pushed into its own quotient direction
    parts = [image(quo.flat(forms_at[:, i : i + 1] * quo.pm[:, i][None, :])) for i in range(3)]

    grid = np.stack(np.unravel_index(np.arange(size), quo.moduli), axis=-1)

    def convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = _exact_array(size, bound)
        for cell in np.flatnonzero(a):
            shift = np.array(np.unravel_index(cell, quo.moduli), dtype=np.int64)
            out[quo.flat(grid + shift)] += a[cell] * b
        return out

    product = convolve(convolve(parts[0], parts[1]), parts[2])
    smeared = _exact_array(size, bound)
    for s in s_elems:
        smeared[quo.flat(grid + s)] += product
    # joint/den == smeared / (s_size * den^3)
    bad = np.flatnonzero(joint * (s_size * den * den) != smeared)
    if not len(bad):
        return None
    c = grid[bad[0]]
    mod = forms.group.order
    cell = tuple(int(sum(quo.pm_inverse[r][k] * int(c[k]) for k in range(3)) % mod) for r in range(3))
    return cell  # type: ignore[return-value]


def independence_exact(mu1, mu2, mu3, forms: FiniteForms, dense: bool = False) -> IndependenceReport:
    """Does the joint law of the forms equal the product of its marginals?

    The comparison runs either on the support of the joint law or, when the
    laws are invariant under ``p^h Z/p^n`` and that is cheaper, on the
    quotient by the subgroup ``A (p^h Z)^3`` (:func:`_quotient_independence`);
    a failing quotient cell is reported through a representative, which
    fails too.  ``dense`` forces the support comparison.
    """
    mus = (mu1, mu2, mu3)
    _check_groups(mus, forms.group)
    cell = None
    if not dense:
        p, n = forms.group.prime, forms.group.exponent
        h = max(invariance_level(mu) for mu in mus)
        direct = 1
        for mu in mus:
            direct *= len(mu.support)
        if h < n:
            # rough costs: vectorised support comparison against the
            # per-cell loops of the quotient convolutions
            quo = _quotient(forms, h)
            combos = 1
            for mu in mus:
                combos *= min(len(mu.support), p**h)
            loops = 2 * min(combos, quo.size) + 1
            if combos * 2 + loops * (500 + quo.size) < direct * 8:
                cell = _quotient_independence(mus, forms, h)
                return IndependenceReport(cell is None, EXACT_JOINT, cell)
    cell = _dense_independence(mus, forms)
    return IndependenceReport(cell is None, EXACT_JOINT, cell)


# ---------------------------------------------------------------------------
# characteristic-function route


def _column_coefficients(forms: FiniteForms):
    m = forms.matrix
    return [tuple(m[r][j] for r in range(3)) for j in range(3)]


def functional_eq_check(f: CharFunction, g: CharFunction, h: CharFunction, forms: FiniteForms, tol: float = TOL) -> IndependenceReport:
    """Compare ``prod_j F_j(a_j u + b_j v + c_j w)`` with
    ``prod_j F_j(a_j u) F_j(b_j v) F_j(c_j w)`` on every ``(u, v, w)``, where
    ``(a_j, b_j, c_j)`` is column ``j`` of the matrix."""
    funcs = (f, g, h)
    for fn in funcs:
        if fn.group != forms.group:
            raise GroupMismatch("characteristic function on a different group")
    n = forms.group.order
    exact = all(fn.indicator_exact is not None for fn in funcs)
    tables = [np.array(fn.indicator_exact, dtype=np.int64) if exact else fn.values for fn in funcs]
    ys = np.arange(n)
    u = ys[:, None, None]
    v = ys[None, :, None]
    w = ys[None, None, :]
    lhs = 1
    side = [1, 1, 1]
    for j, (a, b, c) in enumerate(_column_coefficients(forms)):
        tab = tables[j]
        lhs = lhs * tab[(a * u + b * v + c * w) % n]
        for r, coeff in enumerate((a, b, c)):
            side[r] = side[r] * tab[(coeff * ys) % n]
    rhs = side[0][:, None, None] * side[1][None, :, None] * side[2][None, None, :]
    if exact:
        diff = lhs != rhs
        residual = 1.0 if diff.any() else 0.0
        return IndependenceReport(not diff.any(), FUNCTIONAL_EQUATION, None, residual)
    residual = float(np.max(np.abs(lhs - rhs)))
    return IndependenceReport(residual <= tol, FUNCTIONAL_EQUATION, None, residual)


def agreement(mu1, mu2, mu3, forms: FiniteForms, tol: float = TOL) -> bool:
    exact = independence_exact(mu1, mu2, mu3, forms)
    spectral = functional_eq_check(char_fn(mu1), char_fn(mu2), char_fn(mu3), forms, tol)
    if exact.independent != spectral.independent:
        raise Disagreement(f"joint law says {exact.independent}, characteristic functions say {spectral.independent}")
    return exact.independent


# ---------------------------------------------------------------------------
# the p-adic reading of a finite model


def smith_mod(matrix: Sequence[Sequence[int]], p: int, n: int):
    """``(P, exps, Q)`` with ``P A Q = diag(p**exps)`` mod ``p^n``; ``P`` and
    ``Q`` invertible, exponents capped at ``n``."""
    mod = p**n
    a = [[int(x) % mod for x in row] for row in matrix]
    size = len(a)
    pm = [[int(i == j) for j in range(size)] for i in range(size)]
    qm = [[int(i == j) for j in range(size)] for i in range(size)]

    def val(x: int) -> int:
        if x % mod == 0:
            return n
        v = 0
        while x % p == 0:
            x //= p
            v += 1
        return v

    exps = []
    for i in range(size):
        best = min(((val(a[r][c]), r, c) for r in range(i, size) for c in range(i, size)))
        v, r, c = best
        if v == n:
            exps.extend([n] * (size - i))
            break
        a[i], a[r] = a[r], a[i]
        pm[i], pm[r] = pm[r], pm[i]
        for row in a:
            row[i], row[c] = row[c], row[i]
        for row in qm:
            row[i], row[c] = row[c], row[i]
        unit_inv = pow(a[i][i] // p**v, -1, mod)
        a[i] = [x * unit_inv % mod for x in a[i]]
        pm[i] = [x * unit_inv % mod for x in pm[i]]
        for rr in range(size):
            if rr != i and a[rr][i]:
                factor = a[rr][i] // p**v
                a[rr] = [(x - factor * y) % mod for x, y in zip(a[rr], a[i])]
                pm[rr] = [(x - factor * y) % mod for x, y in zip(pm[rr], pm[i])]
        for cc in range(size):
            if cc != i and a[i][cc]:
                factor = a[i][cc] // p**v
                for row in a:
                    row[cc] = (row[cc] - factor * row[i]) % mod
                for row in qm:
                    row[cc] = (row[cc] - factor * row[i]) % mod
        exps.append(v)
    return pm, exps, qm


def kernel_levels(forms: FiniteForms) -> tuple[int, int, int]:
    """For each variable ``j``, the smallest valuation of the ``j``-th
    coordinate over the kernel of the matrix on ``(Z/p^n)^3`` (``n`` when the
    coordinate always vanishes)."""
    p, n = forms.group.prime, forms.group.exponent
    _, exps, qm = smith_mod(forms.matrix, p, n)
    levels = []
    for j in range(3):
        best = n
        for i, e in enumerate(exps):
            if e == 0:
                continue
            x = qm[j][i] * p ** (n - e) % p**n
            if x == 0:
                continue
            v = 0
            while x % p == 0:
                x //= p
                v += 1
            best = min(best, v)
        levels.append(best)
    return tuple(levels)  # type: ignore[return-value]


@dataclass(frozen=True)
class LiftData:
    """What the p-adic reading needs besides the finite matrix."""

    forms: FiniteForms
    kernel_exponent: int  # largest Smith exponent of the p-adic matrix
    levels: tuple[int, int, int]


@functools.lru_cache(maxsize=4096)
def _lift_data_cached(nf: NormalizedForms, n: int) -> LiftData:
    forms = FiniteForms.from_normalized(nf, n)
    return LiftData(forms, elementary_exponents(nf)[2], kernel_levels(forms))


def lift_data(nf: NormalizedForms, n: int) -> LiftData:
    return _lift_data_cached(nf, n)


def lifted_obstruction(levels_of_mus: Sequence[int], data: LiftData) -> Optional[str]:
    """Reason the lifted triple cannot be independent, judged from the
    invariance levels alone, or None."""
    n = data.forms.group.exponent
    if data.kernel_exponent > n:
        return f"kernel of the forms is not inside p^-{n} (Smith exponent {data.kernel_exponent})"
    for j, (h, c) in enumerate(zip(levels_of_mus, data.levels)):
        if h > c:
            return f"distribution {j + 1} is not invariant under the kernel projection (level {h} > {c})"
    return None


def independence_lifted(mu1, mu2, mu3, nf: NormalizedForms, n: Optional[int] = None,
                        plain: Optional[IndependenceReport] = None) -> IndependenceReport:
    """Independence on the p-adic integers of the ``p^n``-periodic lifts.

    Equivalent to: plain independence on ``Z/p^n``, the kernel of the p-adic
    matrix on ``(Q_p/Z_p)^3`` lying in the ``p^n``-torsion, and every
    characteristic function vanishing off the image of the transposed matrix
    mod ``p^n`` (which amounts to invariance under each projection of the
    kernel mod ``p^n``).  ``plain`` may carry an already computed finite
    report for the same triple.
    """
    mus = (mu1, mu2, mu3)
    n = mu1.group.exponent if n is None else n
    forms = FiniteForms.from_normalized(nf, n)
    if forms.invertible_mod_p():
        # the kernel is trivial, so the lift adds no condition
        if plain is None:
            plain = independence_exact(mu1, mu2, mu3, forms)
        return IndependenceReport(plain.independent, LIFTED_EXACT, plain.failing_cell, None,
                                  None if plain.independent else "finite joint law does not factorise")
    data = lift_data(nf, n)
    _check_groups(mus, data.forms.group)
    why = lifted_obstruction([invariance_level(mu) for mu in mus], data)
    if why is not None:
        return IndependenceReport(False, LIFTED_EXACT, None, None, why)
    if plain is None:
        plain = independence_exact(mu1, mu2, mu3, data.forms)
    return IndependenceReport(plain.independent, LIFTED_EXACT, plain.failing_cell, None, None if plain.independent else "finite joint law does not factorise")


# ---------------------------------------------------------------------------
# searching for counterexamples to a forced verdict

SCREEN_MARGIN = 1e-6


def _two_atom(group: CyclicGroup, a: int, wa: Fraction) -> FiniteDistribution:
    probs = [Fraction(0)] * group.order
    probs[0] += 1 - wa
    probs[a % group.order] += wa
    return FiniteDistribution(group, tuple(probs))


def _three_atom(group: CyclicGroup, a: int) -> FiniteDistribution:
    probs = [Fraction(0)] * group.order
    probs[0] += Fraction(1, 2)
    probs[a % group.order] += Fraction(1, 4)
    probs[-a % group.order] += Fraction(1, 4)
    return FiniteDistribution(group, tuple(probs))


def _convolve_with_haar(mu: FiniteDistribution, i: int) -> FiniteDistribution:
    g = mu.group
    step = g.prime**i
    out = [Fraction(0)] * g.order
    share = Fraction(1, g.order // step)
    for x in mu.support:
        for z in range(0, g.order, step):
            out[(x + z) % g.order] += mu.probs[x] * share
    return FiniteDistribution(g, tuple(out))


def search_family(group: CyclicGroup) -> list[FiniteDistribution]:
    """Haar laws of all subgroups, two- and three-atom laws on the subgroup
    generators, and their convolutions with Haar laws of larger subgroups.

    Translates are left out: shifting any member changes neither the
    independence of a triple nor idempotence or degeneracy.
    """
    from .finite import Subgroup, haar_on

    p, n = group.prime, group.exponent
    members: list[FiniteDistribution] = [haar_on(Subgroup(group, j)) for j in range(n + 1)]
    small = []
    for j in range(n):
        gen = p**j
        small.append((j, _two_atom(group, gen, Fraction(1, 2))))
        small.append((j, _three_atom(group, gen)))
        small.append((j, _two_atom(group, gen, Fraction(1, 4))))
    members.extend(mu for _, mu in small)
    for j, mu in small:
        for i in range(j + 1, n):
            members.append(_convolve_with_haar(mu, i))
    seen, unique = set(), []
    for mu in members:
        if mu.probs not in seen:
            seen.add(mu.probs)
            unique.append(mu)
    return unique


def random_law(group: CyclicGroup, rng: np.random.Generator, denominator: int = 64) -> FiniteDistribution:
    size = int(rng.integers(1, min(group.order, denominator) + 1))
    support = rng.choice(group.order, size=size, replace=False)
    counts = rng.multinomial(denominator, np.full(size, 1.0 / size))
    probs = [Fraction(0)] * group.order
    for x, c in zip(support.tolist(), counts.tolist()):
        probs[x] += Fraction(c, denominator)
    return FiniteDistribution(group, tuple(probs))


@dataclass(frozen=True, eq=False)
class LawTable:
    laws: tuple[FiniteDistribution, ...]
    chars: np.ndarray  # (members, p^n) complex
    levels: np.ndarray
    idempotent: np.ndarray
    degenerate: np.ndarray


def _law_table(laws: Sequence[FiniteDistribution]) -> LawTable:
    from .finite import char_values, is_degenerate, is_idempotent

    group = laws[0].group
    probs = np.array([mu.as_float() for mu in laws])
    return LawTable(
        tuple(laws),
        char_values(probs, group),
        np.array([invariance_level(mu) for mu in laws]),
        np.array([is_idempotent(mu) for mu in laws]),
        np.array([is_degenerate(mu) for mu in laws]),
    )


@functools.lru_cache(maxsize=16)
def family_table(group: CyclicGroup) -> LawTable:
    return _law_table(search_family(group))


@functools.lru_cache(maxsize=16)
def random_pool(group: CyclicGroup, budget: int, seed: int) -> LawTable:
    rng = np.random.default_rng([seed, group.prime, group.exponent])
    return _law_table([random_law(group, rng) for _ in range(3 * budget)])


def _torsion_product(p: int, n: int, levels: Sequence[int], cap: int) -> np.ndarray:
    """Points of ``Y_(p^a) x Y_(p^b) x Y_(p^c)``: all of them when there are at
    most ``cap``, otherwise ``cap`` samples (seeded by the arguments)."""
    scales = np.array([p ** (n - h) for h in levels], dtype=np.int64)
    sizes = [p**h for h in levels]
    if sizes[0] * sizes[1] * sizes[2] <= cap:
        grid = np.stack(np.meshgrid(*[np.arange(m) for m in sizes], indexing="ij"), axis=-1).reshape(-1, 3)
    else:
        rng = np.random.default_rng([p, n, *levels, cap])
        grid = np.stack([rng.integers(0, m, size=cap) for m in sizes], axis=1)
    return (grid * scales) % p**n


_torsion_cached = functools.lru_cache(maxsize=8192)(
    lambda p, n, levels, cap: _torsion_product(p, n, levels, cap)
)


class TransposeSolver:
    """Solutions ``t`` of ``A^T t = s`` on ``(Z/p^n)^3``, every kernel translate
    when the kernel has at most ``kernel_cap`` elements, else a sample."""

    def __init__(self, forms: FiniteForms, rng: np.random.Generator, kernel_cap: int = 27):
        p, n = forms.group.prime, forms.group.exponent
        self.mod = p**n
        transpose = [[forms.matrix[c][r] for c in range(3)] for r in range(3)]
        pm, exps, qm = smith_mod(transpose, p, n)
        self.pm = np.array(pm, dtype=np.int64)
        self.qm = np.array(qm, dtype=np.int64)
        self.divisors = np.array([p**e for e in exps], dtype=np.int64)
        sizes = [p**e for e in exps]
        if sizes[0] * sizes[1] * sizes[2] <= kernel_cap:
            zs = np.stack(np.meshgrid(*[np.arange(m) for m in sizes], indexing="ij"), axis=-1).reshape(-1, 3)
        else:
            zs = np.stack([rng.integers(0, m, size=kernel_cap) for m in sizes], axis=1)
        zs = zs * np.array([p ** (n - e) for e in exps], dtype=np.int64)
        self.kernel = (zs @ self.qm.T) % self.mod

    def solve(self, s: np.ndarray, tags: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Solutions for the solvable rows of ``s``, each carrying its row's tag."""
        w = (s @ self.pm.T) % self.mod
        ok = np.all(w % self.divisors == 0, axis=1)
        base = ((w[ok] // self.divisors) @ self.qm.T) % self.mod
        tags = tags[ok]
        k = len(self.kernel)
        if k == 1:
            return base, tags
        t = (base[:, None, :] + self.kernel[None, :, :]) % self.mod
        return t.reshape(-1, 3), np.repeat(tags, k)


def _valuations_mod(values: np.ndarray, p: int, n: int) -> np.ndarray:
    out = np.zeros(values.shape, dtype=np.int64)
    x = values % p**n
    for _ in range(n):
        hit = (x % p == 0) & (out < n)
        out += hit
        x = np.where(hit, x // p, x)
    return out


def level_points(forms: FiniteForms, solver: TransposeSolver, levels: np.ndarray, cap: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Screening points for laws whose transforms vanish off the
    ``p^h_j``-torsion, one block of ``2 * cap`` per row ``(h_1, h_2, h_3)`` of
    ``levels``.  The first ``cap`` points have their transposed image in the
    torsion product (where the left side of the characteristic-function
    equation may be nonzero), the rest lie in the product where the right
    side may be.  Small point sets are complete and padded by repetition."""
    p, n = forms.group.prime, forms.group.exponent
    g = len(levels)
    keys = [tuple(int(h) for h in row) for row in levels]
    sets = [_torsion_cached(p, n, key, cap) for key in keys]
    t, tag = solver.solve(np.concatenate(sets), np.repeat(np.arange(g), [len(s) for s in sets]))
    # solutions come out grouped by tag; complete sets are cycled from a
    # random offset, larger ones sampled
    counts = np.bincount(tag, minlength=g)
    starts = np.cumsum(counts) - counts
    cols = np.arange(cap)[None, :]
    cycled = (cols + rng.integers(0, counts)[:, None]) % counts[:, None]
    sampled = rng.integers(0, counts[:, None], size=(g, cap))
    left = t[starts[:, None] + np.where(counts[:, None] <= cap, cycled, sampled)]

    vals = _valuations_mod(np.array(forms.matrix, dtype=np.int64), p, n)  # (row, column)
    bounds = np.minimum((levels[:, None, :] + vals[None, :, :]).min(axis=2), n)
    right = []
    for row in bounds:
        pts = _torsion_cached(p, n, tuple(int(b) for b in row), cap)
        right.append(pts[np.arange(cap) % len(pts)])
    return np.concatenate([left, np.stack(right)], axis=1)


def _sides(table: LawTable, rows: np.ndarray, forms: FiniteForms, points: np.ndarray, j: int):
    """Both sides of the characteristic-function equation, factor ``j``."""
    n = forms.group.order
    col = [forms.matrix[r][j] for r in range(3)]
    arg = (points @ np.array(col)) % n
    chars = table.chars[rows]
    left = chars[:, arg]
    right = chars[:, (col[0] * points[:, 0]) % n] * chars[:, (col[1] * points[:, 1]) % n] * chars[:, (col[2] * points[:, 2]) % n]
    return left, right


def _triple_residual(tables, rows, forms, points):
    """Max residual for explicit triples: ``rows[j]`` indexes ``tables[j]``."""
    lhs, rhs = 1, 1
    for j in range(3):
        left, right = _sides(tables[j], rows[j], forms, points, j)
        lhs = lhs * left
        rhs = rhs * right
    return np.max(np.abs(lhs - rhs), axis=1)


@dataclass
class SearchReport:
    verdict: str
    model_exponent: int
    family_size: int
    candidate_triples: int = 0
    exact_checks: int = 0
    independent_found: int = 0
    violation: Optional[tuple[FiniteDistribution, FiniteDistribution, FiniteDistribution]] = None
    violation_source: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "n": self.model_exponent,
            "family_size": self.family_size,
            "candidate_triples": self.candidate_triples,
            "exact_checks": self.exact_checks,
            "independent_found": self.independent_found,
            "violation": None if self.violation is None else [mu.to_json() for mu in self.violation],
            "violation_source": self.violation_source,
        }


def _predicate(table: LawTable, verdict: str) -> np.ndarray:
    return table.degenerate if verdict == "DegenerateForced" else table.idempotent


def _confirm(report: SearchReport, laws, nf: NormalizedForms, n: int, source: str) -> bool:
    report.exact_checks += 1
    if independence_lifted(*laws, nf, n).independent:
        report.independent_found += 1
        report.violation = tuple(laws)  # type: ignore[assignment]
        report.violation_source = source
        return True
    return False


def _side_tables(table: LawTable, forms: FiniteForms, points: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Factor ``j`` of both sides of the characteristic-function equation for
    every member of ``table`` at every point: arrays of shape
    ``(members,) + points.shape[:-1]``."""
    mod = forms.group.order
    col = np.array([forms.matrix[r][j] for r in range(3)], dtype=np.int64)
    chars = table.chars
    left = chars[:, (points @ col) % mod]
    right = chars[:, (col[0] * points[..., 0]) % mod] * chars[:, (col[1] * points[..., 1]) % mod] \
        * chars[:, (col[2] * points[..., 2]) % mod]
    return left, right


def _residual_at(table: LawTable, rows: list[np.ndarray], forms: FiniteForms, points: np.ndarray) -> np.ndarray:
    """Max residual of triple ``i`` (``rows[j][i]`` index ``table``) over its own
    points ``points[i]``."""
    mod = forms.group.order
    lhs = rhs = 1
    for j in range(3):
        col = np.array([forms.matrix[r][j] for r in range(3)], dtype=np.int64)
        a = rows[j][:, None]
        chars = table.chars
        lhs = lhs * chars[a, (points @ col) % mod]
        rhs = rhs * chars[a, (col[0] * points[:, :, 0]) % mod] * chars[a, (col[1] * points[:, :, 1]) % mod] \
            * chars[a, (col[2] * points[:, :, 2]) % mod]
    return np.max(np.abs(lhs - rhs), axis=1)


@functools.lru_cache(maxsize=256)
def _family_blocks(group: CyclicGroup, verdict: str, allowed: tuple[int, int, int]):
    """Level vectors worth screening with their member blocks and the mask
    of triples breaking the predicate."""
    family = family_table(group)
    pred = _predicate(family, verdict)
    levels = sorted({int(h) for h in family.levels})
    by_level = {h: np.flatnonzero(family.levels == h) for h in levels}
    out = []
    for key in itertools.product(levels, repeat=3):
        if any(h > c for h, c in zip(key, allowed)):
            continue
        a, b, c = (by_level[h] for h in key)
        viol = ~(pred[a][:, None, None] & pred[b][None, :, None] & pred[c][None, None, :])
        if viol.any():
            out.append((key, a, b, c, viol))
    return out


@dataclass
class _ScreenContext:
    forms: FiniteForms
    allowed: Optional[tuple[int, int, int]]  # None when nothing can be independent
    solver: TransposeSolver
    rng: np.random.Generator
    cap: int

    @classmethod
    def build(cls, nf: NormalizedForms, n: int, seed: int, cap: int) -> "_ScreenContext":
        forms = FiniteForms.from_normalized(nf, n)
        if forms.invertible_mod_p():
            allowed: Optional[tuple[int, int, int]] = (n, n, n)
        else:
            data = lift_data(nf, n)
            # past the kernel bound no lifted triple at all is independent
            allowed = tuple(int(c) for c in data.levels) if data.kernel_exponent <= n else None  # type: ignore[assignment]
        rng = np.random.default_rng([seed, nf.prime, n])
        return cls(forms, allowed, TransposeSolver(forms, rng), rng, cap)

    @property
    def quick(self) -> np.ndarray:
        return np.r_[0:4, self.cap : self.cap + 2]

    def finish(self, table: LawTable, rows: list[np.ndarray], points: np.ndarray) -> list[np.ndarray]:
        if not len(rows[0]):
            return rows
        alive = _residual_at(table, rows, self.forms, points) <= SCREEN_MARGIN
        return [r[alive] for r in rows]


def _family_survivors(ctx: _ScreenContext, verdict: str, report: SearchReport) -> list[np.ndarray]:
    group = ctx.forms.group
    family = family_table(group)
    empty = [np.zeros(0, dtype=np.int64)] * 3
    if ctx.allowed is None:
        return empty
    blocks = _family_blocks(group, verdict, ctx.allowed)
    if not blocks:
        return empty
    points = level_points(ctx.forms, ctx.solver, np.array([b[0] for b in blocks]), ctx.cap, ctx.rng)
    # (members, block, side, point) with side 0 = left, 1 = right
    sides = [np.stack(_side_tables(family, ctx.forms, points[:, ctx.quick], j), axis=2) for j in range(3)]
    found: list[list[np.ndarray]] = [[], [], [], []]
    for g, (_, a, b, c, viol) in enumerate(blocks):
        both = sides[0][a, g][:, None, None] * sides[1][b, g][None, :, None] * sides[2][c, g][None, None]
        diff = both[..., 0, :] - both[..., 1, :]
        keep = viol & ((diff.real**2 + diff.imag**2).max(axis=3) <= SCREEN_MARGIN**2)
        report.candidate_triples += int(viol.sum())
        i, k, l = np.nonzero(keep)
        for dst, src in zip(found, (a[i], b[k], c[l], np.full(len(i), g))):
            dst.append(src)
    rows = [np.concatenate(f) for f in found]
    return ctx.finish(family, rows[:3], points[rows[3]])


def family_survivors(nf: NormalizedForms, n: int, verdict: str, seed: int = 0, cap: int = 64) -> list[tuple[int, int, int]]:
    """Indices into :func:`family_table` of the triples breaking the
    verdict's predicate that pass the float screen."""
    ctx = _ScreenContext.build(nf, n, seed, cap)
    rows = _family_survivors(ctx, verdict, SearchReport(verdict, n, 0))
    return list(zip(*(r.tolist() for r in rows)))


def scan_for_counterexample(nf: NormalizedForms, n: int, verdict: str, budget: int = 500, seed: int = 0,
                            cap: int = 64) -> SearchReport:
    """Look for a triple that is independent for the lifted model while some
    member breaks the verdict's predicate (idempotent, or degenerate for
    ``DegenerateForced``).  Triples where every member satisfies the
    predicate are skipped.

    Each triple is screened on the :func:`level_points` block for the
    invariance levels of its members, a few points first and the whole block
    for survivors.  The float screen only rejects (margin ``1e-6``);
    survivors go to the exact lifted check.
    """
    group = CyclicGroup(nf.prime, n)
    family = family_table(group)
    report = SearchReport(verdict, n, len(family.laws))
    ctx = _ScreenContext.build(nf, n, seed, cap)
    if ctx.allowed is None:
        return report

    def confirm(table: LawTable, rows: list[np.ndarray], source: str) -> bool:
        for t in range(len(rows[0])):
            if _confirm(report, [table.laws[rows[j][t]] for j in range(3)], nf, n, source):
                return True
        return False

    if confirm(family, _family_survivors(ctx, verdict, report), "family"):
        return report

    if budget > 0:
        pool = random_pool(group, budget, seed)
        rows = [np.arange(j * budget, (j + 1) * budget) for j in range(3)]
        ok = np.ones(budget, dtype=bool)
        for j in range(3):
            ok &= pool.levels[rows[j]] <= ctx.allowed[j]
        pp = _predicate(pool, verdict)
        ok &= ~(pp[rows[0]] & pp[rows[1]] & pp[rows[2]])
        rows = [r[ok] for r in rows]
        report.candidate_triples += len(rows[0])
        if len(rows[0]):
            keys, block = np.unique(np.stack([pool.levels[r] for r in rows], axis=1), axis=0, return_inverse=True)
            points = level_points(ctx.forms, ctx.solver, keys, cap, ctx.rng)[block.reshape(-1)]
            alive = _residual_at(pool, rows, ctx.forms, points[:, ctx.quick]) <= SCREEN_MARGIN
            confirm(pool, ctx.finish(pool, [r[alive] for r in rows], points[alive]), "random")
    return report


def search_counterexample(nf: NormalizedForms, n: Optional[int] = None, budget: int = 500, seed: int = 0):
    """A triple refuting the forced verdict of ``nf``, or None."""
    from .classifier import Verdict, classify

    cls = classify(nf)
    if cls.verdict == Verdict.SINGULAR:
        raise SingularForms(f"det = 0 for {nf.describe()}")
    verdict = cls.verdict.value
    if cls.verdict == Verdict.COUNTEREXAMPLE:
        # a configuration with a counterexample: hunt for a non-idempotent one
        verdict = Verdict.IDEMPOTENT_FORCED.value
    if n is None:
        n = max(nf.k1, nf.k2, nf.l1, nf.l2) + 2
    return scan_for_counterexample(nf, n, verdict, budget, seed).violation
