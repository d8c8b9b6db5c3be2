"""Decision tree deciding what independence of the three forms forces.

The verdict depends only on which canonical coefficients are units, on
their valuations and on the valuation ``q`` of the determinant.  Failing
configurations come with a :class:`WitnessRecipe` naming the construction
that produces a non-idempotent independent triple.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .forms import LAMBDA1, LAMBDA2, NormalizedForms, SingularForms, det_decompose


class Verdict(str, enum.Enum):
    IDEMPOTENT_FORCED = "IdempotentForced"
    DEGENERATE_FORCED = "DegenerateForced"
    COUNTEREXAMPLE = "CounterexampleExists"
    SINGULAR = "Singular"


class Template(str, enum.Enum):
    ONE_UNIT_DELTA1 = "OneUnitDelta1"
    DELTA_PAIR_UNITS = "DeltaPairUnits"
    DELTA1_EPS1_UNITS = "Delta1Eps1Units"
    LAMBDA2_DELTAS_NON_UNIT = "Lambda2DeltasNonUnit"
    LAMBDA2_EPS_NON_UNIT = "Lambda2EpsNonUnit"
    NON_UNIT_CASE_A = "B2CaseA"
    NON_UNIT_CASE_B = "B2CaseB"


class PreconditionViolation(ValueError):
    pass


# The four symmetries of L1 that keep its shape: exchanging the last two
# forms (row swap) and/or the last two variables (column swap).  Each acts
# on positions of (d1, d2, e1, e2).
SYMMETRIES: dict[tuple[bool, bool], tuple[int, int, int, int]] = {
    (False, False): (0, 1, 2, 3),
    (True, False): (2, 3, 0, 1),
    (False, True): (1, 0, 3, 2),
    (True, True): (3, 2, 1, 0),
}

POSITION_NAMES = ("delta1", "delta2", "eps1", "eps2")

# Valuation patterns (k1, l1, k2, l2) over levels k < l < m < n, up to the
# symmetries above.  Index i holds case i + 1.
CASE_PATTERNS = (
    "kkkk", "kkkl", "kkll", "klkl", "kllk", "kklm", "klkm", "klmk", "klll", "kllm",
    "klml", "kmll", "klmm", "kmlm", "kmml", "klmn", "klnm", "kmln", "kmnl", "knlm",
    "knml",
)
FORCED_CASES = frozenset({1, 2, 5, 8})
CASE_A_CASES = frozenset({3, 6})


@dataclass(frozen=True)
class WitnessRecipe:
    template: Template
    valuations: tuple[int, int, int, int, int]  # (k1, k2, l1, l2, k)
    units: tuple[bool, bool, bool, bool]  # unit flags for (d1, d2, e1, e2)
    row_swap: bool = False
    col_swap: bool = False
    valuation_case: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "template": self.template.value,
            "valuations": dict(zip(("k1", "k2", "l1", "l2", "k"), self.valuations)),
            "unit_positions": [n for n, u in zip(POSITION_NAMES, self.units) if u],
            "row_swap": self.row_swap,
            "col_swap": self.col_swap,
            "valuation_case": self.valuation_case,
        }


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    q: Optional[int]
    k: int
    shape: str
    recipe: Optional[WitnessRecipe] = None
    condition_trace: tuple[tuple[str, bool], ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "q": self.q,
            "k": self.k,
            "shape": self.shape,
            "trace": [[name, value] for name, value in self.condition_trace],
            "recipe": None if self.recipe is None else self.recipe.to_json(),
        }


def unit_flags(nf: NormalizedForms) -> tuple[bool, bool, bool, bool]:
    return tuple(x.is_unit for x in nf.coefficients)  # type: ignore[return-value]


def unit_grid_condition(nf: NormalizedForms) -> bool:
    """Every row and column of the canonical matrix holds at least two units."""
    m = nf.matrix
    rows_ok = all(sum(x.is_unit for x in row) >= 2 for row in m)
    cols_ok = all(sum(m[r][c].is_unit for r in range(3)) >= 2 for c in range(3))
    return rows_ok and cols_ok


def _apply(perm: tuple[int, ...], values: tuple) -> tuple:
    return tuple(values[i] for i in perm)


def _order_pattern(values: tuple[int, ...]) -> str:
    levels = sorted(set(values))
    return "".join("klmn"[levels.index(v)] for v in values)


def match_case(k1: int, l1: int, k2: int, l2: int) -> tuple[int, tuple[bool, bool]]:
    """Table case of ``(k1, l1, k2, l2)`` and a symmetry carrying it onto the
    table pattern.  Raises when no symmetry matches (cannot happen for four
    valuations whose minimum sits at ``k1`` after some symmetry)."""
    base = (k1, k2, l1, l2)
    for swaps, perm in SYMMETRIES.items():
        d1, d2, e1, e2 = _apply(perm, base)
        pattern = _order_pattern((d1, e1, d2, e2))
        if pattern in CASE_PATTERNS:
            return CASE_PATTERNS.index(pattern) + 1, swaps
    raise AssertionError(f"valuations {(k1, l1, k2, l2)} match no table pattern")


def valuation_case_index(nf: NormalizedForms) -> int:
    if nf.shape != LAMBDA1 or nf.k < 1:
        raise PreconditionViolation("the valuation table covers L1 with all coefficients non-units")
    return match_case(nf.k1, nf.l1, nf.k2, nf.l2)[0]


def _q_zero_template(nf: NormalizedForms, units: tuple[bool, ...]) -> WitnessRecipe:
    vals = (nf.k1, nf.k2, nf.l1, nf.l2, nf.k)
    if nf.shape == LAMBDA2:
        d1, d2, e1, e2 = units
        if not d1 and not d2:
            template = Template.LAMBDA2_DELTAS_NON_UNIT
        elif not e1 and not e2:
            template = Template.LAMBDA2_EPS_NON_UNIT
        elif not d2 and not e2:
            template = Template.DELTA1_EPS1_UNITS
        else:
            raise AssertionError(f"unit grid fails for {nf.describe()} but no template applies")
        return WitnessRecipe(template, vals, units)  # type: ignore[arg-type]

    for (row_swap, col_swap), perm in SYMMETRIES.items():
        d1, d2, e1, e2 = _apply(perm, units)
        if e2 or not d1:
            continue
        if not d2 and not e1:
            template = Template.ONE_UNIT_DELTA1
        elif d2 and not e1:
            template = Template.DELTA_PAIR_UNITS
        elif e1 and not d2:
            template = Template.DELTA1_EPS1_UNITS
        else:
            continue
        return WitnessRecipe(template, vals, units, row_swap, col_swap)  # type: ignore[arg-type]
    raise AssertionError(f"unit grid fails for {nf.describe()} but no template applies")


def classify(nf: NormalizedForms) -> Classification:
    trace: list[tuple[str, bool]] = []
    try:
        q = det_decompose(nf).q
    except SingularForms:
        trace.append(("nonsingular", False))
        return Classification(Verdict.SINGULAR, None, nf.k, nf.shape, None, tuple(trace))
    trace.append(("nonsingular", True))

    units = unit_flags(nf)
    k = nf.k

    def done(verdict: Verdict, recipe: Optional[WitnessRecipe] = None) -> Classification:
        return Classification(verdict, q, k, nf.shape, recipe, tuple(trace))

    trace.append(("q == 0", q == 0))
    if q == 0:
        grid = unit_grid_condition(nf)
        trace.append(("unit_grid", grid))
        if grid:
            return done(Verdict.IDEMPOTENT_FORCED)
        return done(Verdict.COUNTEREXAMPLE, _q_zero_template(nf, units))

    some_unit = any(units)
    trace.append(("some coefficient is a unit", some_unit))
    if some_unit:
        return done(Verdict.DEGENERATE_FORCED)

    if nf.shape != LAMBDA1:
        # det of L2 is -1 mod p when every coefficient is a non-unit
        raise AssertionError(f"L2 with all non-units reached q = {q} > 0")
    trace.append(("q > k", q > k))
    if q > k:
        return done(Verdict.DEGENERATE_FORCED)
    if q != k:
        raise AssertionError(f"q = {q} < k = {k} is impossible for L1")
    first = nf.k1 == nf.l2 == k
    second = nf.k2 == nf.l1 == k
    trace.append(("k1 == l2 == k", first))
    trace.append(("k2 == l1 == k", second))
    if first or second:
        return done(Verdict.IDEMPOTENT_FORCED)

    case, (row_swap, col_swap) = match_case(nf.k1, nf.l1, nf.k2, nf.l2)
    template = Template.NON_UNIT_CASE_A if case in CASE_A_CASES else Template.NON_UNIT_CASE_B
    recipe = WitnessRecipe(
        template, (nf.k1, nf.k2, nf.l1, nf.l2, k), units, row_swap, col_swap, case  # type: ignore[arg-type]
    )
    return done(Verdict.COUNTEREXAMPLE, recipe)
