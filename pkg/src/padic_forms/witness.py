"""Explicit independent triples on ``Z/p^n`` with a non-idempotent member.

Every construction prescribes three characteristic functions, each either the
indicator of a torsion subgroup ``Y_(p^r) = {y : p^r y = 0}`` of the dual or
an inner function on ``Y_(p^r)`` extended by zero.  The inner function is the
transform of a fixed non-idempotent law on ``Z/p^r``.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .classifier import SYMMETRIES, Classification, Template, Verdict, WitnessRecipe, classify
from .finite import (
    CharFunction,
    CyclicGroup,
    FiniteDistribution,
    Subgroup,
    char_values,
    extend_by_zero,
    from_char,
    haar_on,
    is_idempotent,
    torsion,
    uniform,
)
from .forms import LAMBDA1, NormalizedForms
from .verifier import FiniteForms, IndependenceReport, independence_exact, independence_lifted


class WitnessError(ValueError):
    pass


class CertificationFailed(WitnessError):
    pass


class WrongVerdict(WitnessError):
    pass


class TrivialSubgroup(WitnessError):
    pass


class InnerKind(str, enum.Enum):
    NON_IDEMPOTENT_DEFAULT = "NonIdempotentDefault"
    FLAT_ON_SUBGROUP = "FlatOnSubgroup"


def default_inner_law(group: CyclicGroup) -> FiniteDistribution:
    """Half the mass at 0 and a quarter at each of +-1; on ``Z/2`` the two
    quarters coincide, which would be idempotent, so use (3/4, 1/4) there."""
    if group.order < 2:
        raise TrivialSubgroup("an inner function needs a nontrivial subgroup")
    probs = [Fraction(0)] * group.order
    if group.order == 2:
        probs[0], probs[1] = Fraction(3, 4), Fraction(1, 4)
    else:
        probs[0] = Fraction(1, 2)
        probs[1] += Fraction(1, 4)
        probs[-1] += Fraction(1, 4)
    return FiniteDistribution(group, tuple(probs))


def inner_law(order_exponent: int, p: int, flat_level: int = 0, base: Optional[FiniteDistribution] = None) -> FiniteDistribution:
    """Law on ``Z/p^r`` whose transform equals 1 on ``p^(r-j) Z/p^r`` (the
    ``p^j``-torsion), obtained by pushing a law on ``Z/p^(r-j)`` forward
    along ``x -> p^j x``."""
    r, j = order_exponent, flat_level
    small = CyclicGroup(p, r - j)
    if base is None:
        base = default_inner_law(small)
    elif base.group != small:
        raise WitnessError(f"inner law must live on Z/{small.order}, got Z/{base.group.order}")
    group = CyclicGroup(p, r)
    probs = [Fraction(0)] * group.order
    for x in base.support:
        probs[(p**j * x) % group.order] += base.probs[x]
    return FiniteDistribution(group, tuple(probs))


def build_inner_function(sub: Subgroup, kind: InnerKind = InnerKind.NON_IDEMPOTENT_DEFAULT, flat_level: int = 0,
                         base: Optional[FiniteDistribution] = None) -> CharFunction:
    """Characteristic function on ``sub`` (in its own coordinates)."""
    g = sub.as_group()
    if g.order == 1 and not (kind == InnerKind.FLAT_ON_SUBGROUP and flat_level == 0):
        if kind == InnerKind.NON_IDEMPOTENT_DEFAULT:
            raise TrivialSubgroup("an inner function needs a nontrivial subgroup")
    level = flat_level if kind == InnerKind.FLAT_ON_SUBGROUP else 0
    if level > g.exponent:
        raise WitnessError("flat level exceeds the subgroup")
    if level == g.exponent:
        return CharFunction.indicator(g, [True] * g.order)
    law = inner_law(g.exponent, g.prime, level, base)
    return CharFunction(g, char_values(law.as_float(), g))


# A component is ("haar", r): indicator of Y_(p^r); or ("inner", r, j): inner
# function on Y_(p^r) flat on Y_(p^j).
Component = tuple


def _templates(template: Template, vals: tuple[int, int, int, int], k: int) -> tuple[Component, Component, Component]:
    k1, k2, l1, l2 = vals
    if template in (Template.ONE_UNIT_DELTA1, Template.DELTA_PAIR_UNITS, Template.LAMBDA2_EPS_NON_UNIT):
        return ("inner", 1, 0), ("haar", 0), ("haar", 0)
    if template == Template.DELTA1_EPS1_UNITS:
        return ("haar", 1), ("haar", 1), ("inner", 1, 0)
    if template == Template.LAMBDA2_DELTAS_NON_UNIT:
        return ("haar", 0), ("inner", 1, 0), ("haar", 0)
    if template == Template.NON_UNIT_CASE_A:
        return ("haar", k + 1), ("haar", 1), ("inner", 1, 0)
    if template == Template.NON_UNIT_CASE_B:
        return ("inner", min(l1, l2), k), ("haar", 0), ("haar", 0)
    raise WitnessError(f"unknown template {template}")


def _materialize(comp: Component, group: CyclicGroup, base: Optional[FiniteDistribution]):
    """(characteristic function, exact law) for one component."""
    p, n = group.prime, group.exponent
    if comp[0] == "haar":
        r = comp[1]
        sub = torsion(group, r)
        f = CharFunction.indicator(group, [sub.contains(y) for y in range(group.order)])
        # the annihilator of the p^r-torsion is p^r Z/p^n
        return f, haar_on(Subgroup(group, r))
    _, r, j = comp
    sub = torsion(group, r)
    kind = InnerKind.FLAT_ON_SUBGROUP if j else InnerKind.NON_IDEMPOTENT_DEFAULT
    f0 = build_inner_function(sub, kind, j, base)
    f = extend_by_zero(f0, sub)
    law = inner_law(r, p, j, base)
    spread = Fraction(1, p ** (n - r))
    exact = FiniteDistribution(group, tuple(law.probs[x % law.group.order] * spread for x in range(group.order)))
    return f, exact


@dataclass(frozen=True)
class WitnessBundle:
    recipe: WitnessRecipe
    model_exponent: int
    distributions: tuple[FiniteDistribution, FiniteDistribution, FiniteDistribution]
    non_idempotent_index: int  # 1-based
    forms: FiniteForms
    report: IndependenceReport
    lifted_report: IndependenceReport

    def to_json(self) -> dict:
        return {
            "recipe": self.recipe.template.value,
            "recipe_detail": self.recipe.to_json(),
            "n": self.model_exponent,
            "matrix": [list(r) for r in self.forms.matrix],
            "distributions": [d.to_json() for d in self.distributions],
            "non_idempotent_index": self.non_idempotent_index,
            "report": self.report.to_json(),
            "lifted_report": self.lifted_report.to_json(),
        }


def default_model_exponent(nf: NormalizedForms) -> int:
    return max(nf.k1, nf.k2, nf.l1, nf.l2) + 2


@functools.lru_cache(maxsize=4096)
def _template_triple(p: int, n: int, template: Template, vals: tuple[int, int, int, int], k: int,
                     col_swap: bool, base_key: Optional[tuple] = None):
    group = CyclicGroup(p, n)
    base = None
    if base_key is not None:
        base = FiniteDistribution(CyclicGroup(p, base_key[0]), base_key[1])
    comps = _templates(template, vals, k)
    built = [_materialize(c, group, base) for c in comps]
    funcs = [b[0] for b in built]
    laws = [b[1] for b in built]
    for f, law in zip(funcs, laws):
        # the spectral route must reproduce the exact law
        recovered = from_char(f)
        err = max(abs(float(a) - float(b)) for a, b in zip(recovered.probs, law.probs))
        if err > 1e-9:
            raise CertificationFailed(f"inverse transform disagrees with the exact law by {err:.3g}")
    if col_swap:
        laws[1], laws[2] = laws[2], laws[1]
        funcs[1], funcs[2] = funcs[2], funcs[1]
    flags = tuple(is_idempotent(law) for law in laws)
    return tuple(laws), tuple(funcs), flags


def template_valuations(recipe: WitnessRecipe) -> tuple[int, int, int, int]:
    """Valuations ``(k1, k2, l1, l2)`` after the recipe's position swaps."""
    k1, k2, l1, l2, _ = recipe.valuations
    perm = SYMMETRIES[(recipe.row_swap, recipe.col_swap)]
    base = (k1, k2, l1, l2)
    return tuple(base[i] for i in perm)  # type: ignore[return-value]


def build_witness(recipe: WitnessRecipe, nf: NormalizedForms, n: Optional[int] = None,
                  inner: Optional[FiniteDistribution] = None, classification: Optional[Classification] = None) -> WitnessBundle:
    cls = classification if classification is not None else classify(nf)
    if cls.verdict != Verdict.COUNTEREXAMPLE or cls.recipe != recipe:
        raise WrongVerdict(f"recipe {recipe.template.value} does not match the classification {cls.verdict.value}")
    if recipe.template in (Template.NON_UNIT_CASE_A, Template.NON_UNIT_CASE_B) and cls.q == 0:
        raise WrongVerdict("all-non-unit templates need q > 0")
    n = default_model_exponent(nf) if n is None else n
    vals = template_valuations(recipe)
    base_key = None if inner is None else (inner.group.exponent, inner.probs)
    try:
        laws, _, flags = _template_triple(nf.prime, n, recipe.template, vals, recipe.valuations[4],
                                          recipe.col_swap, base_key)
    except (TrivialSubgroup, ValueError) as exc:
        raise CertificationFailed(f"construction failed: {exc}") from exc
    forms = FiniteForms.from_normalized(nf, n)
    report = independence_exact(*laws, forms)
    lifted = independence_lifted(*laws, nf, n, plain=report)
    if not report.independent or not lifted.independent:
        raise CertificationFailed(
            f"{recipe.template.value} triple is not independent for {nf.describe()} at n={n}: "
            f"finite={report.independent} lifted={lifted.independent} ({lifted.reason})"
        )
    if all(flags):
        raise CertificationFailed(f"{recipe.template.value} triple is idempotent for {nf.describe()} at n={n}")
    index = flags.index(False) + 1
    return WitnessBundle(recipe, n, laws, index, forms, report, lifted)


def forced_instance_examples(nf: NormalizedForms, n: Optional[int] = None) -> tuple[FiniteDistribution, ...]:
    """The standard independent idempotent triple for a forced-idempotent
    configuration: three uniform laws when ``q = 0``, otherwise Haar on
    ``p^k Z/p^n`` followed by two uniform laws."""
    cls = classify(nf)
    if cls.verdict != Verdict.IDEMPOTENT_FORCED:
        raise WrongVerdict(f"verdict is {cls.verdict.value}, not IdempotentForced")
    n = default_model_exponent(nf) if n is None else n
    group = CyclicGroup(nf.prime, n)
    if cls.q == 0:
        triple = (uniform(group), uniform(group), uniform(group))
    else:
        triple = (haar_on(Subgroup(group, nf.k)), uniform(group), uniform(group))
    forms = FiniteForms.from_normalized(nf, n)
    report = independence_exact(*triple, forms)
    if not report.independent or not independence_lifted(*triple, nf, n, plain=report).independent:
        raise CertificationFailed(f"standard idempotent triple is not independent for {nf.describe()}")
    return triple
