"""Independence of three linear forms in p-adic random variables.

``padic`` is exact p-adic scalar arithmetic, ``forms`` reduces a coefficient
matrix to canonical shape, ``classifier`` decides what independence forces,
``finite`` models distributions on ``Z/p^n``, ``verifier`` tests independence
exactly, ``witness`` builds certified counterexamples and ``cli`` wires it
all together.
"""

from .classifier import Classification, Template, Verdict, WitnessRecipe, classify
from .finite import CyclicGroup, FiniteDistribution, Subgroup, char_fn, from_char
from .forms import NormalizedForms, RawForms, det_decompose, normalize, parse_matrix
from .padic import PAdicScalar, parse_literal
from .verifier import FiniteForms, IndependenceReport, functional_eq_check, independence_exact, independence_lifted, search_counterexample
from .witness import WitnessBundle, build_witness

__all__ = [
    "Classification", "CyclicGroup", "FiniteDistribution", "FiniteForms", "IndependenceReport",
    "NormalizedForms", "PAdicScalar", "RawForms", "Subgroup", "Template", "Verdict", "WitnessBundle",
    "WitnessRecipe", "build_witness", "char_fn", "classify", "det_decompose", "from_char",
    "functional_eq_check", "independence_exact", "independence_lifted", "normalize", "parse_literal",
    "parse_matrix", "search_counterexample",
]
