"""One test per acceptance criterion, each recording a PASS/FAIL line that
is printed in the terminal summary."""

import functools
import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from padic_forms.classifier import CASE_PATTERNS, FORCED_CASES, Verdict, classify, match_case
from padic_forms.cli import grid_instances
from padic_forms.finite import (
    CharFunction,
    CyclicGroup,
    FiniteDistribution,
    NotPositiveDefinite,
    Subgroup,
    annihilator,
    char_fn,
    extend_by_zero,
    from_char,
    haar_on,
    is_idempotent,
    lift,
    one_set,
    symmetrize,
    translate,
    uniform,
)
from padic_forms.forms import LAMBDA1, LAMBDA2, NormalizedForms, SingularForms, closed_form_det, cofactor_det, det_decompose, expand_det_by_valuations
from padic_forms.padic import PAdicScalar
from padic_forms.verifier import FiniteForms, functional_eq_check, independence_exact, scan_for_counterexample
from padic_forms.witness import CertificationFailed, build_witness, default_model_exponent

GRID_PRIMES = (2, 3)
GRID_VALUATION = 2


def record(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})")


@functools.lru_cache(maxsize=None)
def grid(p: int) -> tuple:
    return tuple((nf, classify(nf)) for nf in grid_instances(p, GRID_VALUATION))


def random_law(rng, group: CyclicGroup) -> FiniteDistribution:
    kind = rng.integers(4)
    if kind == 0:
        j = int(rng.integers(group.exponent + 1))
        return translate(haar_on(Subgroup(group, j)), int(rng.integers(group.order)))
    if kind == 1 and group.exponent > 1:
        small = CyclicGroup(group.prime, int(rng.integers(1, group.exponent)))
        return lift(random_law(rng, small), group.exponent - small.exponent)
    k = int(rng.integers(1, min(4, group.order) + 1))
    atoms = rng.choice(group.order, size=k, replace=False)
    weights = rng.integers(1, 65, size=k)
    probs = [Fraction(0)] * group.order
    for a, w in zip(atoms, weights):
        probs[int(a)] = Fraction(int(w), int(weights.sum()))
    return FiniteDistribution(group, tuple(probs))


def random_scalar(rng, p: int, min_val: int, max_val: int) -> PAdicScalar:
    u = int(rng.integers(1, 10 * p))
    while u % p == 0:
        u = int(rng.integers(1, 10 * p))
    sign = 1 if rng.integers(2) else -1
    return PAdicScalar(p, sign, int(rng.integers(min_val, max_val + 1)), Fraction(u))


def random_canonical(rng, shape: str, min_val: int = 0, max_val: int = 4) -> NormalizedForms:
    p = int(rng.choice([2, 3, 5, 7]))
    return NormalizedForms(p, shape, *(random_scalar(rng, p, min_val, max_val) for _ in range(4)))


def test_criterion_1_joint_law_matches_functional_equation():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    trials, disagreements, independent = 240, 0, 0
    for _ in range(trials):
        p = int(rng.choice([2, 3]))
        n = int(rng.integers(1, 3))
        g = CyclicGroup(p, n)
        if rng.integers(2):
            rows = [[1, 1, 1]] + rng.integers(0, g.order, size=(2, 3)).tolist()
        else:
            rows = rng.integers(0, g.order, size=(3, 3)).tolist()
        forms = FiniteForms.from_rows(p, n, rows)
        mus = [random_law(rng, g) for _ in range(3)]
        exact = independence_exact(*mus, forms).independent
        spectral = functional_eq_check(*(char_fn(mu) for mu in mus), forms).independent
        disagreements += exact != spectral
        independent += exact
    seconds = time.perf_counter() - start
    ok = disagreements == 0 and seconds < 60
    record(1, "joint law vs functional equation", ok,
           f"{trials} triples, {independent} independent, {disagreements} disagreements, {seconds:.1f}s")
    assert ok


def test_criterion_2_haar_triples():
    checked_uniform = checked_haar = 0
    failures = []
    for p in GRID_PRIMES:
        for nf, cls in grid(p):
            if cls.verdict == Verdict.SINGULAR:
                continue
            n = default_model_exponent(nf)
            g = CyclicGroup(p, n)
            forms = FiniteForms.from_normalized(nf, n)
            if cls.q == 0:
                # invertible over the p-adic integers
                u = uniform(g)
                checked_uniform += 1
                if not independence_exact(u, u, u, forms).independent:
                    failures.append(("uniform", nf.describe()))
            elif cls.verdict == Verdict.IDEMPOTENT_FORCED:
                triple = (haar_on(Subgroup(g, cls.k)), uniform(g), uniform(g))
                checked_haar += 1
                if not independence_exact(*triple, forms).independent:
                    failures.append(("haar", nf.describe()))
    ok = not failures
    record(2, "uniform triple on invertible forms, Haar triple on forced non-unit forms", ok,
           f"{checked_uniform} + {checked_haar} instances, {len(failures)} failures")
    assert ok, failures[:5]


def test_uniform_triple_fails_for_positive_q():
    # Lambda maps onto a proper subgroup of index p^q while every marginal
    # is uniform, so the joint law cannot factorise
    checked = 0
    for p in GRID_PRIMES:
        for i, (nf, cls) in enumerate(grid(p)):
            if cls.q is None or cls.q == 0 or (p == 3 and i % 25):
                continue
            n = default_model_exponent(nf)
            u = uniform(CyclicGroup(p, n))
            assert not independence_exact(u, u, u, FiniteForms.from_normalized(nf, n)).independent
            checked += 1
    assert checked > 1000


def test_criterion_3_witness_certification():
    start = time.perf_counter()
    certified, failures = 0, []
    for p in GRID_PRIMES:
        for nf, cls in grid(p):
            if cls.verdict != Verdict.COUNTEREXAMPLE:
                continue
            try:
                bundle = build_witness(cls.recipe, nf, classification=cls)
            except CertificationFailed as exc:
                failures.append(str(exc))
                continue
            flagged = bundle.distributions[bundle.non_idempotent_index - 1]
            if bundle.report.independent and bundle.report.method == "ExactJoint" and not is_idempotent(flagged):
                certified += 1
            else:
                failures.append(nf.describe())
    seconds = time.perf_counter() - start
    ok = not failures and seconds < 600
    record(3, "witness certification", ok, f"{certified} certified, {len(failures)} failed, {seconds:.0f}s")
    assert ok, failures[:5]


def test_criterion_4_forced_verdicts_have_no_counterexample():
    start = time.perf_counter()
    checked, violations, exact_checks = 0, [], 0
    for p in GRID_PRIMES:
        for nf, cls in grid(p):
            if cls.verdict not in (Verdict.IDEMPOTENT_FORCED, Verdict.DEGENERATE_FORCED):
                continue
            report = scan_for_counterexample(nf, default_model_exponent(nf), cls.verdict.value, budget=500)
            checked += 1
            exact_checks += report.exact_checks
            if report.violation is not None:
                violations.append(nf.describe())
    seconds = time.perf_counter() - start
    ok = not violations
    record(4, "forced verdicts: family and budget-500 search find nothing", ok,
           f"{checked} instances, {exact_checks} exact checks, {len(violations)} violations, {seconds:.0f}s")
    assert ok, violations[:5]


def test_criterion_5_determinant_identities():
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    failures = 0
    for _ in range(1000):
        nf = random_canonical(rng, LAMBDA1)
        m = [[x.to_fraction() for x in row] for row in nf.matrix]
        failures += expand_det_by_valuations(nf).to_fraction() != cofactor_det(m)
    for _ in range(1000):
        nf = random_canonical(rng, LAMBDA2)
        m = [[x.to_fraction() for x in row] for row in nf.matrix]
        try:
            failures += closed_form_det(nf).to_fraction() != cofactor_det(m)
        except ValueError:
            failures += cofactor_det(m) != 0
    for _ in range(1000):
        nf = random_canonical(rng, LAMBDA2, min_val=1)
        failures += det_decompose(nf).q != 0
    done = 0
    while done < 1000:
        nf = random_canonical(rng, LAMBDA1, min_val=1)
        try:
            q = det_decompose(nf).q
        except SingularForms:
            continue
        done += 1
        failures += q < nf.k
    seconds = time.perf_counter() - start
    ok = failures == 0 and seconds < 10
    record(5, "determinant identities", ok, f"4000 instances, {failures} failures, {seconds:.1f}s")
    assert ok


def test_criterion_6_lemma_level_properties():
    rng = np.random.default_rng(6)
    failures = {}

    # Haar transform is the annihilator indicator
    bad = 0
    for p, n in itertools.product((2, 3, 5), range(1, 5)):
        g = CyclicGroup(p, n)
        for j in range(n + 1):
            sub = Subgroup(g, j)
            ann = annihilator(sub)
            bad += char_fn(haar_on(sub)).indicator_exact != tuple(int(ann.contains(y)) for y in range(g.order))
    failures["haar"] = bad

    # the set where the transform is 1: subgroup, invariance, support
    bad = 0
    for _ in range(200):
        g = CyclicGroup(int(rng.choice([2, 3])), int(rng.integers(1, 4)))
        mu = random_law(rng, g)
        vals = char_fn(mu).values
        e = one_set(mu)
        members = {y for y in range(g.order) if abs(vals[y] - 1) < 1e-9}
        closed = all((a + b) % g.order in members and (-a) % g.order in members for a in members for b in members)
        same = members == {int(y) for y in e.elements()}
        invariant = all(abs(vals[(y + int(z)) % g.order] - vals[y]) < 1e-9 for y in range(g.order) for z in e.elements())
        supported = all(annihilator(e).contains(x) for x in mu.support)
        bad += not (closed and same and invariant and supported)
    failures["one-set"] = bad

    # extension by zero of a characteristic function stays positive definite
    bad = 0
    for _ in range(200):
        g = CyclicGroup(int(rng.choice([2, 3])), int(rng.integers(1, 5)))
        sub = Subgroup(g, int(rng.integers(0, g.exponent + 1)))
        inner = char_fn(random_law(rng, sub.as_group()))
        try:
            from_char(extend_by_zero(inner, sub))
        except NotPositiveDefinite:
            bad += 1
    failures["extension"] = bad

    # a unit minus a non-unit is a unit
    bad = 0
    for _ in range(1000):
        p = int(rng.choice([2, 3, 5, 7]))
        alpha = random_scalar(rng, p, 0, 0)
        beta = PAdicScalar.zero(p) if rng.integers(10) == 0 else random_scalar(rng, p, 1, 6)
        bad += (alpha - beta).valuation != 0
    failures["unit"] = bad

    # symmetrisation squares the modulus
    bad = 0
    for _ in range(200):
        g = CyclicGroup(int(rng.choice([2, 3, 5])), int(rng.integers(1, 4)))
        mu = random_law(rng, g)
        bad += not np.allclose(char_fn(symmetrize(mu)).values, np.abs(char_fn(mu).values) ** 2, atol=1e-9, rtol=0)
    failures["symmetrise"] = bad

    ok = not any(failures.values())
    record(6, "Haar, one-set, extension, unit-difference and symmetrisation laws", ok,
           ", ".join(f"{k} {v}" for k, v in failures.items()) + " failures")
    assert ok


def test_criterion_7_valuation_table_alignment():
    levels = dict(zip("klmn", (1, 2, 3, 4)))
    matched = set()
    for index, pattern in enumerate(CASE_PATTERNS, start=1):
        k1, l1, k2, l2 = (levels[c] for c in pattern)
        assert match_case(k1, l1, k2, l2)[0] == index
        k = min(k1, l1, k2, l2)
        if k1 == l2 == k or k2 == l1 == k:
            matched.add(index)
    ok = matched == set(FORCED_CASES) and len(CASE_PATTERNS) == 21
    record(7, "forced table rows", ok, f"rows {sorted(matched)} vs {sorted(FORCED_CASES)}")
    assert ok
