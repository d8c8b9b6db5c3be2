import itertools
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from padic_forms.finite import CyclicGroup, FiniteDistribution
from padic_forms.padic import PAdicScalar

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

primes = st.sampled_from([2, 3, 5])


def units_below(p: int, bound: int) -> list[int]:
    return [u for u in range(1, bound) if u % p]


@st.composite
def scalars(draw, p=None, min_val=-3, max_val=4, allow_zero=True):
    p = draw(primes) if p is None else p
    if allow_zero and draw(st.integers(0, 9)) == 0:
        return PAdicScalar.zero(p)
    num = draw(st.integers(1, 200).filter(lambda x: x % p))
    den = draw(st.integers(1, 30).filter(lambda x: x % p))
    v = draw(st.integers(min_val, max_val))
    sign = draw(st.sampled_from([1, -1]))
    return PAdicScalar(p, sign, v, Fraction(num, den))


@st.composite
def distributions(draw, group: CyclicGroup, max_atoms: int = 4, denominator: int = 64):
    """Exact rational law with a few atoms."""
    k = draw(st.integers(1, min(max_atoms, group.order)))
    atoms = draw(st.lists(st.integers(0, group.order - 1), min_size=k, max_size=k, unique=True))
    raw = draw(st.lists(st.integers(1, denominator), min_size=k, max_size=k))
    total = sum(raw)
    probs = [Fraction(0)] * group.order
    for a, r in zip(atoms, raw):
        probs[a] = Fraction(r, total)
    return FiniteDistribution(group, tuple(probs))


@st.composite
def small_groups(draw, primes=(2, 3), max_exponent=3):
    p = draw(st.sampled_from(primes))
    return CyclicGroup(p, draw(st.integers(1, max_exponent)))


def naive_joint(mus, rows, mod):
    """Joint law of the three forms and its marginals by enumeration."""
    joint, marg = {}, [{}, {}, {}]
    for xs in itertools.product(*[mu.support for mu in mus]):
        w = mus[0].probs[xs[0]] * mus[1].probs[xs[1]] * mus[2].probs[xs[2]]
        cell = tuple(sum(rows[r][j] * xs[j] for j in range(3)) % mod for r in range(3))
        joint[cell] = joint.get(cell, 0) + w
        for r in range(3):
            marg[r][cell[r]] = marg[r].get(cell[r], 0) + w
    return joint, marg


def naive_independent(mus, rows, mod) -> bool:
    joint, marg = naive_joint(mus, rows, mod)
    for a in marg[0]:
        for b in marg[1]:
            for c in marg[2]:
                if joint.get((a, b, c), 0) != marg[0][a] * marg[1][b] * marg[2][c]:
                    return False
    return True


def cell_fails(mus, rows, mod, cell) -> bool:
    joint, marg = naive_joint(mus, rows, mod)
    return joint.get(tuple(cell), 0) != marg[0].get(cell[0], 0) * marg[1].get(cell[1], 0) * marg[2].get(cell[2], 0)


@pytest.fixture
def z4():
    return CyclicGroup(2, 2)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
