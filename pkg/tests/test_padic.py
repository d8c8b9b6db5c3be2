from fractions import Fraction

import pytest
import sympy
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import scalars
from padic_forms.padic import (
    INF,
    MalformedLiteral,
    NegativeValuation,
    NotAUnit,
    PAdicScalar,
    PrimeMismatch,
    WrongPrime,
    ZeroUnit,
    add,
    format_literal,
    invert_mod,
    is_prime,
    mul,
    neg,
    parse_literal,
    reduce_mod,
    valuation_of_int,
)


def lit(text, p):
    return parse_literal(text, p)


class TestParse:
    def test_zero(self):
        x = lit("0", 2)
        assert x.is_zero and x.valuation is INF

    def test_negative_integer(self):
        x = lit("-12", 2)
        # trial-division oracle: 12 = 2^2 * 3
        assert sympy.multiplicity(2, 12) == 2
        assert (x.sign, x.valuation, x.unit) == (-1, 2, 3)

    def test_power_literal(self):
        x = lit("3^1*2", 3)
        assert (x.sign, x.valuation, x.unit) == (1, 1, 2)

    def test_power_without_unit(self):
        assert lit("5^2", 5) == PAdicScalar.from_int(25, 5)

    def test_negative_exponent(self):
        x = lit("2^-1*3", 2)
        assert x.valuation == -1 and x.to_fraction() == Fraction(3, 2)

    @pytest.mark.parametrize("text", ["", "abc", "2^", "2^x", "1.5", " 3", "2^1*"])
    def test_malformed(self, text):
        with pytest.raises(MalformedLiteral):
            lit(text, 2)

    def test_wrong_base(self):
        with pytest.raises(WrongPrime):
            lit("3^1*2", 2)

    def test_zero_unit(self):
        with pytest.raises(ZeroUnit):
            lit("2^3*0", 2)

    def test_not_prime(self):
        with pytest.raises(ValueError):
            lit("1", 4)

    @given(scalars(min_val=-3, max_val=5))
    def test_format_round_trip(self, x):
        assume(x.is_zero or x.unit.denominator == 1)
        assert lit(format_literal(x), x.prime) == x


class TestArithmetic:
    def test_sum_of_twos(self):
        two = lit("2^1*1", 2)
        assert add(two, two) == lit("2^2*1", 2)

    def test_additive_identity_and_inverse(self):
        x = lit("3^2*5", 3)
        assert add(x, PAdicScalar.zero(3)) == x
        one = lit("3^0*1", 3)
        assert add(one, neg(one)).is_zero

    def test_product(self):
        assert mul(lit("2^1*1", 2), lit("2^1*3", 2)) == lit("2^2*3", 2)

    def test_identities(self):
        x = lit("-3^1*7", 3)
        assert mul(x, PAdicScalar.from_int(1, 3)) == x
        assert mul(x, PAdicScalar.zero(3)).is_zero

    def test_prime_mismatch(self):
        with pytest.raises(PrimeMismatch):
            add(lit("1", 2), lit("1", 3))

    @given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6), st.sampled_from([2, 3, 5, 7]))
    def test_matches_integer_arithmetic(self, a, b, p):
        x, y = PAdicScalar.from_int(a, p), PAdicScalar.from_int(b, p)
        assert (x + y).to_fraction() == a + b
        assert (x * y).to_fraction() == a * b
        assert (x - y).to_fraction() == a - b

    @given(st.integers(1, 10**9), st.sampled_from([2, 3, 5, 7, 11]))
    def test_valuation_matches_sympy(self, m, p):
        assert valuation_of_int(m, p) == sympy.multiplicity(p, m)

    def test_is_prime(self):
        assert [n for n in range(30) if is_prime(n)] == list(sympy.primerange(0, 30))


@st.composite
def same_prime_pair(draw, count=2):
    p = draw(st.sampled_from([2, 3, 5]))
    return tuple(draw(scalars(p=p)) for _ in range(count))


class TestProperties:
    @given(same_prime_pair())
    def test_ultrametric(self, pair):
        x, y = pair
        s = add(x, y)
        if x.is_zero or y.is_zero:
            return
        if s.is_zero:
            assert x.valuation == y.valuation
            return
        assert s.valuation >= min(x.valuation, y.valuation)
        if x.valuation != y.valuation:
            assert s.valuation == min(x.valuation, y.valuation)

    @given(same_prime_pair(3))
    def test_ring_axioms(self, triple):
        x, y, z = triple
        assert add(add(x, y), z) == add(x, add(y, z))
        assert mul(mul(x, y), z) == mul(x, mul(y, z))
        assert add(x, y) == add(y, x)
        assert mul(x, y) == mul(y, x)
        assert mul(x, add(y, z)) == add(mul(x, y), mul(x, z))

    @given(same_prime_pair())
    def test_valuation_is_additive(self, pair):
        x, y = pair
        prod = mul(x, y)
        if x.is_zero or y.is_zero:
            assert prod.is_zero
        else:
            assert prod.valuation == x.valuation + y.valuation

    @given(st.data())
    def test_unit_minus_non_unit_is_unit(self, data):
        p = data.draw(st.sampled_from([2, 3, 5]))
        alpha = data.draw(scalars(p=p, min_val=0, max_val=0, allow_zero=False))
        beta = data.draw(scalars(p=p, min_val=1, max_val=6))
        assert add(alpha, neg(beta)).valuation == 0

    @given(st.data())
    def test_invert_mod_round_trip(self, data):
        p = data.draw(st.sampled_from([2, 3, 5]))
        n = data.draw(st.integers(1, 6))
        x = data.draw(scalars(p=p, min_val=0, max_val=0, allow_zero=False))
        assert reduce_mod(x, n) * invert_mod(x, n) % p**n == 1


class TestModular:
    def test_invert_examples(self):
        assert invert_mod(PAdicScalar.from_int(3, 2), 4) == 11
        assert pow(3, -1, 16) == 11  # extended-Euclid oracle
        assert invert_mod(PAdicScalar.from_int(1, 3), 2) == 1

    def test_invert_non_unit(self):
        with pytest.raises(NotAUnit):
            invert_mod(PAdicScalar.from_int(2, 2), 3)

    def test_reduce_examples(self):
        assert reduce_mod(lit("2^1*3", 2), 3) == 6
        assert reduce_mod(lit("-1", 2), 3) == 7
        assert reduce_mod(lit("3^2*2", 3), 2) == 0

    def test_reduce_rational_unit(self):
        # 1/3 mod 8 is 3 (3 * 3 = 9)
        assert reduce_mod(PAdicScalar.from_fraction(Fraction(1, 3), 2), 3) == 3

    def test_reduce_negative_valuation(self):
        with pytest.raises(NegativeValuation):
            reduce_mod(lit("2^-1", 2), 3)
