import io
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catalan_sat.combinatorics import b_exact, catalan
from catalan_sat.patterns import st_count_exact
from catalan_sat.series import (
    TruncSeries,
    dc_counts,
    marked_gf,
    pattern_gf_check,
    series_arith,
    series_power,
    tree_structure_gf,
    write_series_csv,
)

from conftest import pointed_counts


def binomial_series(c, a, order):
    """Coefficients of (1 + c z)^a by the generalized binomial theorem."""
    out, term = [], Fraction(1)
    for j in range(order + 1):
        out.append(term * Fraction(c) ** j)
        term = term * (Fraction(a) - j) / (j + 1)
    return out


def test_arith_examples():
    a = TruncSeries([1, 1, 0])
    b = TruncSeries([1, -1, 0])
    assert series_arith(a, b, "mul").coefficients == (1, 0, -1)
    z = TruncSeries([0, 1])
    assert series_arith(z, z, "mul").coefficients == (0, 0)
    i4 = tree_structure_gf(4)
    assert series_arith(i4, i4, "mul")[2] == 1
    with pytest.raises(ValueError):
        series_arith(a, TruncSeries([1, 2]), "add")


def test_power_examples():
    assert series_power(TruncSeries([1, -8, 0, 0]), Fraction(1, 2)).coefficients == (1, -4, -8, -32)
    assert series_power(TruncSeries([1, -4, 0]), Fraction(-3, 2)).coefficients == (1, 6, 30)
    a = TruncSeries([3, 1, 4, 1])
    assert series_power(a, 1) == a
    with pytest.raises(ValueError):
        series_power(TruncSeries([0, 1, 0]), -1)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=5), min_size=1, max_size=6),
    st.sampled_from([Fraction(1, 2), Fraction(-3, 2), Fraction(1, 3), Fraction(-1)]),
)
def test_power_round_trip(tail, r):
    a = TruncSeries([1] + tail)
    assert series_power(series_power(a, r), 1 / r) == a


@pytest.mark.parametrize("c,a", [(-8, Fraction(1, 2)), (-4, Fraction(-3, 2)), (2, Fraction(-7, 2))])
def test_power_matches_binomial(c, a):
    order = 12
    got = series_power(TruncSeries([1, c] + [0] * (order - 1)), a)
    assert list(got.coefficients) == binomial_series(c, a, order)


def test_tree_structure_gf():
    order = 200
    s = tree_structure_gf(order)
    assert s[1] == 1 and s[3] == 8 and s[4] == 40
    assert all(s[n] == 2 ** (n - 1) * catalan(n) for n in range(1, order + 1))
    z = TruncSeries.monomial(1, order)
    assert s == z + 2 * (s * s)


def test_marked_examples():
    assert marked_gf(10, 2)[2] == 1
    for marks in (2, 3, 4):
        s = marked_gf(8, marks)
        assert all(s[n] == pointed_counts(n, marks) for n in range(1, 7))


def test_marked_ratio_grows():
    i = tree_structure_gf(200)
    it = marked_gf(200, 2)
    ratios = [float(it[n] / i[n]) for n in range(10, 201, 10)]
    assert all(a < b for a, b in zip(ratios, ratios[1:]))


def test_dc_examples():
    dc, dc3, dc4 = dc_counts(2, 2)
    assert dc == 1 and dc3 == 0 and dc4 == 0
    dc, dc3, dc4 = dc_counts(4, 4)
    assert dc - dc3 - dc4 <= st_count_exact(4, 4) <= dc
    with pytest.raises(ValueError):
        dc_counts(1, 1)


def test_dc_definition():
    i = tree_structure_gf(12)
    for n, k in ((5, 3), (9, 9), (12, 4)):
        dc, dc3, dc4 = dc_counts(n, k)
        assert dc == 2 ** (n - 1) * marked_gf(12, 2)[n] * b_exact(n - 1, k)
        assert dc3 == 3 * 2 ** (n - 2) * b_exact(n - 2, k) * marked_gf(12, 3)[n]
        assert dc4 == 6 * 2 ** (n - 2) * b_exact(n - 2, k) * marked_gf(12, 4)[n]
    assert i[1] == 1


def test_pattern_gf_check():
    assert pattern_gf_check([(0.0, 0.0), (1 / 8, 1 / 4), (0.1, 0.2)])
    with pytest.raises(ValueError):
        pattern_gf_check([(1.0, 0.9)])


def test_series_csv():
    buf = io.StringIO()
    write_series_csv(tree_structure_gf(4), buf)
    assert buf.getvalue().splitlines() == ["n,numerator,denominator", "0,0,1", "1,1,1", "2,2,1", "3,8,1", "4,40,1"]


def test_immutable():
    s = tree_structure_gf(5)
    with pytest.raises(AttributeError):
        s._c = ()
    assert math.isfinite(float(s[5]))
