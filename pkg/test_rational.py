from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import ParseError
from core.rational import (
    Enclosure,
    Verdict,
    decide_with_retry,
    enclosure_max,
    enclosure_min,
    exact_sqrt,
    fmt,
    less_than,
    log_ratio,
    parse_rational,
    real_power,
    sqrt_down,
    sqrt_up,
)

fractions = st.fractions(min_value=-1000, max_value=1000, max_denominator=1000)


@pytest.mark.parametrize(
    "text, expected",
    [("3", Fraction(3)), ("-3/4", Fraction(-3, 4)), (" 6/8 ", Fraction(3, 4)), (5, Fraction(5)), ("0.25", Fraction(1, 4))],
)
def test_parse_rational(text, expected):
    assert parse_rational(text) == expected


@pytest.mark.parametrize("bad", ["1/0", "", "abc", 0.5, True])
def test_parse_rational_rejects(bad):
    with pytest.raises(ParseError):
        parse_rational(bad)


def test_parse_error_carries_location():
    with pytest.raises(ParseError) as exc:
        parse_rational("1/0", "vec.txt:2:3")
    assert exc.value.location == "vec.txt:2:3"
    assert str(exc.value).startswith("vec.txt:2:3: ")


@given(fractions)
def test_fmt_is_canonical(q):
    assert parse_rational(fmt(q)) == q
    assert "." not in fmt(q)


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=0, max_value=10**6, max_denominator=10**4), st.integers(min_value=8, max_value=80))
def test_sqrt_bounds_bracket(q, bits):
    lo, hi = sqrt_down(q, bits), sqrt_up(q, bits)
    assert lo * lo <= q <= hi * hi
    assert hi - lo <= Fraction(1, 2**bits)


def test_exact_sqrt():
    assert exact_sqrt(Fraction(9, 4)) == Fraction(3, 2)
    assert exact_sqrt(Fraction(2)) is None
    assert Enclosure.sqrt(Fraction(25)) == Enclosure.exact(5)


def test_sqrt_enclosure_of_85_over_64():
    e = Enclosure.sqrt(Fraction(85, 64), bits=64)
    assert e.lo ** 2 <= Fraction(85, 64) <= e.hi ** 2
    assert e.width <= Fraction(1, 2**63)


def test_enclosure_rejects_inverted():
    with pytest.raises(ValueError):
        Enclosure(Fraction(2), Fraction(1))


def test_enclosure_arithmetic():
    a = Enclosure(Fraction(1), Fraction(2))
    assert a.scale(-2) == Enclosure(Fraction(-4), Fraction(-2))
    assert (a + a) == Enclosure(Fraction(2), Fraction(4))
    assert enclosure_max([a, Enclosure.exact(3)]) == Enclosure(Fraction(3), Fraction(3))
    assert enclosure_min([a, Enclosure.exact(3)]) == a
    assert a.to_dict()["width"] == "1"


def test_less_than_is_three_valued():
    e = Enclosure(Fraction(1, 10), Fraction(1, 5))
    assert less_than(e, Fraction(1, 4)) is Verdict.TRUE
    assert less_than(e, Fraction(1, 10)) is Verdict.FALSE
    assert less_than(e, Fraction(3, 20)) is Verdict.UNDECIDABLE


def test_log_ratio_exact_for_integer_logs():
    assert log_ratio(Fraction(16), Fraction(2)) == Enclosure.exact(4)
    assert log_ratio(Fraction(60), Fraction(60)) == Enclosure.exact(1)


def test_log_ratio_interval():
    e = log_ratio(Fraction(120), Fraction(60))
    # 60^1.169 < 120 < 60^1.17
    assert Fraction(1169, 1000) < e.lo <= e.hi < Fraction(1170, 1000)


def test_real_power_square_root_of_eight():
    e = real_power(Fraction(8), Enclosure.exact(Fraction(1, 2)))
    assert e.lo ** 2 <= 8 <= e.hi ** 2
    assert e.width < Fraction(1, 10**15)


def test_real_power_zero_base():
    assert real_power(Fraction(0), Enclosure.exact(2)) == Enclosure.exact(0)
    with pytest.raises(ValueError):
        real_power(Fraction(0), Enclosure.exact(0))


def test_decide_with_retry_resolves():
    verdict = decide_with_retry(lambda p: real_power(Fraction(2), Enclosure.exact(Fraction(1, 2)), p), Fraction(3, 2))
    assert verdict is Verdict.TRUE
