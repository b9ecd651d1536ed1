from fractions import Fraction

import mpmath
import pytest

from qbil.errors import IllegalDemotion
from qbil.numerics import (
    BIG,
    DOUBLE,
    EXACT,
    Scalar,
    Tolerance,
    Tower,
    approx_eq,
    common_tower,
    encode_number,
    parse_number,
    promote,
)


def test_promote_rational_to_big_keeps_all_digits():
    x = promote(Scalar.of(Fraction(2, 3), EXACT), BIG)
    with BIG.context():
        assert abs(x.value - mpmath.mpf(2) / 3) < mpmath.mpf(10) ** -55
        assert mpmath.nstr(x.value.real, 50).startswith("0." + "6" * 40)


def test_promote_zero_to_double():
    x = promote(Scalar.of(Fraction(0), EXACT), DOUBLE)
    assert x.value == 0j and isinstance(x.value, complex)


def test_float_to_exact_is_refused():
    with pytest.raises(IllegalDemotion):
        promote(Scalar.of(1.5 + 0j, DOUBLE), EXACT)


def test_big_to_double_is_refused():
    with pytest.raises(IllegalDemotion):
        promote(Scalar.of("1/3", BIG), DOUBLE)


def test_mixed_precision_goes_to_larger():
    a = Scalar.of("1/3", Tower.parse("big(30)"))
    b = Scalar.of("1/7", Tower.parse("big(80)"))
    assert common_tower(a, b).prec == 80
    assert common_tower(Scalar.of(1, EXACT), Scalar.of(1, DOUBLE)) == DOUBLE


def test_approx_eq_within_tolerance():
    tol = Tolerance(1e-17, 1e-12, 1e-300)
    ok, res = approx_eq(Scalar.of(1.0, DOUBLE), Scalar.of(1.0 + 1e-14, DOUBLE), tol)
    assert ok and res == pytest.approx(1e-14, rel=0.05)


def test_approx_eq_exact_is_literal():
    ok, res = approx_eq(Scalar.of("5/9", EXACT), Scalar.of("5/9", EXACT), Tolerance(1e-17, 1e-12, 1e-30))
    assert ok and res == 0


def test_zero_floor_guards_division():
    ok, res = approx_eq(Scalar.of(0.0, DOUBLE), Scalar.of(1e-40, DOUBLE), Tolerance(1e-17, 1e-9, 1e-30))
    assert res <= 1e-10 and ok


def test_tolerance_validation():
    with pytest.raises(ValueError):
        Tolerance(1e-10, 1e-12, 1e-30)
    with pytest.raises(ValueError):
        Tolerance(0, 1e-12, 1e-30)


@pytest.mark.parametrize("name,label", [("double", "double"), ("exact", "exact"), ("big", "big(50)"),
                                        ("big(70)", "big(70)"), (" BIG(20) ", "big(20)")])
def test_tower_parse(name, label):
    assert Tower.parse(name).label == label


def test_number_text_round_trip():
    assert parse_number("3/4") == Fraction(3, 4)
    assert parse_number("1+2j") == 1 + 2j
    assert encode_number(Fraction(-3, 4)) == "-3/4"
    assert encode_number(2 - 0j) == [2.0, 0.0]
    assert EXACT.convert("7/3") == Fraction(7, 3)
    assert DOUBLE.convert([0.5, -1]) == 0.5 - 1j
