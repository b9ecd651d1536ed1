import math
import random
from fractions import Fraction as F

import pytest

from qbil.errors import ExactInfiniteProduct, IndeterminateProduct
from qbil.numerics import BIG, DOUBLE, EXACT
from qbil.qfactorial import (
    POLE,
    ext_mul,
    paired_infinite,
    paired_infinite_sq,
    qpoch,
    qpoch_infinite,
    qpoch_multi,
    qpoch_negate,
    qpoch_split,
    reciprocal,
)


def test_empty_product():
    assert qpoch(F(7, 3), F(1, 2), 0) == 1
    assert qpoch(0.3 + 0.1j, 0.5, 0) == 1


def test_finite_and_negative_examples():
    assert qpoch(F(1, 3), F(1, 2), 2) == F(5, 9)
    assert qpoch(F(1, 3), F(1, 2), -1) == 3
    q = F(2, 7)
    assert qpoch(q, q, -1) is POLE


def test_multi():
    assert qpoch_multi([], F(1, 2), 3, EXACT) == 1
    assert qpoch_multi([F(1, 3), F(1, 3)], F(1, 2), 2) == F(25, 81)
    assert qpoch_multi([F(1, 3)], F(1, 3), -2) is POLE


def test_pole_algebra():
    assert reciprocal(POLE, EXACT) == 0
    assert reciprocal(F(0)) is POLE
    assert reciprocal(F(4)) == F(1, 4)
    assert ext_mul(POLE, F(3)) is POLE
    with pytest.raises(IndeterminateProduct):
        ext_mul(POLE, F(0))


def test_split_examples():
    lhs, rhs = qpoch_split(F(1, 3), F(1, 2), 1, 1)
    assert lhs == rhs == F(5, 9)
    for m in range(4):
        lhs, rhs = qpoch_split(F(3, 5), F(1, 4), 0, m)
        assert lhs == rhs == qpoch(F(3, 5), F(1, 4), m)
    with pytest.raises(IndeterminateProduct):
        qpoch_split(F(1, 3), F(1, 3), -1, 1)


def test_negate_examples():
    assert qpoch_negate(F(1, 3), F(1, 2), 1) == 3
    assert qpoch_negate(F(2), F(1, 2), 2) == F(1, 21)
    for q in (F(1, 3), F(2, 9)):
        assert qpoch_negate(q * q, q, 1) == 1 / (1 - q)


def test_negative_index_law_random():
    rng = random.Random(5)
    for _ in range(40):
        a = F(rng.randint(-9, 9), rng.randint(1, 9))
        q = F(rng.randint(1, 8), 9)
        for n in range(7):
            try:
                expect = qpoch_negate(a, q, n)
            except Exception:
                assert qpoch(a, q, -n) is POLE
                continue
            assert qpoch(a, q, -n) == expect


def test_infinite_product_value():
    v = paired_infinite_sq(0.25, 0.5, DOUBLE)
    assert abs(v - 0.688537537) < 1e-9
    assert paired_infinite(0, 0.5, DOUBLE) == 1


def test_paired_vs_two_products():
    for x, q in ((0.3 + 0.2j, 0.6), (1.7, 0.4 - 0.2j), (-0.9j, 0.8)):
        a = qpoch(x, q, math.inf, DOUBLE) * qpoch(-x, q, math.inf, DOUBLE)
        assert abs(paired_infinite(x, q, DOUBLE) - a) <= 1e-14 * abs(a)


def test_infinite_product_remainder_bound():
    with BIG.context():
        ref = qpoch_infinite(BIG.convert("1/3"), BIG.convert("1/2"), BIG, 1e-60).value
    for tol in (1e-6, 1e-10, 1e-15):
        p = qpoch_infinite(1 / 3 + 0j, 0.5 + 0j, DOUBLE, tol)
        assert abs(p.value / complex(ref) - 1) <= p.rel_bound + 1e-15


def test_infinite_product_not_exact():
    with pytest.raises(ExactInfiniteProduct):
        qpoch(F(1, 2), F(1, 2), math.inf, EXACT)


def test_big_product_matches_mpmath():
    import mpmath

    with BIG.context():
        a, q = BIG.convert("2/7"), BIG.convert("3/5")
        ours = qpoch(a, q, math.inf, BIG)
        ref = mpmath.qp(mpmath.mpf(2) / 7, mpmath.mpf(3) / 5)
        assert abs(ours - ref) < mpmath.mpf(10) ** -48
