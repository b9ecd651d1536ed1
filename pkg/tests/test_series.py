import cmath
import math
import random
from fractions import Fraction as F

import pytest

from qbil.errors import DivergentDomain, NoContraction, SpecError
from qbil.identities import vwp_phi
from qbil.numerics import BIG, DOUBLE, EXACT, Tower
from qbil.qfactorial import POLE, qpoch
from qbil.series import (
    BILATERAL,
    UNILATERAL,
    EvalOptions,
    SeriesSpec,
    VWPSpec,
    detect_termination,
    eval_phi,
    eval_psi,
    eval_vwp,
    evaluate,
    forward_part,
    partial_terms,
    reflect_bilateral,
    reverse_bilateral,
    spec_from_json,
    spec_to_json,
    tail_bound,
)

INF = math.inf


def inf(x, q):
    return qpoch(x, q, INF, DOUBLE)


def cd(rng, lo, hi):
    return cmath.rect(rng.uniform(lo, hi), rng.uniform(-math.pi, math.pi))


def direct_negative(upper, lower, q, z, n):
    """sum_{k=-n}^{-1} of the bilateral terms, stepping down with t_{k-1}/t_k.

    (a;q)_{k-1} = (a;q)_k/(1 - a q^{k-1}), so the ratio is a product of simple factors.
    """
    total, t = 0, 1
    for k in range(0, -n, -1):
        qk = q ** (k - 1)
        for b in lower:
            t *= 1 - b * qk
        for a in upper:
            t /= 1 - a * qk
        t /= z
        total += t
        if abs(t) < 1e-30 * abs(total):
            break
    return total


def test_terminating_example():
    spec = SeriesSpec(UNILATERAL, [F(4)], [], F(1, 2), F(1))
    res = eval_phi(spec, EvalOptions(EXACT))
    assert res.value == 3 and res.terms == 3
    dres = eval_phi(SeriesSpec(UNILATERAL, [4.0], [], 0.5, 1.0))
    assert dres.value == pytest.approx(3) and dres.terms == 3


def test_terminating_consumes_n_plus_one_terms():
    for n in range(8):
        spec = SeriesSpec(UNILATERAL, [F(3) ** n, F(2, 7)], [F(5, 9)], F(1, 3), F(1, 4))
        assert eval_phi(spec, EvalOptions(EXACT)).terms == n + 1


def test_zero_argument():
    assert eval_phi(SeriesSpec(UNILATERAL, [0.3, 0.2], [0.7], 0.5, 0.0)).value == 1


def test_q_binomial_oracle():
    a, q, z = 1 / 3, 0.5, 0.25
    val = eval_phi(SeriesSpec(UNILATERAL, [a], [], q, z)).value
    assert abs(val / (inf(a * z, q) / inf(z, q)) - 1) < 1e-14


def test_psi_with_lower_q_is_phi():
    a, q, z = 0.3 + 0.4j, 0.4, 0.6j
    psi = eval_psi(SeriesSpec(BILATERAL, [a], [q], q, z)).value
    phi = eval_phi(SeriesSpec(UNILATERAL, [a], [], q, z)).value
    assert abs(psi - phi) < 1e-14 * abs(phi)


def ramanujan_rhs(a, b, q, z):
    return (inf(q, q) * inf(b / a, q) * inf(a * z, q) * inf(q / (a * z), q)
            / (inf(b, q) * inf(q / a, q) * inf(z, q) * inf(b / (a * z), q)))


def test_ramanujan_example():
    # az = 1 here, so the product side vanishes and the check is absolute
    a, b, q, z = 2.0, 0.05, 0.1, 0.5
    val = eval_psi(SeriesSpec(BILATERAL, [a], [b], q, z)).value
    assert ramanujan_rhs(a, b, q, z) == 0 and abs(val) < 1e-12
    z = 0.35 + 0.2j
    val = eval_psi(SeriesSpec(BILATERAL, [a], [b], q, z)).value
    assert abs(val / ramanujan_rhs(a, b, q, z) - 1) < 1e-12


def test_outside_annulus_is_divergent():
    with pytest.raises(DivergentDomain):
        eval_psi(SeriesSpec(BILATERAL, [2.0], [0.05], 0.1, 0.01))
    with pytest.raises(DivergentDomain):
        eval_phi(SeriesSpec(UNILATERAL, [0.5], [], 0.5, 1.5))


def test_reverse_matches_direct_negative_sum():
    a, b, q, z = 2.0, 0.05, 0.1, 0.5
    spec = SeriesSpec(BILATERAL, [a], [b], q, z)
    pre, rev = reverse_bilateral(spec, DOUBLE)
    got = pre * eval_phi(rev).value
    want = direct_negative([a], [b], q, z, 40)
    assert abs(got - want) < 1e-14 * abs(want)


def test_reverse_with_lower_q_vanishes():
    pre, _ = reverse_bilateral(SeriesSpec(BILATERAL, [F(1, 3)], [F(1, 2)], F(1, 2), F(1, 5)), EXACT)
    assert pre == 0


def test_reflection_is_involution_by_value():
    rng = random.Random(3)
    for _ in range(5):
        q = cd(rng, 0.2, 0.5)
        a, b = cd(rng, 0.5, 2), cd(rng, 0.5, 2)
        z = cd(rng, 0.3, 0.9)
        if abs(b / a) > 0.9 * abs(z):
            continue
        spec = SeriesSpec(BILATERAL, [a], [b], q, z)
        twice = reflect_bilateral(reflect_bilateral(spec))
        pre1, r1 = reverse_bilateral(spec, DOUBLE)
        pre2, r2 = reverse_bilateral(twice, DOUBLE)
        v1, v2 = pre1 * eval_phi(r1).value, pre2 * eval_phi(r2).value
        assert abs(v1 - v2) < 1e-14 * max(abs(v1), 1e-300)


def test_psi_split_vs_two_sided_partial_sum():
    rng = random.Random(11)
    checked = 0
    while checked < 30:
        q = cd(rng, 0.2, 0.6)
        a = [cd(rng, 0.5, 2) for _ in range(2)]
        z = cd(rng, 0.3, 0.8)
        b = [cd(rng, 0.5, 2), None]
        b[1] = a[0] * a[1] * z * cd(rng, 0.1, 0.6) / b[0]
        spec = SeriesSpec(BILATERAL, a, b, q, z)
        try:
            val = eval_psi(spec).value
        except Exception:
            continue
        fwd = eval_phi(forward_part(spec), EvalOptions(DOUBLE, max_terms=400)).value
        back = direct_negative(a, b, q, z, 400)
        assert abs(val - (fwd + back)) <= 1e-12 * max(abs(val), 1e-300)
        checked += 1


def test_rogers_6phi5_example():
    # b, c, d are the reciprocals of 1/3, 1/5, 1/7 so that |aq/(bcd)| < 1
    a, b, c, d, q = F(1, 4), F(3), F(5), F(7), F(1, 2)
    spec = vwp_phi(a, [b, c, d], q, a * q / (b * c * d))
    conv = VWPSpec(DOUBLE.convert(spec.sigma), [DOUBLE.convert(x) for x in spec.upper],
                   [DOUBLE.convert(x) for x in spec.lower], DOUBLE.convert(q), DOUBLE.convert(spec.z))
    a, b, c, d, q = (complex(x) for x in (a, b, c, d, q))
    rhs = (inf(a * q, q) * inf(a * q / (b * c), q) * inf(a * q / (b * d), q) * inf(a * q / (c * d), q)
           / (inf(a * q / b, q) * inf(a * q / c, q) * inf(a * q / d, q) * inf(a * q / (b * c * d), q)))
    assert abs(eval_vwp(conv).value / rhs - 1) < 1e-13


def test_vwp_first_term_is_one():
    spec = VWPSpec(F(1, 4), [F(1, 4), F(1, 3)], [F(3, 8)], F(1, 2), F(1, 9))
    assert partial_terms(spec, 0, EXACT) == [1]


def test_vwp_matches_expanded_pairs():
    rng = random.Random(2)
    for _ in range(30):
        q = cd(rng, 0.2, 0.6)
        sig = cd(rng, 0.3, 2)
        params = [cd(rng, 0.5, 2) for _ in range(3)]
        z = sig * q / (params[0] * params[1] * params[2])
        if abs(z) > 0.8:
            z = z / abs(z) * 0.5
        upper = [sig] + params
        lower = [sig * q / p for p in params]
        spec = VWPSpec(sig, upper, lower, q, z)
        root = cmath.sqrt(sig)
        v1 = eval_vwp(spec).value
        v2 = eval_phi(spec.expanded(root)).value
        assert abs(v1 - v2) <= 1e-12 * max(abs(v1), 1)


def test_termination_detection():
    q = F(1, 3)
    assert detect_termination(SeriesSpec(UNILATERAL, [q**-3, F(1, 2)], [F(2, 5)], q, F(1, 2)), EXACT).above == 3
    t = detect_termination(SeriesSpec(BILATERAL, [F(2, 3)], [q], q, F(1, 2)), EXACT)
    assert t.below == 0 and t.above is None
    assert detect_termination(SeriesSpec(BILATERAL, [0.31 + 0.2j], [0.77j], 0.4, 0.6), DOUBLE).none


def test_tail_bound_majorant():
    spec = forward_part(SeriesSpec(BILATERAL, [2.0], [0.05], 0.1, 0.3))
    cert = tail_bound(spec, 12, EvalOptions(DOUBLE))
    assert cert.rho <= 2 * 0.3
    assert cert.bound <= cert.last_term * 2 * 0.3 / (1 - 2 * 0.3)


def test_exact_certificate_reaches_target():
    spec = forward_part(SeriesSpec(BILATERAL, [F(2)], [F(1, 25)], F(1, 5), F(1, 2)))
    K = 1
    while True:
        try:
            cert = tail_bound(spec, K, EvalOptions(EXACT))
            if cert.bound <= F(1, 10**30):
                break
        except NoContraction:
            pass
        K += 1
    assert K < 200 and isinstance(cert.bound, F)


def test_no_contraction_outside_disc():
    with pytest.raises(NoContraction):
        tail_bound(SeriesSpec(UNILATERAL, [F(1, 3)], [], F(1, 2), F(1)), 30, EvalOptions(EXACT))


def test_certified_tails_hold():
    rng = random.Random(8)
    for _ in range(10):
        q = F(rng.randint(1, 4), 9)
        a, b = F(rng.randint(1, 9), rng.randint(1, 9)), F(rng.randint(1, 8), 9)
        z = F(rng.randint(1, 6), 9)
        spec = SeriesSpec(UNILATERAL, [a, q], [b], q, z)
        K = 6
        while True:
            try:
                cert = tail_bound(spec, K, EvalOptions(EXACT))
                break
            except NoContraction:
                K += 6
        terms = partial_terms(spec, K + 300, EXACT)
        far = sum(abs(t) for t in terms[K + 1:])
        assert far <= cert.bound


def test_stopping_rule_stable_under_precision():
    spec_json = {"kind": BILATERAL, "upper": ["3/2", [0.4, 0.9]], "lower": ["1/9", [0.3, -0.2]],
                 "q": [0.35, 0.2], "z": [0.5, 0.3]}
    vals = []
    for tw in (Tower.parse("big(30)"), Tower.parse("big(60)")):
        spec = spec_from_json(spec_json, tw)
        with tw.context():
            vals.append(complex(evaluate(spec, EvalOptions(tw)).value))
    assert abs(vals[0] - vals[1]) < 10 * 10.0 ** -27 * abs(vals[1])


def test_json_round_trip_and_errors():
    spec = SeriesSpec(UNILATERAL, [F(4)], [F(1, 3)], F(1, 2), F(1))
    obj = spec_to_json(spec)
    assert obj == {"kind": "unilateral", "upper": ["4/1"], "lower": ["1/3"], "q": "1/2", "z": "1/1"}
    assert spec_from_json(obj, EXACT) == spec
    with pytest.raises(SpecError, match="z"):
        spec_from_json({k: v for k, v in obj.items() if k != "z"}, EXACT)
    with pytest.raises(SpecError, match=r"upper\[0\]"):
        spec_from_json({**obj, "upper": ["x/y"]}, EXACT)
    big = spec_from_json(obj, BIG)
    with BIG.context():
        assert abs(evaluate(big).value - 3 * evaluate(spec_from_json(obj, BIG)).value / 3) == 0
