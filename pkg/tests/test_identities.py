import random
from fractions import Fraction as F

import pytest

from qbil.errors import SymbolMissing, UnknownMap
from qbil.identities import (
    Bind,
    IdemGroup,
    Point,
    catalog,
    constraints_check,
    expand_idem,
    full_point,
    get,
    poisedness,
    sample_point,
    side_value,
    specialize,
    specializations,
)
from qbil.numerics import BIG, DOUBLE, EXACT, relative_residual
from qbil.series import UNILATERAL, EvalOptions, SeriesSpec, VWPSpec
from qbil.terms import ShiftedSum
from qbil.verify import check_identity, check_specialization, compare_identities

ALL_IDS = sorted(d.id for d in catalog())


def test_catalog_contents():
    assert len(ALL_IDS) >= 27
    d = get("bailey_6psi6")
    assert "|a^2 q/(bcde)|<1" in [c.text for c in d.domain]
    assert len(set(ALL_IDS)) == len(ALL_IDS)


def test_slater_vwp_r3_is_6psi6_to_6phi5():
    d = get("slater_vwp_2r")
    pt = sample_point(d, 1, DOUBLE, shape={"r": 3})
    (lt,) = d.lhs_terms(pt)
    rts = d.rhs_terms(pt)
    assert isinstance(lt.series, VWPSpec) and lt.series.kind == "bilateral" and lt.series.r == 6
    assert len(rts) == 1 and rts[0].series.kind == UNILATERAL and rts[0].series.r == 6


def test_poisedness_flags():
    d = get("rogers_6phi5")
    pt = sample_point(d, 3, EXACT if d.exact_sampler else DOUBLE)
    (lt,) = d.lhs_terms(pt)
    assert poisedness(lt.series)["very_well_poised"]
    s = lt.series
    shuffled = VWPSpec(s.sigma, s.upper, tuple(reversed(s.lower)), s.q, s.z)
    assert not poisedness(shuffled)["well_poised"]
    q = F(1, 3)
    ps = get("pfaff_saalschutz")
    pt = full_point(ps, {"q": q, "a": F(2), "b": F(3), "c": F(7)}, {"n": 4}, EXACT)
    (lt,) = ps.lhs_terms(pt)
    assert poisedness(lt.series, EXACT)["balanced"]
    plain = SeriesSpec(UNILATERAL, [F(1, 5), F(1, 3), -F(1, 3)], [F(5, 3), F(2)], F(1, 3), F(1, 2))
    assert not poisedness(plain, EXACT)["very_well_poised"]


def test_expand_idem_examples():
    def template(p):
        return (p["b"], p["c"]) if "d" not in p else (p["b"], p["c"], p["d"])

    assert expand_idem(template, IdemGroup("b", ("c",)), {"b": 1, "c": 2}) == [(1, 2), (2, 1)]
    three = expand_idem(template, IdemGroup("b", ("c", "d")), {"b": 1, "c": 2, "d": 3})
    assert three == [(1, 2, 3), (2, 1, 3), (3, 2, 1)]
    once = expand_idem(lambda p: dict(p), IdemGroup("b", ("c",)), {"b": 1, "c": 2})[1]
    assert expand_idem(lambda p: dict(p), IdemGroup("b", ("c",)), once)[1] == {"b": 1, "c": 2}
    with pytest.raises(SymbolMissing):
        expand_idem(template, IdemGroup("b", ("x",)), {"b": 1})


def test_equality_constraint_is_named():
    d = get("bailey_8phi7_nt")
    vals = {"q": 0.4, "a": 0.5, "b": 1.5, "c": 1.7, "d": 1.3, "e": 1.9, "f": 0.9}
    rep = constraints_check(d, full_point(d, vals, None, DOUBLE), DOUBLE)
    assert not rep.ok and [i["constraint"] for i in rep.failed()] == ["a^2 q = bcdef"]


def test_termination_waives_domain():
    # e = q^-3 stops the series above and b = a stops it below (lower parameter aq/b = q)
    d = get("bailey_6psi6")
    q = F(1, 3)
    vals = {"q": q, "a": F(1, 2), "b": F(1, 2), "c": F(1, 20), "d": F(1, 20), "e": q**-3}
    rep = constraints_check(d, full_point(d, vals, None, EXACT), EXACT)
    assert rep.ok and rep.via_termination and not rep.items[0]["ok"]
    rep = check_identity(d, full_point(d, vals, None, DOUBLE), EvalOptions(DOUBLE))
    assert rep.status == "PASS", rep.message


def test_one_sided_termination_does_not_waive():
    d = get("bailey_6psi6")
    q = F(1, 3)
    vals = {"q": q, "a": F(1, 2), "b": F(1, 7), "c": F(1, 5), "d": F(1, 11), "e": q**-3}
    assert not constraints_check(d, full_point(d, vals, None, EXACT), EXACT).ok


def test_chu_empty_shape_condition():
    d = get("chu_2s_tf")
    q = 0.5
    base = {"q": q, "a": 2.0, "b": 1.0, "c": 0.5, "d": 0.5}
    shape = {"s": 0, "m": (), "N": 0}
    ok = constraints_check(d, full_point(d, base, shape, DOUBLE), DOUBLE)
    assert ok.ok  # |q/a| = 1/4 < 1 < |bq/cd| = 2
    bad = constraints_check(d, full_point(d, {**base, "b": 0.4}, shape, DOUBLE), DOUBLE)
    assert [i["constraint"] for i in bad.failed()] == ["|q^N|<|b q^(|m|+1)/(cd)|"]


def test_ramanujan_example_point():
    d = get("ramanujan_1psi1")
    pt = full_point(d, {"q": 0.1, "a": 2.0, "b": 0.05, "z": 0.5}, None, DOUBLE)
    lv, _ = side_value(d, pt, EvalOptions(DOUBLE), "lhs")
    rv, _ = side_value(d, pt, EvalOptions(DOUBLE), "rhs")
    assert abs(lv - rv) < 1e-12


def test_6psi6_e_equals_a_is_rogers():
    for k in range(3):
        agr = check_specialization("bailey_6psi6", "e=a", 5, k, EvalOptions(DOUBLE))
        assert agr.lhs < 1e-12 and agr.rhs < 1e-12


def test_ul2_rhs_is_a_product():
    d = get("ckm_2psi2_ul2")
    pt = sample_point(d, 4, DOUBLE)
    assert all(t.series is None for t in d.rhs_terms(pt))


@pytest.mark.parametrize("source,name,target", [
    ("ramanujan_1psi1", "b=q", "q_binomial"),
    ("slater_rpsir_general", "c=a", "slater_rpsir"),
    ("ckm_km3", "f=d,e=a/d", "chu_vwp_sum"),
])
def test_specialize_targets(source, name, target):
    tgt, sp = specialize(source, name)
    assert tgt.id == target and sp.source == source


def test_unknown_map():
    with pytest.raises(UnknownMap):
        specialize("ramanujan_1psi1", "b=a")


@pytest.mark.parametrize("sp", specializations(), ids=lambda s: f"{s.source}:{s.name}")
def test_every_specialization_matches(sp):
    opts = EvalOptions(BIG)
    for k in range(2):
        agr = check_specialization(sp.source, sp.name, 9, k, opts)
        assert agr.worst < 1e-11, agr


def test_sampler_solves_equality_and_keeps_margin():
    d = get("bailey_8phi7_nt")
    pt = sample_point(d, 17, DOUBLE)
    p = pt.params
    assert abs(p["a"] ** 2 * p["q"] / (p["b"] * p["c"] * p["d"] * p["e"] * p["f"]) - 1) < 1e-12
    d = get("bailey_6psi6")
    for i in range(20):
        p = sample_point(d, 42, DOUBLE, index=i).params
        assert abs(p["a"] ** 2 * p["q"] / (p["b"] * p["c"] * p["d"] * p["e"])) <= 0.9


def test_sampling_is_deterministic():
    for ident in ("tenpsi10", "chu_2s_tf", "kernel_key1"):
        assert sample_point(ident, 3, DOUBLE, index=2) == sample_point(ident, 3, DOUBLE, index=2)
    assert sample_point("chu_2s_tf", 3, DOUBLE, index=2) != sample_point("chu_2s_tf", 3, DOUBLE, index=3)


@pytest.mark.parametrize("ident", ALL_IDS)
def test_builders_use_only_declared_symbols(ident):
    d = get(ident)
    tower = EXACT if d.exact_sampler else DOUBLE
    pt = sample_point(d, 2, tower)
    declared = {k: v for k, v in pt.params.items() if k in d.params(pt.shape)}
    restricted = Point(declared, pt.shape)
    assert d.lhs_terms(restricted) and d.rhs_terms(restricted)


@pytest.mark.parametrize("ident", ALL_IDS)
def test_identity_holds_at_a_sample(ident):
    from qbil.verify import options_for

    opts = options_for(ident)
    pt = sample_point(ident, 123, opts.tower)
    lv, _ = side_value(ident, pt, opts, "lhs")
    rv, _ = side_value(ident, pt, opts, "rhs")
    if opts.tower.is_exact:
        assert lv == rv
    else:
        with opts.tower.context():
            assert relative_residual(lv, rv, opts.tower, 1e-300) < opts.tolerance.residual_tol


def test_kernel_lhs_is_finite_shifted_sum():
    d = get("kernel_key1")
    pt = sample_point(d, 1, DOUBLE, shape={"n": 3})
    assert any(isinstance(t.series, ShiftedSum) for t in d.lhs_terms(pt))


def test_key1_at_zero_is_one():
    d = get("kernel_key1")
    pt = sample_point(d, 8, DOUBLE, shape={"n": 0})
    lv, _ = side_value(d, pt, EvalOptions(DOUBLE), "lhs")
    rv, _ = side_value(d, pt, EvalOptions(DOUBLE), "rhs")
    assert abs(lv - 1) < 1e-12 and abs(rv - 1) < 1e-12


def test_compare_identities_reports_mismatch():
    a = sample_point("ramanujan_1psi1", 1, DOUBLE)
    b = sample_point("ramanujan_1psi1", 1, DOUBLE, index=1)
    agr = compare_identities("ramanujan_1psi1", a, "ramanujan_1psi1", b, EvalOptions(DOUBLE))
    assert agr.lhs > 1e-6 and agr.first_residual < 1e-12
