"""Catalog of summation and transformation identities.

Each :class:`IdentityDescriptor` knows its free parameters, the parameters solved
from equality constraints, its convergence conditions, and how to build the
term lists of both sides.  Sums written with ``idem(head; tail...)`` are expanded
by swapping the head parameter with each tail parameter in turn.

Naming: scalar parameters use single letters; parameter families use an index
suffix (``a1``, ``b3``, ``h2``).  Integer shape parameters (r, s, n, N, m) live in
a separate ``shape`` mapping; ``m`` is a tuple of length s.
"""

from __future__ import annotations

import cmath
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterator, Mapping, Sequence

from qbil.errors import DegeneratePoint, SamplingExhausted, SymbolMissing, UnknownMap
from qbil.numerics import Tower
from qbil.series import BILATERAL, UNILATERAL, AnySpec, EvalOptions, SeriesSpec, VWPSpec
from qbil.terms import (
    ShiftedSum,
    Term,
    all_finite,
    evaluate_terms,
    guard,
    pole_distance,
    term,
)

# Sampling accepts only points whose modulus conditions hold with this margin.
SAMPLE_MARGIN = 0.9
# Sampling keeps this relative distance from every pole (stricter than evaluation).
SAMPLE_POLE_RADIUS = 1e-3
MAX_REJECTIONS = 1000
EQUALITY_TOL = 1e-12


# -- parameter binding -------------------------------------------------

class Bind(Mapping):
    """Read-only parameter map; unknown names raise SymbolMissing."""

    def __init__(self, values: Mapping[str, Any]):
        self._v = dict(values)

    def __getitem__(self, name: str) -> Any:
        try:
            return self._v[name]
        except KeyError:
            raise SymbolMissing(f"parameter {name!r} is not bound") from None

    def __getattr__(self, name: str) -> Any:
        if name.startswith("_"):
            raise AttributeError(name)
        return self[name]

    def __contains__(self, name: object) -> bool:
        return name in self._v

    def __iter__(self) -> Iterator[str]:
        return iter(self._v)

    def __len__(self) -> int:
        return len(self._v)

    def vec(self, prefix: str, lo: int, hi: int) -> list:
        """[p[prefix+lo], ..., p[prefix+hi]] (inclusive; empty when hi < lo)."""
        return [self[f"{prefix}{i}"] for i in range(lo, hi + 1)]


@dataclass(frozen=True)
class IdemGroup:
    head: str
    tail: tuple


def idem_instances(values: Mapping[str, Any], group: IdemGroup | None) -> list[dict]:
    """Parameter maps for instance 0 (unchanged) and one per tail symbol."""
    base = dict(values)
    if group is None:
        return [base]
    names = (group.head,) + tuple(group.tail)
    if len(set(names)) != len(names):
        raise ValueError("idem head and tail symbols must be distinct")
    for name in names:
        if name not in base:
            raise SymbolMissing(f"idem symbol {name!r} is not bound")
    out = [base]
    for other in group.tail:
        swapped = dict(base)
        swapped[group.head], swapped[other] = base[other], base[group.head]
        out.append(swapped)
    return out


def expand_idem(template: Callable[[Bind], Any], group: IdemGroup | None, values: Mapping[str, Any]) -> list:
    """Apply ``template`` to every idem instance of ``values``."""
    return [template(Bind(v)) for v in idem_instances(values, group)]


# -- points ------------------------------------------------------------

@dataclass(frozen=True)
class Point:
    """Parameter values (including q) and integer shape."""

    params: Mapping[str, Any]
    shape: Mapping[str, Any] = field(default_factory=dict)

    def converted(self, tower: Tower) -> "Point":
        with tower.context():
            return Point({k: tower.convert(v) for k, v in self.params.items()}, dict(self.shape))


@dataclass(frozen=True)
class Constraint:
    """Equality (fn returns (lhs, rhs)) or strict modulus inequality |small| < |large|."""

    text: str
    fn: Callable[[Bind, Mapping], tuple]
    kind: str = "modulus"


def eq(text: str, fn: Callable) -> Constraint:
    return Constraint(text, fn, "equality")


def lt(text: str, fn: Callable) -> Constraint:
    return Constraint(text, fn, "modulus")


@dataclass
class ConstraintReport:
    ok: bool
    items: list
    via_termination: bool = False

    def failed(self) -> list:
        return [item for item in self.items if not item["ok"]]


Sampler = Callable[[random.Random, Mapping], dict]


@dataclass(frozen=True)
class IdentityDescriptor:
    id: str
    title: str
    free: Callable[[Mapping], tuple]
    lhs_template: Callable[[Bind, Mapping], list]
    rhs_template: Callable[[Bind, Mapping], list]
    sampler: Sampler
    shape_space: Mapping[str, tuple] = field(default_factory=dict)
    default_shape: Mapping[str, Any] = field(default_factory=dict)
    shape_sampler: Callable[[random.Random], dict] | None = None
    derived: tuple = ()
    equalities: tuple = ()
    domain: tuple = ()
    lhs_idem: Callable[[Mapping], IdemGroup | None] | None = None
    rhs_idem: Callable[[Mapping], IdemGroup | None] | None = None
    exact_sampler: Sampler | None = None
    kernel: bool = False

    def params(self, shape: Mapping) -> tuple:
        return ("q",) + tuple(self.free(shape)) + tuple(name for name, _ in self.derived)

    def derive(self, values: Mapping[str, Any], shape: Mapping) -> dict:
        """Fill in parameters solved from equality constraints (tower arithmetic)."""
        out = dict(values)
        for name, fn in self.derived:
            if name not in out:
                out[name] = fn(Bind(out), shape)
        return out

    def lhs_terms(self, point: Point) -> list[Term]:
        group = self.lhs_idem(point.shape) if self.lhs_idem else None
        parts = expand_idem(lambda p: self.lhs_template(p, point.shape), group, point.params)
        return [t for part in parts for t in part]

    def rhs_terms(self, point: Point) -> list[Term]:
        group = self.rhs_idem(point.shape) if self.rhs_idem else None
        parts = expand_idem(lambda p: self.rhs_template(p, point.shape), group, point.params)
        return [t for part in parts for t in part]

    def metadata(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "shape": {k: list(v) for k, v in self.shape_space.items()},
            "default_shape": {k: list(v) if isinstance(v, tuple) else v for k, v in self.default_shape.items()},
            "params": list(self.params(self.default_shape)),
            "equalities": [c.text for c in self.equalities],
            "domain": [c.text for c in self.domain],
            "exact": self.exact_sampler is not None,
        }

    def constraint_summary(self) -> str:
        parts = [c.text for c in self.equalities] + [c.text for c in self.domain]
        return "; ".join(parts) if parts else "terminating"


# -- term helpers ------------------------------------------------------

def phi(upper: Sequence, lower: Sequence, q: Any, z: Any) -> SeriesSpec:
    return SeriesSpec(UNILATERAL, tuple(upper), tuple(lower), q, z)


def psi(upper: Sequence, lower: Sequence, q: Any, z: Any) -> SeriesSpec:
    return SeriesSpec(BILATERAL, tuple(upper), tuple(lower), q, z)


def wp_psi(a: Any, params: Sequence, q: Any, z: Any) -> SeriesSpec:
    """Well-poised bilateral series: upper x_i over lower aq/x_i."""
    return psi(params, [a * q / x for x in params], q, z)


def vwp_phi(a: Any, params: Sequence, q: Any, z: Any) -> VWPSpec:
    """Very-well-poised unilateral series with special parameter a."""
    return VWPSpec(a, (a,) + tuple(params), tuple(a * q / x for x in params), q, z, UNILATERAL)


def vwp_psi(a: Any, params: Sequence, q: Any, z: Any) -> VWPSpec:
    return VWPSpec(a, tuple(params), tuple(a * q / x for x in params), q, z, BILATERAL)


def prod(values: Sequence[Any], one: Any = 1) -> Any:
    out = one
    for v in values:
        out = out * v
    return out


def mabs(m: Sequence[int]) -> int:
    return sum(m)


# -- random draws ------------------------------------------------------

def cdraw(rng: random.Random, lo: float, hi: float) -> complex:
    """Complex number with log-uniform modulus in [lo, hi] and uniform phase."""
    r = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    return cmath.rect(r, rng.uniform(0.0, 2.0 * math.pi))


def qdraw(rng: random.Random, lo: float = 0.15, hi: float = 0.55) -> complex:
    return cdraw(rng, lo, hi)


def rdraw(rng: random.Random, max_num: int = 9, max_den: int = 9) -> Fraction:
    """Nonzero rational with small numerator and denominator, random sign."""
    num = rng.randint(1, max_num)
    den = rng.randint(1, max_den)
    return Fraction(num * rng.choice((1, -1)), den)


def rq(rng: random.Random) -> Fraction:
    return Fraction(rng.choice((1, -1)), rng.randint(2, 7))


def _shape_r(lo: int, hi: int) -> Callable[[random.Random], dict]:
    def f(rng: random.Random) -> dict:
        return {"r": rng.randint(lo, hi)}

    return f


def _shape_chu(s_max: int = 2, m_max: int = 3, with_r: tuple | None = None,
               with_N: bool = False) -> Callable[[random.Random], dict]:
    def f(rng: random.Random) -> dict:
        s = rng.randint(0, s_max)
        out: dict = {"s": s, "m": tuple(rng.randint(0, m_max) for _ in range(s))}
        if with_r:
            out["r"] = rng.randint(*with_r)
        if with_N:
            out["N"] = rng.randint(-3, 3)
        return out

    return f


def _hvec(shape: Mapping) -> tuple:
    return tuple(f"h{i}" for i in range(1, shape.get("s", 0) + 1))


# ======================================================================
# Identity definitions
# ======================================================================

CATALOG: dict[str, IdentityDescriptor] = {}


def register(d: IdentityDescriptor) -> IdentityDescriptor:
    CATALOG[d.id] = d
    return d


# -- q-binomial --------------------------------------------------------

register(IdentityDescriptor(
    id="q_binomial",
    title="q-binomial theorem: 1phi0(a;-;q,z) = (az;q)_inf/(z;q)_inf",
    free=lambda s: ("a", "z"),
    lhs_template=lambda p, s: [term(series=phi([p.a], [], p.q, p.z))],
    rhs_template=lambda p, s: [term(num=[p.a * p.z], den=[p.z])],
    domain=(lt("|z|<1", lambda p, s: (p.z, 1)),),
    sampler=lambda rng, s: {"q": qdraw(rng), "a": cdraw(rng, 0.3, 3.0), "z": cdraw(rng, 0.05, 0.7)},
))


def _qbt_lhs(p: Bind, s: Mapping) -> list:
    n = s["n"]
    return [term(series=phi([p.q ** (-n)], [], p.q, p.z))]


def _qbt_rhs(p: Bind, s: Mapping) -> list:
    n = s["n"]
    return [term(fnum=[(p.z * p.q ** (-n), n)])]


register(IdentityDescriptor(
    id="q_binomial_terminating",
    title="terminating q-binomial theorem: 1phi0(q^-n;-;q,z) = (zq^-n;q)_n",
    free=lambda s: ("z",),
    lhs_template=_qbt_lhs,
    rhs_template=_qbt_rhs,
    shape_space={"n": (0, 10)},
    default_shape={"n": 3},
    shape_sampler=lambda rng: {"n": rng.randint(0, 10)},
    sampler=lambda rng, s: {"q": qdraw(rng, 0.3, 0.8), "z": cdraw(rng, 0.2, 3.0)},
    exact_sampler=lambda rng, s: {"q": rq(rng), "z": rdraw(rng)},
))


# -- Ramanujan 1psi1 ---------------------------------------------------

def _r11_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng)
    z = cdraw(rng, 0.2, 0.85)
    a = cdraw(rng, 1.0, 4.0)
    b = a * z * cdraw(rng, 0.05, 0.85)
    return {"q": q, "a": a, "b": b, "z": z}


register(IdentityDescriptor(
    id="ramanujan_1psi1",
    title="Ramanujan's 1psi1 summation",
    free=lambda s: ("a", "b", "z"),
    lhs_template=lambda p, s: [term(series=psi([p.a], [p.b], p.q, p.z))],
    rhs_template=lambda p, s: [term(
        num=[p.q, p.b / p.a, p.a * p.z, p.q / (p.a * p.z)],
        den=[p.b, p.q / p.a, p.z, p.b / (p.a * p.z)],
    )],
    domain=(lt("|b/a|<|z|", lambda p, s: (p.b / p.a, p.z)), lt("|z|<1", lambda p, s: (p.z, 1))),
    sampler=_r11_sample,
))


# -- q-Pfaff-Saalschutz ------------------------------------------------

def _ps_lhs(p: Bind, s: Mapping) -> list:
    n, q = s["n"], p.q
    return [term(series=phi([p.a, p.b, q ** (-n)], [p.c, p.a * p.b * q ** (1 - n) / p.c], q, q))]


def _ps_rhs(p: Bind, s: Mapping) -> list:
    n = s["n"]
    a, b, c = p.a, p.b, p.c
    return [term(fnum=[(c / a, n), (c / b, n)], fden=[(c, n), (c / (a * b), n)])]


register(IdentityDescriptor(
    id="pfaff_saalschutz",
    title="terminating balanced 3phi2 summation",
    free=lambda s: ("a", "b", "c"),
    lhs_template=_ps_lhs,
    rhs_template=_ps_rhs,
    shape_space={"n": (0, 8)},
    default_shape={"n": 3},
    shape_sampler=lambda rng: {"n": rng.randint(0, 8)},
    sampler=lambda rng, s: {"q": qdraw(rng, 0.3, 0.8), "a": cdraw(rng, 0.3, 3), "b": cdraw(rng, 0.3, 3),
                            "c": cdraw(rng, 0.3, 3)},
    exact_sampler=lambda rng, s: {"q": rq(rng), "a": rdraw(rng), "b": rdraw(rng), "c": rdraw(rng)},
))


def _psnt_lhs(p: Bind, s: Mapping) -> list:
    a, b, c, e, f, q = p.a, p.b, p.c, p.e, p.f, p.q
    return [
        term(series=phi([a, b, c], [e, f], q, q)),
        term(
            num=[q / e, a, b, c, f * q / e],
            den=[e / q, a * q / e, b * q / e, c * q / e, f],
            series=phi([a * q / e, b * q / e, c * q / e], [q * q / e, f * q / e], q, q),
        ),
    ]


def _psnt_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, e, f, q = p.a, p.b, p.c, p.e, p.f, p.q
    return [term(num=[q / e, f / a, f / b, f / c], den=[a * q / e, b * q / e, c * q / e, f])]


register(IdentityDescriptor(
    id="pfaff_saalschutz_nt",
    title="nonterminating balanced 3phi2 summation (ef = abcq)",
    free=lambda s: ("a", "b", "c", "e"),
    derived=(("f", lambda p, s: p.a * p.b * p.c * p.q / p.e),),
    equalities=(eq("ef = abcq", lambda p, s: (p.e * p.f, p.a * p.b * p.c * p.q)),),
    lhs_template=_psnt_lhs,
    rhs_template=_psnt_rhs,
    sampler=lambda rng, s: {"q": qdraw(rng), "a": cdraw(rng, 0.2, 2), "b": cdraw(rng, 0.2, 2),
                            "c": cdraw(rng, 0.2, 2), "e": cdraw(rng, 0.3, 3)},
))


# -- Heine ---------------------------------------------------------------

def _heine_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng)
    z = cdraw(rng, 0.05, 0.7)
    a = cdraw(rng, 0.3, 3)
    b = cdraw(rng, 0.3, 3)
    w = cdraw(rng, 0.05, 0.7)  # target value of abz/c
    return {"q": q, "a": a, "b": b, "c": a * b * z / w, "z": z}


register(IdentityDescriptor(
    id="heine_euler",
    title="Heine's q-Euler transformation of 2phi1",
    free=lambda s: ("a", "b", "c", "z"),
    lhs_template=lambda p, s: [term(series=phi([p.a, p.b], [p.c], p.q, p.z))],
    rhs_template=lambda p, s: [term(
        num=[p.a * p.b * p.z / p.c], den=[p.z],
        series=phi([p.c / p.a, p.c / p.b], [p.c], p.q, p.a * p.b * p.z / p.c),
    )],
    domain=(lt("|z|<1", lambda p, s: (p.z, 1)), lt("|abz/c|<1", lambda p, s: (p.a * p.b * p.z / p.c, 1))),
    sampler=_heine_sample,
))


# -- Rogers 6phi5 / Jackson 8phi7 / Bailey 6psi6 ---------------------------

def _rogers_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng)
    a = cdraw(rng, 0.2, 3)
    b = cdraw(rng, 0.5, 3)
    c = cdraw(rng, 0.5, 3)
    z = cdraw(rng, 0.05, 0.6)
    return {"q": q, "a": a, "b": b, "c": c, "d": a * q / (b * c * z)}


def _rogers_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, q = p.a, p.b, p.c, p.d, p.q
    return [term(
        num=[a * q, a * q / (b * c), a * q / (b * d), a * q / (c * d)],
        den=[a * q / b, a * q / c, a * q / d, a * q / (b * c * d)],
    )]


register(IdentityDescriptor(
    id="rogers_6phi5",
    title="Rogers' nonterminating very-well-poised 6phi5 summation",
    free=lambda s: ("a", "b", "c", "d"),
    lhs_template=lambda p, s: [term(series=vwp_phi(p.a, [p.b, p.c, p.d], p.q, p.a * p.q / (p.b * p.c * p.d)))],
    rhs_template=_rogers_rhs,
    domain=(lt("|aq/(bcd)|<1", lambda p, s: (p.a * p.q / (p.b * p.c * p.d), 1)),),
    sampler=_rogers_sample,
))


def _jackson_lhs(p: Bind, s: Mapping) -> list:
    n, a, b, c, d, q = s["n"], p.a, p.b, p.c, p.d, p.q
    e = a * a * q ** (1 + n) / (b * c * d)
    return [term(series=vwp_phi(a, [b, c, d, e, q ** (-n)], q, q))]


def _jackson_rhs(p: Bind, s: Mapping) -> list:
    n, a, b, c, d, q = s["n"], p.a, p.b, p.c, p.d, p.q
    return [term(
        fnum=[(a * q, n), (a * q / (b * c), n), (a * q / (b * d), n), (a * q / (c * d), n)],
        fden=[(a * q / b, n), (a * q / c, n), (a * q / d, n), (a * q / (b * c * d), n)],
    )]


register(IdentityDescriptor(
    id="jackson_8phi7",
    title="Jackson's terminating very-well-poised balanced 8phi7 summation",
    free=lambda s: ("a", "b", "c", "d"),
    lhs_template=_jackson_lhs,
    rhs_template=_jackson_rhs,
    shape_space={"n": (0, 8)},
    default_shape={"n": 3},
    shape_sampler=lambda rng: {"n": rng.randint(0, 8)},
    sampler=lambda rng, s: {"q": qdraw(rng, 0.3, 0.8), "a": cdraw(rng, 0.3, 3), "b": cdraw(rng, 0.3, 3),
                            "c": cdraw(rng, 0.3, 3), "d": cdraw(rng, 0.3, 3)},
    exact_sampler=lambda rng, s: {"q": rq(rng), "a": rdraw(rng), "b": rdraw(rng), "c": rdraw(rng),
                                  "d": rdraw(rng)},
))


def _b66_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng)
    a = cdraw(rng, 0.3, 3)
    b, c, d = (cdraw(rng, 0.5, 3) for _ in range(3))
    z = cdraw(rng, 0.05, 0.6)
    return {"q": q, "a": a, "b": b, "c": c, "d": d, "e": a * a * q / (b * c * d * z)}


def _b66_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, e, q = p.a, p.b, p.c, p.d, p.e, p.q
    aq = a * q
    return [term(
        num=[aq, aq / (b * c), aq / (b * d), aq / (b * e), aq / (c * d), aq / (c * e), aq / (d * e), q, q / a],
        den=[aq / b, aq / c, aq / d, aq / e, q / b, q / c, q / d, q / e, a * a * q / (b * c * d * e)],
    )]


register(IdentityDescriptor(
    id="bailey_6psi6",
    title="Bailey's very-well-poised 6psi6 summation",
    free=lambda s: ("a", "b", "c", "d", "e"),
    lhs_template=lambda p, s: [term(series=vwp_psi(
        p.a, [p.b, p.c, p.d, p.e], p.q, p.a * p.a * p.q / (p.b * p.c * p.d * p.e)))],
    rhs_template=_b66_rhs,
    domain=(lt("|a^2 q/(bcde)|<1", lambda p, s: (p.a * p.a * p.q / (p.b * p.c * p.d * p.e), 1)),),
    sampler=_b66_sample,
))


# -- Bailey 8phi7: nonterminating summation and transformation ------------

def _b87nt_lhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, e, f, q = p.a, p.b, p.c, p.d, p.e, p.f, p.q
    bb = b * b / a
    return [
        term(series=vwp_phi(a, [b, c, d, e, f], q, q)),
        term(
            num=[a * q, c, d, e, f, b / a, b * q / c, b * q / d, b * q / e, b * q / f],
            den=[a / b, a * q / c, a * q / d, a * q / e, a * q / f, b * c / a, b * d / a, b * e / a, b * f / a,
                 b * b * q / a],
            series=vwp_phi(bb, [b, b * c / a, b * d / a, b * e / a, b * f / a], q, q),
        ),
    ]


def _b87nt_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, e, f, q = p.a, p.b, p.c, p.d, p.e, p.f, p.q
    aq = a * q
    return [term(
        num=[aq, b / a, aq / (c * d), aq / (c * e), aq / (c * f), aq / (d * e), aq / (d * f), aq / (e * f)],
        den=[aq / c, aq / d, aq / e, aq / f, b * c / a, b * d / a, b * e / a, b * f / a],
    )]


register(IdentityDescriptor(
    id="bailey_8phi7_nt",
    title="Bailey's nonterminating very-well-poised 8phi7 summation (a^2 q = bcdef)",
    free=lambda s: ("a", "b", "c", "d", "e"),
    derived=(("f", lambda p, s: p.a * p.a * p.q / (p.b * p.c * p.d * p.e)),),
    equalities=(eq("a^2 q = bcdef", lambda p, s: (p.a * p.a * p.q, p.b * p.c * p.d * p.e * p.f)),),
    lhs_template=_b87nt_lhs,
    rhs_template=_b87nt_rhs,
    sampler=lambda rng, s: {"q": qdraw(rng), "a": cdraw(rng, 0.3, 3), "b": cdraw(rng, 0.3, 3),
                            "c": cdraw(rng, 0.3, 3), "d": cdraw(rng, 0.3, 3), "e": cdraw(rng, 0.3, 3)},
))


def _lam(p: Bind) -> Any:
    return p.a * p.a * p.q / (p.b * p.c * p.d)


def _b87tf_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, e, f, q = p.a, p.b, p.c, p.d, p.e, p.f, p.q
    lam = _lam(p)
    return [term(
        num=[a * q, a * q / (e * f), lam * q / e, lam * q / f],
        den=[a * q / e, a * q / f, lam * q, lam * q / (e * f)],
        series=vwp_phi(lam, [lam * b / a, lam * c / a, lam * d / a, e, f], q, a * q / (e * f)),
    )]


def _b87tf_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng)
    a, b, c, d = cdraw(rng, 0.3, 3), cdraw(rng, 0.5, 3), cdraw(rng, 0.5, 3), cdraw(rng, 0.5, 3)
    e = cdraw(rng, 0.5, 3)
    lam = a * a * q / (b * c * d)
    # choose f so that both arguments aq/ef and lam q/ef are small
    big = max(abs(a), abs(lam))
    f = big * q / e / cdraw(rng, 0.05, 0.6)
    return {"q": q, "a": a, "b": b, "c": c, "d": d, "e": e, "f": f}


register(IdentityDescriptor(
    id="bailey_8phi7_tf",
    title="Bailey's transformation of a nonterminating very-well-poised 8phi7 (lambda = a^2 q/(bcd))",
    free=lambda s: ("a", "b", "c", "d", "e", "f"),
    lhs_template=lambda p, s: [term(series=vwp_phi(
        p.a, [p.b, p.c, p.d, p.e, p.f], p.q, p.a**2 * p.q**2 / (p.b * p.c * p.d * p.e * p.f)))],
    rhs_template=_b87tf_rhs,
    domain=(
        lt("|aq/(ef)|<1", lambda p, s: (p.a * p.q / (p.e * p.f), 1)),
        lt("|lambda q/(ef)|<1", lambda p, s: (_lam(p) * p.q / (p.e * p.f), 1)),
    ),
    sampler=_b87tf_sample,
))


# -- very-well-poised bilateral transformations ----------------------------

def _vwp_bilateral_sample(names: Sequence[str], power: Callable[[Mapping], tuple]) -> Sampler:
    """Sample a, the listed params, solving the last one so |argument| is small.

    ``power(shape)`` returns (i, j) with argument a^i q^j / prod(params).
    """

    def f(rng: random.Random, s: Mapping) -> dict:
        q = qdraw(rng)
        a = cdraw(rng, 0.3, 3)
        vals = {n: cdraw(rng, 0.4, 2.5) for n in names[:-1]}
        z = cdraw(rng, 0.05, 0.5)
        i, j = power(s)
        vals[names[-1]] = a**i * q**j / (prod(list(vals.values())) * z)
        return {"q": q, "a": a, **vals}

    return f


def _mj88_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, e, f, g, q = p.a, p.b, p.c, p.d, p.e, p.f, p.g, p.q
    aq = a * q
    z = a**3 * q**2 / (b * c * d * e * f * g)
    return [term(
        num=[q, aq, q / a, c, c / a, b * q / d, b * q / e, b * q / f, b * q / g,
             aq / (b * d), aq / (b * e), aq / (b * f), aq / (b * g)],
        den=[q / b, q / d, q / e, q / f, q / g, aq / b, aq / d, aq / e, aq / f, aq / g,
             c / b, b * c / a, b * b * q / a],
        series=vwp_phi(b * b / a, [b * c / a, b * d / a, b * e / a, b * f / a, b * g / a], q, z),
    )]


register(IdentityDescriptor(
    id="mjackson_8psi8",
    title="very-well-poised 8psi8 as a sum of two 8phi7 series",
    free=lambda s: ("a", "b", "c", "d", "e", "f", "g"),
    lhs_template=lambda p, s: [term(series=vwp_psi(
        p.a, [p.b, p.c, p.d, p.e, p.f, p.g], p.q, p.a**3 * p.q**2 / (p.b * p.c * p.d * p.e * p.f * p.g)))],
    rhs_template=_mj88_rhs,
    rhs_idem=lambda s: IdemGroup("b", ("c",)),
    domain=(lt("|a^3 q^2/(bcdefg)|<1",
               lambda p, s: (p.a**3 * p.q**2 / (p.b * p.c * p.d * p.e * p.f * p.g), 1)),),
    sampler=_vwp_bilateral_sample("bcdefg", lambda s: (3, 2)),
))


_TEN = ("b", "c", "d", "e", "f", "g", "h", "y")


def _ten_z(p: Bind) -> Any:
    return p.a**4 * p.q**3 / prod([p[n] for n in _TEN])


def _ten_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, q = p.a, p.b, p.c, p.d, p.q
    rest = [p.e, p.f, p.g, p.h, p.y]
    aq = a * q
    return [term(
        num=[q, aq, q / a, c, c / a, d, d / a] + [b * q / x for x in rest] + [aq / (b * x) for x in rest],
        den=[q / b] + [q / x for x in rest] + [aq / b] + [aq / x for x in rest]
        + [b * c / a, b * d / a, c / b, d / b, b * b * q / a],
        series=vwp_phi(b * b / a, [b * x / a for x in [c, d] + rest], q, _ten_z(p)),
    )]


register(IdentityDescriptor(
    id="tenpsi10",
    title="very-well-poised 10psi10 as a sum of three 10phi9 series",
    free=lambda s: ("a",) + _TEN,
    lhs_template=lambda p, s: [term(series=vwp_psi(p.a, [p[n] for n in _TEN], p.q, _ten_z(p)))],
    rhs_template=_ten_rhs,
    rhs_idem=lambda s: IdemGroup("b", ("c", "d")),
    domain=(lt("|a^4 q^3/(bcdefghy)|<1", lambda p, s: (_ten_z(p), 1)),),
    sampler=_vwp_bilateral_sample(_TEN, lambda s: (4, 3)),
))


# -- Slater's very-well-poised 2r psi 2r ------------------------------------

def _svwp_names(s: Mapping) -> tuple:
    return tuple(f"b{i}" for i in range(3, 2 * s["r"] + 1))


def _svwp_z(p: Bind, s: Mapping) -> Any:
    r = s["r"]
    return p.a ** (r - 1) * p.q ** (r - 2) / prod(p.vec("b", 3, 2 * r))


def _svwp_rhs(p: Bind, s: Mapping) -> list:
    r, a, q = s["r"], p.a, p.q
    b3 = p.b3
    mid = p.vec("b", 4, r)
    top = p.vec("b", r + 1, 2 * r)
    aq = a * q
    return [term(
        num=[q, aq, q / a] + mid + [x / a for x in mid] + [b3 * q / x for x in top] + [aq / (b3 * x) for x in top],
        den=[q / b3] + [q / x for x in top] + [aq / b3] + [aq / x for x in top]
        + [x / b3 for x in mid] + [b3 * x / a for x in mid] + [b3 * b3 * q / a],
        series=vwp_phi(b3 * b3 / a, [b3 * x / a for x in p.vec("b", 4, 2 * r)], q, _svwp_z(p, s)),
    )]


def _svwp_sample(rng: random.Random, s: Mapping) -> dict:
    names = _svwp_names(s)
    r = s["r"]
    return _vwp_bilateral_sample(names, lambda sh: (r - 1, r - 2))(rng, s)


register(IdentityDescriptor(
    id="slater_vwp_2r",
    title="Slater's very-well-poised 2r psi 2r transformation into r-2 series (r >= 3)",
    free=lambda s: ("a",) + _svwp_names(s),
    lhs_template=lambda p, s: [term(series=vwp_psi(p.a, p.vec("b", 3, 2 * s["r"]), p.q, _svwp_z(p, s)))],
    rhs_template=_svwp_rhs,
    rhs_idem=lambda s: IdemGroup("b3", tuple(f"b{i}" for i in range(4, s["r"] + 1))),
    shape_space={"r": (3, 6)},
    default_shape={"r": 3},
    shape_sampler=_shape_r(3, 6),
    domain=(lt("|a^(r-1) q^(r-2)/(b3...b2r)|<1", lambda p, s: (_svwp_z(p, s), 1)),),
    sampler=_svwp_sample,
))


# -- Slater's well-poised 2r psi 2r (special and general) -------------------

def _swp_z(p: Bind, s: Mapping) -> Any:
    r = s["r"]
    return -(p.a**r) * p.q**r / prod(p.vec("b", 1, 2 * r))


def _swp_lhs(p: Bind, s: Mapping) -> list:
    return [term(series=wp_psi(p.a, p.vec("b", 1, 2 * s["r"]), p.q, _swp_z(p, s)))]


def _swp_rhs(p: Bind, s: Mapping) -> list:
    r, a, q = s["r"], p.a, p.q
    b1 = p.b1
    mid = p.vec("b", 2, r)
    top = p.vec("b", r + 1, 2 * r)
    aq = a * q
    rest = p.vec("b", 2, 2 * r)
    return [term(
        num=[q, a, q / a] + mid + [x / a for x in mid] + [b1 * q / x for x in top] + [aq / (b1 * x) for x in top],
        den=[q / b1] + [q / x for x in top] + [aq / b1] + [aq / x for x in top]
        + [x / b1 for x in mid] + [b1 * x / a for x in mid] + [b1 * b1 * q / a],
        pnum=[b1 * b1 * q * q / a, a * q * q / (b1 * b1)],
        pden=[q * q / a, a],
        series=phi([b1 * b1 / a] + [b1 * x / a for x in rest], [b1 * q / x for x in rest], q, _swp_z(p, s)),
    )]


def _swp_sample_values(rng: random.Random, s: Mapping) -> dict:
    r = s["r"]
    q = qdraw(rng)
    a = cdraw(rng, 0.3, 3)
    vals = {f"b{i}": cdraw(rng, 0.4, 2.5) for i in range(1, 2 * r)}
    z = cdraw(rng, 0.05, 0.5)
    vals[f"b{2 * r}"] = -(a**r) * q**r / (prod(list(vals.values())) * z)
    return {"q": q, "a": a, **vals}


register(IdentityDescriptor(
    id="slater_wp_2r",
    title="Slater's well-poised 2r psi 2r transformation into r series",
    free=lambda s: ("a",) + tuple(f"b{i}" for i in range(1, 2 * s["r"] + 1)),
    lhs_template=_swp_lhs,
    rhs_template=_swp_rhs,
    rhs_idem=lambda s: IdemGroup("b1", tuple(f"b{i}" for i in range(2, s["r"] + 1))),
    shape_space={"r": (1, 4)},
    default_shape={"r": 2},
    shape_sampler=_shape_r(1, 4),
    domain=(lt("|a^r q^r/(b1...b2r)|<1", lambda p, s: (_swp_z(p, s), 1)),),
    sampler=_swp_sample_values,
))


def _swpg_rhs(p: Bind, s: Mapping) -> list:
    r, a, q = s["r"], p.a, p.q
    a1 = p.a1
    ai = p.vec("a", 2, r)
    bs = p.vec("b", 1, 2 * r)
    aq = a * q
    return [term(
        num=[a, q / a] + ai + [q / x for x in ai] + [x / a for x in ai] + [aq / x for x in ai]
        + [a1 * q / x for x in bs] + [aq / (a1 * x) for x in bs],
        den=[q / x for x in bs] + [aq / x for x in bs] + [x / a1 for x in ai] + [a1 * q / x for x in ai]
        + [a1 * x / a for x in ai] + [aq / (a1 * x) for x in ai] + [a1 * a1 / a, aq / (a1 * a1)],
        pnum=[a1 * a1 / a, a * q * q / (a1 * a1)],
        pden=[q * q / a, a],
        series=wp_psi(a1 * a1 / a, [a1 * x / a for x in bs], q, _swp_z(p, s)),
    )]


def _swpg_sample(rng: random.Random, s: Mapping) -> dict:
    out = _swp_sample_values(rng, s)
    for i in range(1, s["r"] + 1):
        out[f"a{i}"] = cdraw(rng, 0.3, 3)
    return out


register(IdentityDescriptor(
    id="slater_wp_2r_general",
    title="Slater's general well-poised 2r psi 2r transformation with free parameters a1..ar",
    free=lambda s: ("a",) + tuple(f"a{i}" for i in range(1, s["r"] + 1))
    + tuple(f"b{i}" for i in range(1, 2 * s["r"] + 1)),
    lhs_template=_swp_lhs,
    rhs_template=_swpg_rhs,
    rhs_idem=lambda s: IdemGroup("a1", tuple(f"a{i}" for i in range(2, s["r"] + 1))),
    shape_space={"r": (1, 4)},
    default_shape={"r": 3},
    shape_sampler=_shape_r(1, 4),
    domain=(lt("|a^r q^r/(b1...b2r)|<1", lambda p, s: (_swp_z(p, s), 1)),),
    sampler=_swpg_sample,
))


# -- Slater's r psi r ----------------------------------------------------

def _rv(p: Bind, s: Mapping, name: str) -> list:
    return p.vec(name, 1, s["r"])


def _rpsir_domain() -> tuple:
    return (
        lt("|b1...br/(a1...ar)|<|z|", lambda p, s: (prod(_rv(p, s, "b")) / prod(_rv(p, s, "a")), p.z)),
        lt("|z|<1", lambda p, s: (p.z, 1)),
    )


def _rpsir_rhs(p: Bind, s: Mapping) -> list:
    q, z = p.q, p.z
    av, bv = _rv(p, s, "a"), _rv(p, s, "b")
    a1, rest = av[0], av[1:]
    w = prod(bv) / (prod(av) * z)
    return [term(
        num=[q] + rest + [b / a1 for b in bv] + [a1 * z, q / (a1 * z)],
        den=[q / a1] + [x / a1 for x in rest] + bv + [z, q / z],
        series=phi([a1 * q / b for b in bv], [a1 * q / x for x in rest], q, w),
    )]


def _rpsir_sample_values(rng: random.Random, s: Mapping) -> dict:
    r = s["r"]
    q = qdraw(rng)
    z = cdraw(rng, 0.15, 0.8)
    out = {"q": q, "z": z}
    for i in range(1, r + 1):
        out[f"a{i}"] = cdraw(rng, 0.3, 3)
    for i in range(1, r):
        out[f"b{i}"] = cdraw(rng, 0.3, 3)
    ratio = z * cdraw(rng, 0.05, 0.8)  # target for prod(b)/prod(a)
    pa = prod([out[f"a{i}"] for i in range(1, r + 1)])
    pb = prod([out[f"b{i}"] for i in range(1, r)])
    out[f"b{r}"] = ratio * pa / pb
    return out


def _avec(s: Mapping, *names: str) -> tuple:
    return tuple(f"{n}{i}" for n in names for i in range(1, s["r"] + 1))


register(IdentityDescriptor(
    id="slater_rpsir",
    title="Slater's transformation of r psi r into r unilateral series",
    free=lambda s: _avec(s, "a", "b") + ("z",),
    lhs_template=lambda p, s: [term(series=psi(_rv(p, s, "a"), _rv(p, s, "b"), p.q, p.z))],
    rhs_template=_rpsir_rhs,
    rhs_idem=lambda s: IdemGroup("a1", tuple(f"a{i}" for i in range(2, s["r"] + 1))),
    shape_space={"r": (1, 4)},
    default_shape={"r": 2},
    shape_sampler=_shape_r(1, 4),
    domain=_rpsir_domain(),
    sampler=_rpsir_sample_values,
))


def _big_a(p: Bind, s: Mapping) -> Any:
    return prod(_rv(p, s, "a")) / prod(_rv(p, s, "c"))


def _slgentf_rhs(p: Bind, s: Mapping) -> list:
    q, z = p.q, p.z
    av, bv, cv = _rv(p, s, "a"), _rv(p, s, "b"), _rv(p, s, "c")
    c1, rest = cv[0], cv[1:]
    A = _big_a(p, s)
    return [term(
        num=[c1 / a for a in av] + rest + [q / c for c in rest] + [b * q / c1 for b in bv]
        + [A * c1 * z, q / (A * c1 * z)],
        den=[q / a for a in av] + [c1 / c for c in rest] + [c * q / c1 for c in rest] + bv
        + [A * z * q, 1 / (A * z)],
        series=psi([a * q / c1 for a in av], [b * q / c1 for b in bv], q, z),
    )]


def _slgentf_sample(rng: random.Random, s: Mapping) -> dict:
    out = _rpsir_sample_values(rng, s)
    for i in range(1, s["r"] + 1):
        out[f"c{i}"] = cdraw(rng, 0.3, 3)
    return out


register(IdentityDescriptor(
    id="slater_rpsir_general",
    title="Slater's general r psi r transformation with free parameters c1..cr",
    free=lambda s: _avec(s, "a", "b", "c") + ("z",),
    lhs_template=lambda p, s: [term(series=psi(_rv(p, s, "a"), _rv(p, s, "b"), p.q, p.z))],
    rhs_template=_slgentf_rhs,
    rhs_idem=lambda s: IdemGroup("c1", tuple(f"c{i}" for i in range(2, s["r"] + 1))),
    shape_space={"r": (1, 3)},
    default_shape={"r": 2},
    shape_sampler=_shape_r(1, 3),
    domain=_rpsir_domain(),
    sampler=_slgentf_sample,
))


def _w1(p: Bind, s: Mapping) -> Any:
    """LHS argument c1...cr z/(a1...ar) of the reversed form."""
    return p.z / _big_a(p, s)


def _slgentf1_rhs(p: Bind, s: Mapping) -> list:
    q, z = p.q, p.z
    av, bv, cv = _rv(p, s, "a"), _rv(p, s, "b"), _rv(p, s, "c")
    c1, rest = cv[0], cv[1:]
    return [term(
        num=[c1 * q / a for a in av] + rest + [q / c for c in rest] + [b / c1 for b in bv] + [c1 * z, q / (c1 * z)],
        den=[q / a for a in av] + [c1 * q / c for c in rest] + [c / c1 for c in rest] + bv + [z, q / z],
        series=psi([c1 * q / b for b in bv], [c1 * q / a for a in av], q, prod(bv) / (prod(cv) * z)),
    )]


def _slgentf1_sample(rng: random.Random, s: Mapping) -> dict:
    out = _slgentf_sample(rng, s)
    # reuse the sampled LHS argument: z_here = A * w
    A = prod([out[f"a{i}"] for i in range(1, s["r"] + 1)]) / prod([out[f"c{i}"] for i in range(1, s["r"] + 1)])
    out["z"] = out["z"] * A
    return out


register(IdentityDescriptor(
    id="slater_rpsir_general_reversed",
    title="Slater's general r psi r transformation, form with reversed series",
    free=lambda s: _avec(s, "a", "b", "c") + ("z",),
    lhs_template=lambda p, s: [term(series=psi(_rv(p, s, "a"), _rv(p, s, "b"), p.q, _w1(p, s)))],
    rhs_template=_slgentf1_rhs,
    rhs_idem=lambda s: IdemGroup("c1", tuple(f"c{i}" for i in range(2, s["r"] + 1))),
    shape_space={"r": (1, 3)},
    default_shape={"r": 2},
    shape_sampler=_shape_r(1, 3),
    domain=(
        lt("|b1...br/(a1...ar)|<|c1...cr z/(a1...ar)|",
           lambda p, s: (prod(_rv(p, s, "b")) / prod(_rv(p, s, "a")), _w1(p, s))),
        lt("|c1...cr z/(a1...ar)|<1", lambda p, s: (_w1(p, s), 1)),
    ),
    sampler=_slgentf1_sample,
))


# -- Chu / Gasper / Karlsson-Minton type ---------------------------------

def _hs(p: Bind, s: Mapping) -> list:
    return p.vec("h", 1, s.get("s", 0))


def _ms(s: Mapping) -> tuple:
    return tuple(s.get("m", ()))


def _chutf_lhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, q = p.a, p.b, p.c, p.d, p.q
    hs, ms = _hs(p, s), _ms(s)
    return [term(series=psi([a, b] + [h * q**m for h, m in zip(hs, ms)], [c, d] + hs, q, q ** (1 - s["N"]) / a))]


def _chutf_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, q = p.a, p.b, p.c, p.d, p.q
    hs, ms, N = _hs(p, s), _ms(s), s["N"]
    M = mabs(ms)
    return [term(
        coeff=b**N,
        num=[q, b * q / a, c / b, d / b],
        den=[q / a, q / b, c, d],
        fnum=[(h / b, m) for h, m in zip(hs, ms)],
        fden=[(h, m) for h, m in zip(hs, ms)],
        series=phi([b * q / c, b * q / d] + [b * q / h for h in hs],
                   [b * q / a] + [b * q ** (1 - m) / h for h, m in zip(hs, ms)], q,
                   c * d * q ** (N - M - 1) / b),
    )]


def _chutf_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng, 0.2, 0.5)
    N, M = s["N"], mabs(_ms(s))
    z = cdraw(rng, 0.2, 0.7)  # LHS argument q^{1-N}/a
    a = q ** (1 - N) / z
    b = cdraw(rng, 0.5, 2.5)
    c = cdraw(rng, 0.5, 2.5)
    w = cdraw(rng, 0.05, 0.6)  # RHS argument cd q^{N-M-1}/b
    d = w * b / (c * q ** (N - M - 1))
    out = {"q": q, "a": a, "b": b, "c": c, "d": d}
    for i in range(1, s["s"] + 1):
        out[f"h{i}"] = cdraw(rng, 0.3, 3)
    return out


_CHU_SHAPE = {"s": (0, 3), "m": (0, 4)}

register(IdentityDescriptor(
    id="chu_2s_tf",
    title="Chu's (2+s) psi (2+s) transformation with parameter pairs h q^m over h",
    free=lambda s: ("a", "b", "c", "d") + _hvec(s),
    lhs_template=_chutf_lhs,
    rhs_template=_chutf_rhs,
    shape_space={**_CHU_SHAPE, "N": (-3, 3)},
    default_shape={"s": 1, "m": (2,), "N": 1},
    shape_sampler=_shape_chu(with_N=True),
    domain=(
        lt("|q/a|<|q^N|", lambda p, s: (p.q / p.a, p.q ** s["N"])),
        lt("|q^N|<|b q^(|m|+1)/(cd)|", lambda p, s: (p.q ** s["N"], p.b * p.q ** (mabs(_ms(s)) + 1) / (p.c * p.d))),
    ),
    sampler=_chutf_sample,
))


def _chugl_z(p: Bind, s: Mapping) -> Any:
    return p.a * p.q ** (1 - mabs(_ms(s))) / (p.b * p.c)


def _chugl_lhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, q = p.a, p.b, p.c, p.d, p.q
    hs, ms = _hs(p, s), _ms(s)
    upper = [b, c, d, a / d] + hs + [a * q ** (1 + m) / h for h, m in zip(hs, ms)]
    lower = [a * q / b, a * q / c, a * q / d, d * q] + [a * q / h for h in hs] + [h * q ** (-m) for h, m in zip(hs, ms)]
    return [term(series=VWPSpec(a, tuple(upper), tuple(lower), q, _chugl_z(p, s), BILATERAL))]


def _chugl_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, q = p.a, p.b, p.c, p.d, p.q
    hs, ms = _hs(p, s), _ms(s)
    aq = a * q
    return [term(
        num=[q, q, aq, q / a, aq / (b * d), aq / (c * d), d * q / b, d * q / c],
        den=[aq / b, aq / c, aq / d, d * q / a, q / b, q / c, q / d, d * q],
        fnum=[(aq / (d * h), m) for h, m in zip(hs, ms)] + [(d * q / h, m) for h, m in zip(hs, ms)],
        fden=[(aq / h, m) for h, m in zip(hs, ms)] + [(q / h, m) for h, m in zip(hs, ms)],
    )]


def _chugl_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng, 0.2, 0.5)
    M = mabs(_ms(s))
    a = cdraw(rng, 0.3, 3)
    b = cdraw(rng, 0.5, 2.5)
    z = cdraw(rng, 0.05, 0.6)
    c = a * q ** (1 - M) / (b * z)
    out = {"q": q, "a": a, "b": b, "c": c, "d": cdraw(rng, 0.3, 3)}
    for i in range(1, s["s"] + 1):
        out[f"h{i}"] = cdraw(rng, 0.3, 3)
    return out


register(IdentityDescriptor(
    id="chu_vwp_sum",
    title="Chu's very-well-poised (6+2s) psi (6+2s) summation",
    free=lambda s: ("a", "b", "c", "d") + _hvec(s),
    lhs_template=_chugl_lhs,
    rhs_template=_chugl_rhs,
    shape_space=dict(_CHU_SHAPE),
    default_shape={"s": 1, "m": (1,)},
    shape_sampler=_shape_chu(),
    domain=(lt("|a q^(1-|m|)/(bc)|<1", lambda p, s: (_chugl_z(p, s), 1)),),
    sampler=_chugl_sample,
))


def _ckm1_lhs(p: Bind, s: Mapping) -> list:
    q, z = p.q, p.z
    hs, ms = _hs(p, s), _ms(s)
    return [term(series=psi(_rv(p, s, "a") + [h * q**m for h, m in zip(hs, ms)], _rv(p, s, "b") + hs, q, z))]


def _ckm1_rhs(p: Bind, s: Mapping) -> list:
    q, z = p.q, p.z
    av, bv, cv = _rv(p, s, "a"), _rv(p, s, "b"), _rv(p, s, "c")
    hs, ms = _hs(p, s), _ms(s)
    c1, rest = cv[0], cv[1:]
    A = _big_a(p, s)
    return [term(
        num=[c1 / a for a in av] + rest + [q / c for c in rest] + [b * q / c1 for b in bv]
        + [A * c1 * z, q / (A * c1 * z)],
        den=[q / a for a in av] + [c1 / c for c in rest] + [c * q / c1 for c in rest] + bv
        + [A * z * q, 1 / (A * z)],
        fnum=[(h * q / c1, m) for h, m in zip(hs, ms)],
        fden=[(h, m) for h, m in zip(hs, ms)],
        series=psi([a * q / c1 for a in av] + [h * q ** (1 + m) / c1 for h, m in zip(hs, ms)],
                   [b * q / c1 for b in bv] + [h * q / c1 for h in hs], q, z),
    )]


def _ckm1_sample(rng: random.Random, s: Mapping) -> dict:
    r, M = s["r"], mabs(_ms(s))
    q = qdraw(rng, 0.2, 0.5)
    z = cdraw(rng, 0.2, 0.8)
    out = {"q": q, "z": z}
    for i in range(1, r + 1):
        out[f"a{i}"] = cdraw(rng, 0.3, 3)
        out[f"c{i}"] = cdraw(rng, 0.3, 3)
    for i in range(1, r):
        out[f"b{i}"] = cdraw(rng, 0.3, 3)
    ratio = z * cdraw(rng, 0.05, 0.8)  # target for prod(b) q^{-|m|}/prod(a)
    pa = prod([out[f"a{i}"] for i in range(1, r + 1)])
    pb = prod([out[f"b{i}"] for i in range(1, r)])
    out[f"b{r}"] = ratio * pa * q**M / pb
    for i in range(1, s["s"] + 1):
        out[f"h{i}"] = cdraw(rng, 0.3, 3)
    return out


register(IdentityDescriptor(
    id="ckm_general",
    title="general (r+s) psi (r+s) transformation with parameter pairs h q^m over h",
    free=lambda s: _avec(s, "a", "b", "c") + _hvec(s) + ("z",),
    lhs_template=_ckm1_lhs,
    rhs_template=_ckm1_rhs,
    rhs_idem=lambda s: IdemGroup("c1", tuple(f"c{i}" for i in range(2, s["r"] + 1))),
    shape_space={"r": (1, 3), **_CHU_SHAPE},
    default_shape={"r": 2, "s": 1, "m": (2,)},
    shape_sampler=_shape_chu(with_r=(1, 3)),
    domain=(
        lt("|b1...br q^-|m|/(a1...ar)|<|z|",
           lambda p, s: (prod(_rv(p, s, "b")) * p.q ** (-mabs(_ms(s))) / prod(_rv(p, s, "a")), p.z)),
        lt("|z|<1", lambda p, s: (p.z, 1)),
    ),
    sampler=_ckm1_sample,
))


def _km1_z(p: Bind, s: Mapping) -> Any:
    return p.e * p.q ** (-s["N"]) / (p.a * p.b)


def _km1_lhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, q = p.a, p.b, p.c, p.d, p.q
    hs, ms = _hs(p, s), _ms(s)
    return [term(series=psi([a, b] + [h * q**m for h, m in zip(hs, ms)], [c, d] + hs, q, _km1_z(p, s)))]


def _km1_prefactor(p: Bind, s: Mapping) -> dict:
    a, b, c, d, e, q = p.a, p.b, p.c, p.d, p.e, p.q
    hs, ms = _hs(p, s), _ms(s)
    return dict(
        coeff=(e / q) ** s["N"],
        num=[e / a, e / b, c * q / e, d * q / e],
        den=[q / a, q / b, c, d],
        fnum=[(h * q / e, m) for h, m in zip(hs, ms)],
        fden=[(h, m) for h, m in zip(hs, ms)],
    )


def _km1_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, e, q = p.a, p.b, p.c, p.d, p.e, p.q
    hs, ms = _hs(p, s), _ms(s)
    series = psi([a * q / e, b * q / e] + [h * q ** (1 + m) / e for h, m in zip(hs, ms)],
                 [c * q / e, d * q / e] + [h * q / e for h in hs], q, _km1_z(p, s))
    return [term(series=series, **_km1_prefactor(p, s))]


def _km1r_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, e, q = p.a, p.b, p.c, p.d, p.e, p.q
    hs, ms = _hs(p, s), _ms(s)
    M = mabs(ms)
    series = psi([e / c, e / d] + [e / h for h in hs],
                 [e / a, e / b] + [e * q ** (-m) / h for h, m in zip(hs, ms)], q,
                 c * d * q ** (s["N"] - M) / e)
    return [term(series=series, **_km1_prefactor(p, s))]


def _km1_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng, 0.2, 0.5)
    N, M = s["N"], mabs(_ms(s))
    a, b, c = cdraw(rng, 0.5, 2.5), cdraw(rng, 0.5, 2.5), cdraw(rng, 0.5, 2.5)
    z = cdraw(rng, 0.2, 0.8)  # LHS argument e q^-N/(ab)
    e = z * a * b * q**N
    w = cdraw(rng, 0.05, 0.6)  # cd q^{N-|m|}/e
    d = w * e / (c * q ** (N - M))
    out = {"q": q, "a": a, "b": b, "c": c, "d": d, "e": e}
    for i in range(1, s["s"] + 1):
        out[f"h{i}"] = cdraw(rng, 0.3, 3)
    return out


def _km1_domain() -> tuple:
    return (
        lt("|e/(ab)|<|q^N|", lambda p, s: (p.e / (p.a * p.b), p.q ** s["N"])),
        lt("|q^N|<|e q^|m|/(cd)|", lambda p, s: (p.q ** s["N"], p.e * p.q ** mabs(_ms(s)) / (p.c * p.d))),
    )


register(IdentityDescriptor(
    id="ckm_km1",
    title="(2+s) psi (2+s) transformation with free parameter e",
    free=lambda s: ("a", "b", "c", "d", "e") + _hvec(s),
    lhs_template=_km1_lhs,
    rhs_template=_km1_rhs,
    shape_space={**_CHU_SHAPE, "N": (-3, 3)},
    default_shape={"s": 1, "m": (2,), "N": 1},
    shape_sampler=_shape_chu(with_N=True),
    domain=_km1_domain(),
    sampler=_km1_sample,
))

register(IdentityDescriptor(
    id="ckm_km1_reversed",
    title="(2+s) psi (2+s) transformation with free parameter e, reversed-series form",
    free=lambda s: ("a", "b", "c", "d", "e") + _hvec(s),
    lhs_template=_km1_lhs,
    rhs_template=_km1r_rhs,
    shape_space={**_CHU_SHAPE, "N": (-3, 3)},
    default_shape={"s": 1, "m": (2,), "N": 1},
    shape_sampler=_shape_chu(with_N=True),
    domain=_km1_domain(),
    sampler=_km1_sample,
))


def _km2_lhs(p: Bind, s: Mapping) -> list:
    q = p.q
    hs, ms = _hs(p, s), _ms(s)
    return [term(series=psi([p.a] + [h * q**m for h, m in zip(hs, ms)], [p.b] + hs, q, p.z))]


def _km2_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, z, q = p.a, p.b, p.c, p.z, p.q
    hs, ms = _hs(p, s), _ms(s)
    return [term(
        num=[c / a, b * q / c, a * z, q / (a * z)],
        den=[q / a, b, a * z * q / c, c / (a * z)],
        fnum=[(h * q / c, m) for h, m in zip(hs, ms)],
        fden=[(h, m) for h, m in zip(hs, ms)],
        series=psi([a * q / c] + [h * q ** (1 + m) / c for h, m in zip(hs, ms)],
                   [b * q / c] + [h * q / c for h in hs], q, z),
    )]


def _km2_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng, 0.2, 0.5)
    M = mabs(_ms(s))
    z = cdraw(rng, 0.2, 0.8)
    a = cdraw(rng, 0.5, 2.5)
    b = z * cdraw(rng, 0.05, 0.8) * a * q**M
    out = {"q": q, "a": a, "b": b, "c": cdraw(rng, 0.3, 3), "z": z}
    for i in range(1, s["s"] + 1):
        out[f"h{i}"] = cdraw(rng, 0.3, 3)
    return out


register(IdentityDescriptor(
    id="ckm_km2",
    title="(1+s) psi (1+s) transformation with free parameter c",
    free=lambda s: ("a", "b", "c", "z") + _hvec(s),
    lhs_template=_km2_lhs,
    rhs_template=_km2_rhs,
    shape_space=dict(_CHU_SHAPE),
    default_shape={"s": 1, "m": (2,)},
    shape_sampler=_shape_chu(),
    domain=(
        lt("|b q^-|m|/a|<|z|", lambda p, s: (p.b * p.q ** (-mabs(_ms(s))) / p.a, p.z)),
        lt("|z|<1", lambda p, s: (p.z, 1)),
    ),
    sampler=_km2_sample,
))


def _ul_lhs(z_fn: Callable[[Bind], Any]) -> Callable:
    def f(p: Bind, s: Mapping) -> list:
        a, h, q = p.a, p.h, p.q
        return [term(series=psi([a, h * q], [a * q * q, h], q, z_fn(p)))]

    return f


def _ul1_rhs(p: Bind, s: Mapping) -> list:
    a, h, z, q = p.a, p.h, p.z, p.q
    coeff = ((1 - h / (a * q)) - (1 - h / a) * z / q) / (1 - h)
    return [term(coeff=coeff, num=[q * q, q, a * z, q / (a * z)], den=[q / a, a * q * q, z / q, q * q / z])]


def _ul2_rhs(p: Bind, s: Mapping) -> list:
    a, h, q = p.a, p.h, p.q
    coeff = (1 - h * h / (a * a * q)) / (1 - h)
    return [term(coeff=coeff, num=[q * q, q, -h, -q / h], den=[q / a, a * q * q, -h / (a * q), -a * q * q / h])]


def _ul1_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng, 0.15, 0.5)
    z = q * cdraw(rng, 1.2, 0.85 / abs(q))
    return {"q": q, "a": cdraw(rng, 0.3, 3), "h": cdraw(rng, 0.3, 3), "z": z}


def _ul2_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng, 0.15, 0.5)
    a = cdraw(rng, 0.3, 3)
    t = q * cdraw(rng, 1.2, 0.85 / abs(q))  # h/a
    return {"q": q, "a": a, "h": t * a}


register(IdentityDescriptor(
    id="ckm_2psi2_ul1",
    title="closed form of 2psi2(a, hq; aq^2, h; q, z)",
    free=lambda s: ("a", "h", "z"),
    lhs_template=_ul_lhs(lambda p: p.z),
    rhs_template=_ul1_rhs,
    domain=(lt("|q|<|z|", lambda p, s: (p.q, p.z)), lt("|z|<1", lambda p, s: (p.z, 1))),
    sampler=_ul1_sample,
))

register(IdentityDescriptor(
    id="ckm_2psi2_ul2",
    title="fully factored 2psi2(a, hq; aq^2, h; q, -h/a)",
    free=lambda s: ("a", "h"),
    lhs_template=_ul_lhs(lambda p: -p.h / p.a),
    rhs_template=_ul2_rhs,
    domain=(lt("|q|<|h/a|", lambda p, s: (p.q, p.h / p.a)), lt("|h/a|<1", lambda p, s: (p.h / p.a, 1))),
    sampler=_ul2_sample,
))


def _ckmwp_z(p: Bind, s: Mapping) -> Any:
    r = s["r"]
    return -(p.a**r) * p.q ** (r - mabs(_ms(s))) / prod(p.vec("b", 1, 2 * r))


def _ckmwp_lhs(p: Bind, s: Mapping) -> list:
    a, q, r = p.a, p.q, s["r"]
    bs = p.vec("b", 1, 2 * r)
    hs, ms = _hs(p, s), _ms(s)
    upper = bs + hs + [a * q ** (1 + m) / h for h, m in zip(hs, ms)]
    lower = [a * q / b for b in bs] + [a * q / h for h in hs] + [h * q ** (-m) for h, m in zip(hs, ms)]
    return [term(series=psi(upper, lower, q, _ckmwp_z(p, s)))]


def _ckmwp_rhs(p: Bind, s: Mapping) -> list:
    base = _swpg_rhs(p, s)[0]
    a, q, a1 = p.a, p.q, p.a1
    bs = p.vec("b", 1, 2 * s["r"])
    hs, ms = _hs(p, s), _ms(s)
    series = psi(
        [a1 * b / a for b in bs] + [a1 * h / a for h in hs] + [a1 * q ** (1 + m) / h for h, m in zip(hs, ms)],
        [a1 * q / b for b in bs] + [a1 * q / h for h in hs] + [a1 * h * q ** (-m) / a for h, m in zip(hs, ms)],
        q, _ckmwp_z(p, s),
    )
    return [Term(
        coeff=base.coeff, num=base.num, den=base.den,
        fnum=tuple((a1 * q / h, m) for h, m in zip(hs, ms)) + tuple((a * q / (a1 * h), m) for h, m in zip(hs, ms)),
        fden=tuple((a * q / h, m) for h, m in zip(hs, ms)) + tuple((q / h, m) for h, m in zip(hs, ms)),
        pnum=base.pnum, pden=base.pden, series=series,
    )]


def _ckmwp_sample(rng: random.Random, s: Mapping) -> dict:
    r, M = s["r"], mabs(_ms(s))
    q = qdraw(rng, 0.2, 0.5)
    a = cdraw(rng, 0.3, 3)
    out: dict = {"q": q, "a": a}
    for i in range(1, r + 1):
        out[f"a{i}"] = cdraw(rng, 0.3, 3)
    bs = {f"b{i}": cdraw(rng, 0.4, 2.5) for i in range(1, 2 * r)}
    z = cdraw(rng, 0.05, 0.5)
    bs[f"b{2 * r}"] = -(a**r) * q ** (r - M) / (prod(list(bs.values())) * z)
    out.update(bs)
    for i in range(1, s["s"] + 1):
        out[f"h{i}"] = cdraw(rng, 0.3, 3)
    return out


register(IdentityDescriptor(
    id="ckm_wp_general",
    title="well-poised (2r+2s) psi (2r+2s) transformation with parameter pairs",
    free=lambda s: ("a",) + tuple(f"a{i}" for i in range(1, s["r"] + 1))
    + tuple(f"b{i}" for i in range(1, 2 * s["r"] + 1)) + _hvec(s),
    lhs_template=_ckmwp_lhs,
    rhs_template=_ckmwp_rhs,
    rhs_idem=lambda s: IdemGroup("a1", tuple(f"a{i}" for i in range(2, s["r"] + 1))),
    shape_space={"r": (1, 3), **_CHU_SHAPE},
    default_shape={"r": 2, "s": 1, "m": (1,)},
    shape_sampler=_shape_chu(with_r=(1, 3)),
    domain=(lt("|a^r q^(r-|m|)/(b1...b2r)|<1", lambda p, s: (_ckmwp_z(p, s), 1)),),
    sampler=_ckmwp_sample,
))


def _ckmvwp_z(p: Bind, s: Mapping) -> Any:
    r = s["r"]
    return p.a ** (r - 1) * p.q ** (r - 2 - mabs(_ms(s))) / prod(p.vec("b", 3, 2 * r))


def _ckmvwp_lhs(p: Bind, s: Mapping) -> list:
    a, q, r = p.a, p.q, s["r"]
    bs = p.vec("b", 3, 2 * r)
    hs, ms = _hs(p, s), _ms(s)
    upper = bs + hs + [a * q ** (1 + m) / h for h, m in zip(hs, ms)]
    lower = [a * q / b for b in bs] + [a * q / h for h in hs] + [h * q ** (-m) for h, m in zip(hs, ms)]
    return [term(series=VWPSpec(a, tuple(upper), tuple(lower), q, _ckmvwp_z(p, s), BILATERAL))]


def _ckmvwp_rhs(p: Bind, s: Mapping) -> list:
    a, q, r = p.a, p.q, s["r"]
    a3 = p.a3
    ai = p.vec("a", 4, r)
    bs = p.vec("b", 3, 2 * r)
    hs, ms = _hs(p, s), _ms(s)
    aq = a * q
    sig = a3 * a3 / a
    series = VWPSpec(
        sig,
        tuple([a3 * b / a for b in bs] + [a3 * h / a for h in hs] + [a3 * q ** (1 + m) / h for h, m in zip(hs, ms)]),
        tuple([a3 * q / b for b in bs] + [a3 * q / h for h in hs] + [a3 * h * q ** (-m) / a for h, m in zip(hs, ms)]),
        q, _ckmvwp_z(p, s), BILATERAL,
    )
    return [term(
        num=[aq, q / a] + ai + [q / x for x in ai] + [x / a for x in ai] + [aq / x for x in ai]
        + [a3 * q / b for b in bs] + [aq / (a3 * b) for b in bs],
        den=[q / b for b in bs] + [aq / b for b in bs] + [x / a3 for x in ai] + [a3 * q / x for x in ai]
        + [a3 * x / a for x in ai] + [aq / (a3 * x) for x in ai] + [a3 * a3 * q / a, aq / (a3 * a3)],
        fnum=[(a3 * q / h, m) for h, m in zip(hs, ms)] + [(aq / (a3 * h), m) for h, m in zip(hs, ms)],
        fden=[(aq / h, m) for h, m in zip(hs, ms)] + [(q / h, m) for h, m in zip(hs, ms)],
        series=series,
    )]


def _ckmvwp_sample(rng: random.Random, s: Mapping) -> dict:
    r, M = s["r"], mabs(_ms(s))
    q = qdraw(rng, 0.2, 0.5)
    a = cdraw(rng, 0.3, 3)
    out: dict = {"q": q, "a": a}
    for i in range(3, r + 1):
        out[f"a{i}"] = cdraw(rng, 0.3, 3)
    bs = {f"b{i}": cdraw(rng, 0.4, 2.5) for i in range(3, 2 * r)}
    z = cdraw(rng, 0.05, 0.5)
    bs[f"b{2 * r}"] = a ** (r - 1) * q ** (r - 2 - M) / (prod(list(bs.values())) * z)
    out.update(bs)
    for i in range(1, s["s"] + 1):
        out[f"h{i}"] = cdraw(rng, 0.3, 3)
    return out


register(IdentityDescriptor(
    id="ckm_vwp_general",
    title="very-well-poised 2r psi 2r transformation with parameter pairs (r >= 3)",
    free=lambda s: ("a",) + tuple(f"a{i}" for i in range(3, s["r"] + 1))
    + tuple(f"b{i}" for i in range(3, 2 * s["r"] + 1)) + _hvec(s),
    lhs_template=_ckmvwp_lhs,
    rhs_template=_ckmvwp_rhs,
    rhs_idem=lambda s: IdemGroup("a3", tuple(f"a{i}" for i in range(4, s["r"] + 1))),
    shape_space={"r": (3, 4), **_CHU_SHAPE},
    default_shape={"r": 3, "s": 1, "m": (1,)},
    shape_sampler=_shape_chu(with_r=(3, 4)),
    domain=(lt("|a^(r-1) q^(r-2-|m|)/(b3...b2r)|<1", lambda p, s: (_ckmvwp_z(p, s), 1)),),
    sampler=_ckmvwp_sample,
))


_KM3_MAP = {"b3": "b", "b4": "c", "b5": "d", "b6": "e", "a3": "f"}


def _km3_as_general(p: Bind) -> Bind:
    values = dict(p)
    for new, old in _KM3_MAP.items():
        values[new] = p[old]
    return Bind(values)


def _km3_shape(s: Mapping) -> dict:
    return {**s, "r": 3}


register(IdentityDescriptor(
    id="ckm_km3",
    title="very-well-poised (6+2s) psi (6+2s) transformation with free parameter f",
    free=lambda s: ("a", "b", "c", "d", "e", "f") + _hvec(s),
    lhs_template=lambda p, s: _ckmvwp_lhs(_km3_as_general(p), _km3_shape(s)),
    rhs_template=lambda p, s: _ckmvwp_rhs(_km3_as_general(p), _km3_shape(s)),
    shape_space=dict(_CHU_SHAPE),
    default_shape={"s": 1, "m": (1,)},
    shape_sampler=_shape_chu(),
    domain=(lt("|a^2 q^(1-|m|)/(bcde)|<1",
               lambda p, s: (p.a**2 * p.q ** (1 - mabs(_ms(s))) / (p.b * p.c * p.d * p.e), 1)),),
    sampler=lambda rng, s: _rename(_ckmvwp_sample(rng, _km3_shape(s)), _KM3_MAP),
))


def _rename(values: dict, mapping: Mapping[str, str]) -> dict:
    return {mapping.get(k, k): v for k, v in values.items()}


# -- kernel identities ----------------------------------------------------

def key1_lhs(p: Bind, s: Mapping, stop: int | None = None) -> list:
    a, b, c, q, n = p.a, p.b, p.c, p.q, s["n"]
    return [term(
        num=[c * q / b, q / a, q, a * q / (b * c)],
        den=[c * q / a, q / b, a * q / b, q / c],
        series=ShiftedSum(
            q, a / b,
            ((c / a, 0, 1, 1), (b / a, 0, 1, 1), (c, n, 1, 1), (a, n, -1, 1),
             (q, 0, 1, -1), (c * q / b, 0, 1, -1), (q, n, 1, -1), (a * q / c, n, -1, -1)),
            sigma=c / a, stop=stop,
        ),
    )]


def _key1_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, q, n = p.a, p.b, p.c, p.q, s["n"]
    return [term(coeff=(a / b) ** n, fnum=[(b, n), (c, n)], fden=[(a * q / b, n), (a * q / c, n)])]


def _kernel_shape(rng: random.Random) -> dict:
    return {"n": rng.randint(-5, 5)}


def _key1_sample(rng: random.Random, s: Mapping) -> dict:
    q = qdraw(rng, 0.2, 0.5)
    a = cdraw(rng, 0.3, 2)
    b = cdraw(rng, 0.5, 2.5)
    z = cdraw(rng, 0.05, 0.5)  # aq/(bc)
    return {"q": q, "a": a, "b": b, "c": a * q / (b * z)}


register(IdentityDescriptor(
    id="kernel_key1",
    title="finite-n kernel whose bilateral extension gives the 6psi6 summation",
    free=lambda s: ("a", "b", "c"),
    lhs_template=key1_lhs,
    rhs_template=_key1_rhs,
    shape_space={"n": (-5, 5)},
    default_shape={"n": 2},
    shape_sampler=_kernel_shape,
    domain=(lt("|aq/(bc)|<1", lambda p, s: (p.a * p.q / (p.b * p.c), 1)),),
    sampler=_key1_sample,
    kernel=True,
))


def _k87_lhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, e, q, n = p.a, p.b, p.c, p.d, p.e, p.q, s["n"]
    cde = c * d * e
    sig = a * b * q / cde
    return [term(
        num=[b * q / d, a * q * q / cde, a * a * q * q / cde, b * q / e, a * q / (b * e), c, c / a, a * q / (b * d)],
        den=[a * b * q * q / cde, c / b, q / d, a * q / d, b * c / a, a * a * q * q / (b * cde), q / e, a * q / e],
        series=ShiftedSum(
            q, b * cde / (a * a * q),
            ((sig, 0, 1, 1), (a * q / (d * e), 0, 1, 1), (a * q / (c * e), 0, 1, 1), (a * q / (c * d), 0, 1, 1),
             (q, 0, 1, -1), (b * q / c, 0, 1, -1), (b * q / d, 0, 1, -1), (b * q / e, 0, 1, -1),
             (b, n, 1, 1), (cde / (a * q), n, -1, 1), (a * a * q * q / cde, n, 1, -1), (a * q / b, n, -1, -1)),
            sigma=sig,
        ),
    )]


def _k87_rhs(p: Bind, s: Mapping) -> list:
    a, b, c, d, e, q, n = p.a, p.b, p.c, p.d, p.e, p.q, s["n"]
    aq = a * q
    return [term(fnum=[(b, n), (c, n), (d, n), (e, n)], fden=[(aq / b, n), (aq / c, n), (aq / d, n), (aq / e, n)])]


register(IdentityDescriptor(
    id="kernel_87ntgl2",
    title="finite-n two-term kernel behind the nonterminating 8phi7 summation",
    free=lambda s: ("a", "b", "c", "d", "e"),
    lhs_template=_k87_lhs,
    rhs_template=_k87_rhs,
    lhs_idem=lambda s: IdemGroup("b", ("c",)),
    shape_space={"n": (-5, 5)},
    default_shape={"n": 2},
    shape_sampler=_kernel_shape,
    sampler=lambda rng, s: {"q": qdraw(rng, 0.2, 0.5), "a": cdraw(rng, 0.3, 2.5), "b": cdraw(rng, 0.3, 2.5),
                            "c": cdraw(rng, 0.3, 2.5), "d": cdraw(rng, 0.3, 2.5), "e": cdraw(rng, 0.3, 2.5)},
    kernel=True,
))


def _k32_lhs(p: Bind, s: Mapping) -> list:
    a1, a2, b1, b2, q, n = p.a1, p.a2, p.b1, p.b2, p.q, s["n"]
    return [term(
        num=[b1 * b2 / a2, b2 / a1, a2, b1 / a1],
        den=[a2 / a1, b1, b1 * b2 / (a1 * a2), b2],
        series=ShiftedSum(
            q, q,
            ((b1 / a2, 0, 1, 1), (b2 / a2, 0, 1, 1), (a1, n, 1, 1),
             (q, 0, 1, -1), (a1 * q / a2, 0, 1, -1), (b1 * b2 / a2, n, 1, -1)),
        ),
    )]


def _k32_rhs(p: Bind, s: Mapping) -> list:
    n = s["n"]
    return [term(fnum=[(p.a1, n), (p.a2, n)], fden=[(p.b1, n), (p.b2, n)])]


register(IdentityDescriptor(
    id="kernel_key32",
    title="finite-n kernel behind the nonterminating 3phi2 summation",
    free=lambda s: ("a1", "a2", "b1", "b2"),
    lhs_template=_k32_lhs,
    rhs_template=_k32_rhs,
    lhs_idem=lambda s: IdemGroup("a1", ("a2",)),
    shape_space={"n": (-5, 5)},
    default_shape={"n": 2},
    shape_sampler=_kernel_shape,
    sampler=lambda rng, s: {"q": qdraw(rng, 0.2, 0.5), "a1": cdraw(rng, 0.3, 2.5), "a2": cdraw(rng, 0.3, 2.5),
                            "b1": cdraw(rng, 0.3, 2.5), "b2": cdraw(rng, 0.3, 2.5)},
    kernel=True,
))


# ======================================================================
# Catalog operations
# ======================================================================

def catalog() -> list[IdentityDescriptor]:
    """All descriptors, sorted by id."""
    return [CATALOG[k] for k in sorted(CATALOG)]


def get(identity: str | IdentityDescriptor) -> IdentityDescriptor:
    if isinstance(identity, IdentityDescriptor):
        return identity
    try:
        return CATALOG[identity]
    except KeyError:
        raise KeyError(f"unknown identity {identity!r}") from None


def _modulus(x: Any) -> float:
    return float(abs(x))


def constraints_check(identity: str | IdentityDescriptor, point: Point, tower: Tower | None = None,
                      margin: float = 1.0) -> ConstraintReport:
    """Check equalities (exact or 1e-12 relative) and strict modulus inequalities.

    A failing modulus condition is waived when every series of both sides is a
    finite sum.  ``margin`` < 1 tightens the inequalities (used by sampling).
    """
    d = get(identity)
    tower = tower or Tower.parse("double")
    p = Bind(point.params)
    items = []
    ok = True
    with tower.context():
        for c in d.equalities:
            left, right = c.fn(p, point.shape)
            if tower.is_exact:
                good = left == right
                gap = 0.0 if good else float(abs(left - right) / max(abs(left), abs(right)))
            else:
                gap = float(abs(left - right) / max(abs(left), abs(right), 1e-300))
                good = gap <= EQUALITY_TOL
            items.append({"constraint": c.text, "ok": good, "gap": gap})
            ok &= good
        domain_ok = True
        for c in d.domain:
            small, large = c.fn(p, point.shape)
            ms, ml = abs(small), abs(large)
            good = ms < margin * ml if margin != 1.0 else ms < ml
            items.append({"constraint": c.text, "ok": bool(good), "ratio": float(ms / ml) if ml else math.inf})
            domain_ok &= bool(good)
    via = False
    if not domain_ok:
        lhs = d.lhs_terms(point)
        rhs = d.rhs_terms(point)
        if all_finite(lhs, tower) and all_finite(rhs, tower):
            via = True
        else:
            ok = False
    return ConstraintReport(bool(ok), items, via)


def lhs(identity: str | IdentityDescriptor, point: Point, opts: EvalOptions) -> Any:
    return side_value(identity, point, opts, "lhs")[0]


def rhs(identity: str | IdentityDescriptor, point: Point, opts: EvalOptions) -> Any:
    return side_value(identity, point, opts, "rhs")[0]


def side_value(identity: str | IdentityDescriptor, point: Point, opts: EvalOptions, side: str) -> tuple[Any, list]:
    """Evaluate one side in ``opts.tower`` after the degenerate-point guard."""
    d = get(identity)
    pt = point.converted(opts.tower)
    with opts.tower.context():
        terms = d.lhs_terms(pt) if side == "lhs" else d.rhs_terms(pt)
        q = pt.params["q"]
        guard(terms, q, opts.tower)
        res = evaluate_terms(terms, q, opts)
    return res.value, res.diagnostics


def full_point(identity: str | IdentityDescriptor, values: Mapping[str, Any], shape: Mapping | None,
               tower: Tower) -> Point:
    """Convert values to ``tower`` and fill derived parameters using tower arithmetic."""
    d = get(identity)
    shape = dict(d.default_shape if shape is None else shape)
    if "m" in shape:
        shape["m"] = tuple(shape["m"])
    with tower.context():
        conv = {k: tower.convert(v) for k, v in values.items()}
        conv = d.derive(conv, shape)
    missing = [name for name in d.params(shape) if name not in conv]
    if missing:
        raise SymbolMissing(f"point lacks parameters {missing}")
    return Point(conv, shape)


def point_rng(identity_id: str, seed: int, index: int) -> random.Random:
    """Deterministic per-point generator (string seeding hashes with SHA-512)."""
    return random.Random(f"{identity_id}:{seed}:{index}")


def sample_shape(identity: str | IdentityDescriptor, rng: random.Random) -> dict:
    d = get(identity)
    if d.shape_sampler is None:
        return dict(d.default_shape)
    return d.shape_sampler(rng)


def sample_point(identity: str | IdentityDescriptor, seed: int, tower: Tower | None = None, index: int = 0,
                 shape: Mapping | None = None, rng: random.Random | None = None) -> Point:
    """Seeded point satisfying equalities exactly in ``tower`` and modulus conditions with margin.

    Float towers draw complex doubles (converted exactly into big floats); the
    exact tower draws small rationals and is only offered for identities with an
    exact sampler.
    """
    d = get(identity)
    tower = tower or Tower.parse("double")
    rng = rng or point_rng(d.id, seed, index)
    if shape is None:
        shape = sample_shape(d, rng)
    shape = dict(shape)
    if "m" in shape:
        shape["m"] = tuple(shape["m"])
    sampler = d.sampler
    if tower.is_exact:
        if d.exact_sampler is None:
            raise SamplingExhausted(f"{d.id} has no exact-mode sampler (needs infinite products)")
        sampler = d.exact_sampler
    for _ in range(MAX_REJECTIONS):
        values = sampler(rng, shape)
        try:
            pt = full_point(d, values, shape, tower)
        except ZeroDivisionError:
            continue
        if not _acceptable(d, pt, tower):
            continue
        return pt
    raise SamplingExhausted(f"no admissible point for {d.id} after {MAX_REJECTIONS} draws")


def _acceptable(d: IdentityDescriptor, pt: Point, tower: Tower) -> bool:
    try:
        rep = constraints_check(d, pt, tower, margin=SAMPLE_MARGIN)
        if not rep.ok or rep.via_termination:
            return False
        with tower.context():
            terms = d.lhs_terms(pt) + d.rhs_terms(pt)
            dist, _ = pole_distance(terms, pt.params["q"], tower)
        if tower.is_exact:
            return dist > 0 and _exact_nondegenerate(terms, pt.params["q"])
        return dist >= SAMPLE_POLE_RADIUS
    except (ZeroDivisionError, DegeneratePoint, OverflowError, ValueError):
        return False


def _exact_nondegenerate(terms: Sequence[Term], q: Any) -> bool:
    """In exact mode reject any exactly vanishing denominator factor."""
    from qbil.qfactorial import POLE, qpoch

    for t in terms:
        for x, n in t.fden:
            v = qpoch(x, q, n)
            if v is POLE or v == 0:
                return False
        for x, n in t.fnum:
            if qpoch(x, q, n) is POLE:
                return False
        s = t.series
        if isinstance(s, (SeriesSpec, VWPSpec)):
            for b in s.lower:
                for j in range(0, 80):
                    if b * q**j == 1:
                        return False
            if isinstance(s, VWPSpec) and s.sigma == 1:
                return False
    return True


# -- poisedness --------------------------------------------------------

def poisedness(spec: AnySpec, tower: Tower | None = None) -> dict:
    """Balanced / well-poised / very-well-poised flags of a series spec.

    Very-well-poised specs stored as VWPSpec are checked on their explicit
    parameter pattern; for plain specs the pair condition a2 = -a3 with
    a2^2 = q^2 a1 is tested without square roots.
    """
    tower = tower or Tower.parse("double")

    def same(x: Any, y: Any) -> bool:
        if tower.is_exact:
            return x == y
        return abs(x - y) <= 1e-12 * max(abs(x), abs(y), 1e-300)

    q = spec.q
    if isinstance(spec, VWPSpec):
        upper = list(spec.upper)
        lower = list(spec.lower)
        sig = spec.sigma
        if spec.kind == UNILATERAL:
            wp = bool(upper) and same(upper[0], sig) and len(lower) == len(upper) - 1 and all(
                same(x * y, sig * q) for x, y in zip(upper[1:], lower))
        else:
            wp = len(lower) == len(upper) and all(same(x * y, sig * q) for x, y in zip(upper, lower))
        balanced = _balanced(spec, same, extra_upper=-q * q * sig, extra_lower=-sig)
        return {"balanced": balanced, "well_poised": wp, "very_well_poised": wp}
    upper, lower = list(spec.upper), list(spec.lower)
    if spec.kind == UNILATERAL:
        if not upper:
            return {"balanced": False, "well_poised": False, "very_well_poised": False}
        a1 = upper[0]
        wp = len(lower) == len(upper) - 1 and all(same(a1 * q, x * y) for x, y in zip(upper[1:], lower))
        vwp = wp and len(upper) >= 3 and same(upper[1], -upper[2]) and same(upper[1] ** 2, q * q * a1)
    else:
        wp = len(lower) == len(upper) and bool(upper) and all(
            same(upper[0] * lower[0], x * y) for x, y in zip(upper, lower))
        vwp = wp and len(upper) >= 2 and same(upper[0], -upper[1]) and same(upper[0], q * lower[0]) and same(
            upper[1], -q * lower[1])
    return {"balanced": _balanced(spec, same), "well_poised": wp, "very_well_poised": vwp}


def _balanced(spec: AnySpec, same: Callable, extra_upper: Any = 1, extra_lower: Any = 1) -> bool:
    if spec.kind != UNILATERAL or not same(spec.z, spec.q):
        return False
    if len(spec.upper) + (2 if isinstance(spec, VWPSpec) else 0) != spec.r or spec.r != spec.s + 1:
        return False
    return same(prod(spec.lower) * extra_lower, prod(spec.upper) * extra_upper * spec.q)


# -- specializations ---------------------------------------------------

@dataclass(frozen=True)
class Specialization:
    """``lift`` maps a point of ``target`` to the matching point of the source identity."""

    source: str
    name: str
    target: str
    lift: Callable[[Point], Point]
    float_only: bool = False
    form: str | None = None

    @property
    def evaluated(self) -> str:
        """Descriptor whose sides are evaluated at the lifted point."""
        return self.form or self.source


SPECIALIZATIONS: dict[tuple, Specialization] = {}


def _spec(source: str, name: str, target: str, lift: Callable[[Point], Point], **kw: Any) -> None:
    SPECIALIZATIONS[(source, name)] = Specialization(source, name, target, lift, **kw)


def _with(pt: Point, extra: Mapping[str, Any], shape: Mapping | None = None) -> Point:
    return Point({**pt.params, **extra}, dict(pt.shape if shape is None else shape))


_spec("ramanujan_1psi1", "b=q", "q_binomial", lambda t: _with(t, {"b": t.params["q"]}))
_spec("bailey_6psi6", "e=a", "rogers_6phi5", lambda t: _with(t, {"e": t.params["a"]}))


def _lift_swpg(t: Point) -> Point:
    r = t.shape["r"]
    return _with(t, {f"a{i}": t.params[f"b{i}"] for i in range(1, r + 1)})


_spec("slater_wp_2r_general", "a_i=b_i", "slater_wp_2r", _lift_swpg)


def _lift_c_eq_a(t: Point) -> Point:
    r = t.shape["r"]
    return _with(t, {f"c{i}": t.params[f"a{i}"] for i in range(1, r + 1)})


def _lift_c_eq_aq(t: Point) -> Point:
    r = t.shape["r"]
    q = t.params["q"]
    return _with(t, {f"c{i}": t.params[f"a{i}"] * q for i in range(1, r + 1)})


_spec("slater_rpsir_general_reversed", "c=a", "slater_rpsir", _lift_c_eq_a)
_spec("slater_rpsir_general", "c=aq", "slater_rpsir", _lift_c_eq_aq)
# c_i = a_i is the reduction of the reversed-series form of the same transformation.
_spec("slater_rpsir_general", "c=a", "slater_rpsir", _lift_c_eq_a, form="slater_rpsir_general_reversed")


def _lift_s0(t: Point) -> Point:
    return _with(t, {}, {**t.shape, "s": 0, "m": ()})


_spec("ckm_general", "s=0", "slater_rpsir_general", _lift_s0)


def _lift_e_bq(t: Point) -> Point:
    return _with(t, {"e": t.params["b"] * t.params["q"]})


_spec("ckm_km1_reversed", "e=bq", "chu_2s_tf", _lift_e_bq)


def _lift_km3(t: Point) -> Point:
    return _with(t, {"f": t.params["d"], "e": t.params["a"] / t.params["d"]})


_spec("ckm_km3", "f=d,e=a/d", "chu_vwp_sum", _lift_km3)


def _lift_87nt_jackson(t: Point) -> Point:
    p, n = t.params, t.shape["n"]
    q = p["q"]
    e = p["a"] ** 2 * q ** (1 + n) / (p["b"] * p["c"] * p["d"])
    return Point({**p, "e": e, "f": q ** (-n)}, {})


_spec("bailey_8phi7_nt", "f=q^-n", "jackson_8phi7", _lift_87nt_jackson)


def _lift_vwp_from_wp(t: Point) -> Point:
    """slater_vwp_2r at shape r+2 with b_{2r+3}, b_{2r+4} = +-sqrt(a) from slater_wp_2r at r."""
    r = t.shape["r"]
    a = t.params["a"]
    root = _sqrt(a)
    vals = {"q": t.params["q"], "a": a}
    for i in range(1, 2 * r + 1):
        vals[f"b{i + 2}"] = t.params[f"b{i}"]
    vals[f"b{2 * r + 3}"] = root
    vals[f"b{2 * r + 4}"] = -root
    return Point(vals, {"r": r + 2})


def _sqrt(x: Any) -> Any:
    import mpmath

    if isinstance(x, (mpmath.mpc, mpmath.mpf)):
        return mpmath.sqrt(x)
    return cmath.sqrt(x)


_spec("slater_vwp_2r", "b=+-sqrt(a)", "slater_wp_2r", _lift_vwp_from_wp, float_only=True)


def _lift_wp_from_vwp(t: Point) -> Point:
    """slater_wp_2r at shape r with b_{2r-1}, b_{2r} = +-q sqrt(a) from slater_vwp_2r at r."""
    r = t.shape["r"]
    a, q = t.params["a"], t.params["q"]
    root = _sqrt(a)
    vals = {"q": q, "a": a}
    for i in range(3, 2 * r + 1):
        vals[f"b{i - 2}"] = t.params[f"b{i}"]
    vals[f"b{2 * r - 1}"] = q * root
    vals[f"b{2 * r}"] = -q * root
    return Point(vals, {"r": r})


_spec("slater_wp_2r", "b=+-q*sqrt(a)", "slater_vwp_2r", _lift_wp_from_vwp, float_only=True)


def specialize(identity: str, map_name: str) -> tuple[IdentityDescriptor, Specialization]:
    try:
        sp = SPECIALIZATIONS[(identity, map_name)]
    except KeyError:
        known = sorted(name for (src, name) in SPECIALIZATIONS if src == identity)
        raise UnknownMap(f"no map {map_name!r} for {identity!r}; known: {known}") from None
    return CATALOG[sp.target], sp


def lift_point(sp: Specialization, target_point: Point, tower: Tower) -> Point:
    """Source-form point matching ``target_point`` (computed in ``tower``)."""
    with tower.context():
        lifted = sp.lift(target_point.converted(tower))
    return full_point(sp.evaluated, lifted.params, lifted.shape, tower)


def specializations() -> list[Specialization]:
    return [SPECIALIZATIONS[k] for k in sorted(SPECIALIZATIONS)]
