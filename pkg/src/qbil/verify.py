"""Identity checks: residual reports, seeded sweeps, exact and certified verification."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from qbil.errors import (
    CertificationTooTight,
    DegeneratePoint,
    QbilError,
    SamplingExhausted,
    SpecError,
)
from qbil.identities import (
    Bind,
    IdentityDescriptor,
    Point,
    constraints_check,
    full_point,
    get,
    key1_lhs,
    point_rng,
    sample_point,
    sample_shape,
    side_value,
)
from qbil.numerics import EXACT, Tower, encode_number, relative_residual
from qbil.qfactorial import POLE, qpoch
from qbil.series import (
    BILATERAL,
    EvalOptions,
    detect_termination,
    forward_part,
    partial_terms,
    reverse_bilateral,
    tail_bound,
)
from qbil.terms import ShiftedSum, Term

PASS = "PASS"
FAIL = "FAIL"
CONSTRAINT_VIOLATION = "CONSTRAINT_VIOLATION"
DEGENERATE = "DEGENERATE"
ERROR = "ERROR"


# -- policy ------------------------------------------------------------

@dataclass(frozen=True)
class Policy:
    tower: str
    residual_tol: float


_DOUBLE = "double"
_BIG = "big(50)"

# Default tower and acceptance threshold per identity.  Identities whose
# double-precision evaluation loses digits to cancellation run in big floats.
POLICY: dict[str, Policy] = {
    "q_binomial": Policy(_DOUBLE, 1e-12),
    "q_binomial_terminating": Policy("exact", 0.0),
    "pfaff_saalschutz": Policy("exact", 0.0),
    "jackson_8phi7": Policy("exact", 0.0),
    "ramanujan_1psi1": Policy(_DOUBLE, 1e-12),
    "heine_euler": Policy(_DOUBLE, 1e-12),
    "pfaff_saalschutz_nt": Policy(_DOUBLE, 1e-12),
    "rogers_6phi5": Policy(_DOUBLE, 1e-10),
    "bailey_6psi6": Policy(_DOUBLE, 1e-10),
    "bailey_8phi7_nt": Policy(_BIG, 1e-10),
    "bailey_8phi7_tf": Policy(_BIG, 1e-10),
    "mjackson_8psi8": Policy(_BIG, 1e-9),
    "tenpsi10": Policy(_BIG, 1e-9),
    "slater_vwp_2r": Policy(_BIG, 1e-8),
    "slater_wp_2r": Policy(_BIG, 1e-8),
    "slater_wp_2r_general": Policy(_BIG, 1e-8),
    "slater_rpsir": Policy(_BIG, 1e-9),
    "slater_rpsir_general": Policy(_BIG, 1e-8),
    "slater_rpsir_general_reversed": Policy(_BIG, 1e-8),
    "chu_2s_tf": Policy(_BIG, 1e-9),
    "chu_vwp_sum": Policy(_BIG, 1e-9),
    "ckm_general": Policy(_BIG, 1e-9),
    "ckm_km1": Policy(_BIG, 1e-9),
    "ckm_km1_reversed": Policy(_BIG, 1e-9),
    "ckm_km2": Policy(_BIG, 1e-9),
    "ckm_2psi2_ul1": Policy(_BIG, 1e-9),
    "ckm_2psi2_ul2": Policy(_BIG, 1e-9),
    "ckm_wp_general": Policy(_BIG, 1e-9),
    "ckm_vwp_general": Policy(_BIG, 1e-9),
    "ckm_km3": Policy(_BIG, 1e-9),
    "kernel_key1": Policy(_BIG, 1e-11),
    "kernel_87ntgl2": Policy(_BIG, 1e-11),
    "kernel_key32": Policy(_BIG, 1e-11),
}


def policy(identity: str) -> Policy:
    return POLICY.get(identity, Policy(_DOUBLE, 1e-12))


def options_for(identity: str, tower: Tower | None = None, residual_tol: float | None = None,
                max_terms: int | None = None) -> EvalOptions:
    """Evaluation options: explicit arguments win over the identity's policy."""
    pol = policy(identity)
    tower = tower or Tower.parse(pol.tower)
    base = tower.default_tolerance()
    if residual_tol is None and not tower.is_exact and tower.label == pol.tower:
        residual_tol = pol.residual_tol
    tol = base if residual_tol is None or tower.is_exact else base.with_residual(residual_tol)
    kw = {} if max_terms is None else {"max_terms": max_terms}
    return EvalOptions(tower, tol, **kw)


# -- reports -----------------------------------------------------------

@dataclass
class VerificationReport:
    identity: str
    point: Point | None
    status: str
    tower: str
    seed: int | None = None
    index: int | None = None
    lhs: Any = None
    rhs: Any = None
    abs_residual: Any = None
    rel_residual: Any = None
    error_kind: str | None = None
    message: str = ""
    diagnostics: dict = field(default_factory=dict)
    certificate: dict | None = None

    @property
    def status_label(self) -> str:
        return f"ERROR({self.error_kind})" if self.status == ERROR else self.status

    @property
    def skipped(self) -> bool:
        return self.status == DEGENERATE or self.error_kind == "SamplingExhausted"

    @property
    def failed(self) -> bool:
        return not self.skipped and self.status != PASS

    def to_json(self) -> dict:
        out: dict = {"identity": self.identity, "seed": self.seed, "index": self.index}
        if self.point is not None:
            out["shape"] = {k: list(v) if isinstance(v, tuple) else v for k, v in self.point.shape.items()}
            out["point"] = {k: encode_number(v) for k, v in sorted(self.point.params.items())}
        else:
            out["shape"], out["point"] = None, None
        out["tower"] = self.tower
        out["lhs"] = None if self.lhs is None else encode_number(self.lhs)
        out["rhs"] = None if self.rhs is None else encode_number(self.rhs)
        out["abs_residual"] = _enc_residual(self.abs_residual)
        out["rel_residual"] = _enc_residual(self.rel_residual)
        out["status"] = self.status_label
        if self.message:
            out["message"] = self.message
        out["diagnostics"] = self.diagnostics
        if self.certificate is not None:
            out["certificate"] = self.certificate
        return out


def _enc_residual(x: Any) -> Any:
    if x is None:
        return None
    if isinstance(x, Fraction):
        return encode_number(x)
    return float(x)


@dataclass
class SweepSummary:
    identity: str
    n_points: int
    passed: int
    failed: int
    skipped: int
    max_residual: float
    wall_time: float = 0.0

    def to_json(self) -> dict:
        # wall time is left out so that report files are byte-identical across runs
        return {"identity": self.identity, "n_points": self.n_points, "pass": self.passed,
                "fail": self.failed, "skip": self.skipped, "max_residual": self.max_residual}


# -- single checks -----------------------------------------------------

def check_identity(identity: str | IdentityDescriptor, point: Point, opts: EvalOptions | None = None,
                   seed: int | None = None, index: int | None = None) -> VerificationReport:
    """Evaluate both sides at ``point`` and classify the outcome; never raises on bad math."""
    d = get(identity)
    opts = opts or options_for(d.id)
    tower = opts.tower
    rep = VerificationReport(d.id, point, PASS, tower.label, seed, index)
    try:
        pt = point.converted(tower)
        cons = constraints_check(d, pt, tower)
    except QbilError as exc:
        return _error(rep, exc)
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        rep.status, rep.message = DEGENERATE, f"{type(exc).__name__}: {exc}"
        return rep
    rep.diagnostics["constraints"] = cons.items
    if cons.via_termination:
        rep.diagnostics["via_termination"] = True
    if not cons.ok:
        rep.status = CONSTRAINT_VIOLATION
        rep.message = "; ".join(item["constraint"] for item in cons.failed())
        return rep
    try:
        lv, ldiag = side_value(d, pt, opts, "lhs")
        rv, rdiag = side_value(d, pt, opts, "rhs")
    except DegeneratePoint as exc:
        rep.status, rep.message = DEGENERATE, str(exc)
        return rep
    except QbilError as exc:
        return _error(rep, exc)
    except (ZeroDivisionError, OverflowError) as exc:
        rep.status, rep.message = DEGENERATE, f"{type(exc).__name__}: {exc}"
        return rep
    rep.lhs, rep.rhs = lv, rv
    rep.diagnostics["lhs"], rep.diagnostics["rhs"] = ldiag, rdiag
    tol = opts.tolerance
    with tower.context():
        if tower.is_exact:
            rep.abs_residual = abs(lv - rv)
            rep.rel_residual = Fraction(0) if lv == rv else rep.abs_residual / max(abs(lv), abs(rv))
            ok = lv == rv
        else:
            rep.abs_residual = float(abs(lv - rv))
            rep.rel_residual = relative_residual(lv, rv, tower, tol.zero_floor)
            ok = rep.rel_residual < tol.residual_tol
    rep.diagnostics["residual_tol"] = 0.0 if tower.is_exact else tol.residual_tol
    rep.status = PASS if ok else FAIL
    return rep


def _error(rep: VerificationReport, exc: Exception) -> VerificationReport:
    rep.status = ERROR
    rep.error_kind = getattr(exc, "kind", type(exc).__name__)
    rep.message = str(exc)
    return rep


def check_sample(identity: str, seed: int, index: int = 0, opts: EvalOptions | None = None,
                 limits: Mapping[str, int] | None = None) -> VerificationReport:
    """Sample point ``index`` of ``seed`` and check it; sampling failures become skips."""
    d = get(identity)
    opts = opts or options_for(d.id)
    try:
        rng = point_rng(d.id, seed, index)
        shape = _limited_shape(d, rng, limits)
        pt = sample_point(d, seed, opts.tower, index=index, shape=shape, rng=rng)
    except SamplingExhausted as exc:
        return _error(VerificationReport(d.id, None, ERROR, opts.tower.label, seed, index), exc)
    return check_identity(d, pt, opts, seed, index)


def _limited_shape(d: IdentityDescriptor, rng: Any, limits: Mapping[str, int] | None) -> dict:
    """Draw a shape, redrawing while it exceeds the r/s/m limits."""
    for _ in range(200):
        shape = sample_shape(d, rng)
        if not limits or _within(shape, limits):
            return shape
    raise SamplingExhausted(f"no shape of {d.id} within limits {dict(limits)}")


def _within(shape: Mapping, limits: Mapping[str, int]) -> bool:
    if "r_max" in limits and shape.get("r", 0) > limits["r_max"]:
        return False
    if "s_max" in limits and shape.get("s", 0) > limits["s_max"]:
        return False
    if "m_max" in limits and any(m > limits["m_max"] for m in shape.get("m", ())):
        return False
    return True


# -- sweeps ------------------------------------------------------------

def _sweep_job(args: tuple) -> dict:
    identity, seed, index, tower_label, residual_tol, max_terms, limits = args
    tower = Tower.parse(tower_label) if tower_label else None
    opts = options_for(identity, tower, residual_tol, max_terms)
    return check_sample(identity, seed, index, opts, limits).to_json()


def sweep(identity: str | IdentityDescriptor, n_points: int, seed: int, tower: Tower | None = None,
          residual_tol: float | None = None, workers: int = 1, max_terms: int | None = None,
          limits: Mapping[str, int] | None = None) -> tuple[list[dict], SweepSummary]:
    """Check ``n_points`` seeded points; reports come back ordered by index.

    Reports are returned as JSON-ready dicts so that results computed in worker
    processes and in-process are byte-for-byte the same.
    """
    if n_points < 1:
        raise SpecError("n_points must be at least 1")
    d = get(identity)
    start = time.perf_counter()
    jobs = [(d.id, seed, i, tower.label if tower else None, residual_tol, max_terms,
             dict(limits) if limits else None) for i in range(n_points)]
    reports = _run(jobs, workers)
    summary = summarize(d.id, reports)
    summary.wall_time = time.perf_counter() - start
    return reports, summary


def sweep_many(identities: Sequence[str], n_points: int, seed: int, tower: Tower | None = None,
               residual_tol: float | None = None, workers: int = 1, max_terms: int | None = None,
               limits: Mapping[str, int] | None = None) -> tuple[list[dict], list[SweepSummary]]:
    """Sweep several identities with one worker pool."""
    if n_points < 1:
        raise SpecError("n_points must be at least 1")
    start = time.perf_counter()
    jobs = [(get(i).id, seed, k, tower.label if tower else None, residual_tol, max_terms,
             dict(limits) if limits else None) for i in identities for k in range(n_points)]
    reports = _run(jobs, workers)
    summaries = []
    for j, ident in enumerate(identities):
        summaries.append(summarize(get(ident).id, reports[j * n_points:(j + 1) * n_points]))
    if summaries:
        summaries[-1].wall_time = time.perf_counter() - start
    return reports, summaries


def _run(jobs: list, workers: int) -> list[dict]:
    if workers <= 1 or len(jobs) <= 1:
        return [_sweep_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so the output is index-ordered
        return list(pool.map(_sweep_job, jobs, chunksize=max(1, len(jobs) // (8 * workers))))


def summarize(identity: str, reports: Iterable[dict]) -> SweepSummary:
    reports = list(reports)
    passed = sum(1 for r in reports if r["status"] == PASS)
    skipped = sum(1 for r in reports if _is_skip(r))
    worst = 0.0
    for r in reports:
        rel = r.get("rel_residual")
        if isinstance(rel, float) and math.isfinite(rel):
            worst = max(worst, rel)
    return SweepSummary(identity, len(reports), passed, len(reports) - passed - skipped, skipped, worst)


def _is_skip(r: Mapping) -> bool:
    return r["status"] in (DEGENERATE, "ERROR(SamplingExhausted)")


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


# -- kernels -----------------------------------------------------------

def check_kernel(identity: str, n_range: Iterable[int], point: Point,
                 opts: EvalOptions | None = None) -> list[VerificationReport]:
    """One report per integer n, reusing the parameter values of ``point``."""
    d = get(identity)
    if not d.kernel:
        raise SpecError(f"{d.id} is not a kernel identity")
    out = []
    for n in n_range:
        pt = Point(dict(point.params), {**point.shape, "n": n})
        out.append(check_identity(d, pt, opts))
    return out


@dataclass(frozen=True)
class Agreement:
    """Relative gaps between the sides of two identities evaluated at matching points."""

    lhs: float
    rhs: float
    first_residual: float

    @property
    def worst(self) -> float:
        return max(self.lhs, self.rhs)


def compare_identities(first: str, first_point: Point, second: str, second_point: Point,
                       opts: EvalOptions) -> Agreement:
    """Evaluate both sides of two identities whose LHS (and hence RHS) should coincide."""
    tower = opts.tower
    vals = []
    for ident, pt in ((first, first_point), (second, second_point)):
        pt = pt.converted(tower)
        vals.append([side_value(ident, pt, opts, side)[0] for side in ("lhs", "rhs")])
    (l1, r1), (l2, r2) = vals
    floor = opts.tolerance.zero_floor
    with tower.context():
        return Agreement(
            relative_residual(l1, l2, tower, floor),
            relative_residual(r1, r2, tower, floor),
            relative_residual(l1, r1, tower, floor),
        )


def check_specialization(source: str, map_name: str, seed: int, index: int = 0,
                         opts: EvalOptions | None = None) -> Agreement:
    """Sample a point of the reduced identity, lift it, and compare both forms side by side."""
    from qbil.identities import lift_point, specialize

    target, sp = specialize(source, map_name)
    opts = opts or EvalOptions(Tower.parse("big(50)"))
    tp = sample_point(target, seed, opts.tower, index=index)
    full = lift_point(sp, tp, opts.tower)
    return compare_identities(sp.evaluated, full, target.id, tp, opts)


def interchange_point(seed: int, index: int = 0) -> Point:
    """Sample (a, b, c, d, e, q) where the double sum behind the 6psi6 converges fast."""
    from qbil.identities import cdraw, qdraw

    rng = point_rng("interchange", seed, index)
    while True:
        q = qdraw(rng, 0.15, 0.3)
        a = cdraw(rng, 0.3, 0.8)
        b, d, e = (cdraw(rng, 0.8, 2.0) for _ in range(3))
        c = a * q / (b * cdraw(rng, 0.05, 0.4))
        if abs(a * q / (c * d * e)) < 0.4 and abs(a * a * q / (b * c * d * e)) < 0.4:
            return Point({"q": q, "a": a, "b": b, "c": c, "d": d, "e": e}, {})


def interchange_reconstruction(point: Point, n_max: int = 20, k_max: int = 40,
                               tower: Tower | None = None) -> tuple[Any, Any, float]:
    """Weighted sum over |n| <= n_max of the key1 kernel LHS versus the 6psi6 LHS.

    Weight: (1 - a q^{2n})/(1 - a) (d, e;q)_n/(aq/d, aq/e;q)_n (aq/(cde))^n; the
    inner kernel sums are cut at k = k_max.  Returns (reconstruction, target, residual).
    """
    from qbil.identities import vwp_psi
    from qbil.terms import evaluate_terms

    tower = tower or Tower.parse("big(30)")
    opts = EvalOptions(tower)
    pt = point.converted(tower)
    with tower.context():
        p = pt.params
        a, b, c, d, e, q = (p[k] for k in "abcdeq")
        total = tower.zero()
        for n in range(-n_max, n_max + 1):
            w = (1 - a * q ** (2 * n)) / (1 - a) * (a * q / (c * d * e)) ** n
            for x in (d, e):
                w = w * qpoch(x, q, n, tower)
            for x in (a * q / d, a * q / e):
                w = w / qpoch(x, q, n, tower)
            terms = key1_lhs(Bind(p), {"n": n}, stop=k_max)
            total = total + w * evaluate_terms(terms, q, opts).value
        target = evaluate_terms(
            [Term(series=vwp_psi(a, [b, c, d, e], q, a * a * q / (b * c * d * e)))], q, opts).value
        res = relative_residual(total, target, tower, 1e-30)
    return total, target, res


# -- exact terminating checks --------------------------------------------

def check_exact_terminating(identity: str, shape: Mapping, values: Mapping[str, Any]) -> bool:
    """Literal rational equality of both sides (raises ExactInfiniteProduct if not finite)."""
    d = get(identity)
    pt = full_point(d, values, shape, EXACT)
    opts = EvalOptions(EXACT)
    lv, _ = side_value(d, pt, opts, "lhs")
    rv, _ = side_value(d, pt, opts, "rhs")
    return lv == rv


# -- certification -------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    """Real rational enclosure [c - r, c + r]."""

    c: Fraction
    r: Fraction = Fraction(0)

    def __add__(self, other: "Ball") -> "Ball":
        return Ball(self.c + other.c, self.r + other.r)

    def __mul__(self, other: "Ball") -> "Ball":
        return Ball(self.c * other.c, abs(self.c) * other.r + abs(other.c) * self.r + self.r * other.r)

    def inverse(self) -> "Ball":
        m = abs(self.c)
        if m <= self.r:
            raise DegeneratePoint("enclosure of a denominator contains zero")
        return Ball(1 / self.c, self.r / (m * (m - self.r)))

    @property
    def mag(self) -> Fraction:
        return abs(self.c) + self.r


@dataclass
class CertifiedReport:
    identity: str
    point: Point
    eps: Fraction
    lhs: Ball
    rhs: Ball
    gap_bound: Fraction
    certified: bool
    refuted: bool
    pieces: list

    @property
    def status(self) -> str:
        if self.certified:
            return PASS
        return FAIL if self.refuted else ERROR

    def to_json(self) -> dict:
        return {
            "identity": self.identity,
            "point": {k: encode_number(v) for k, v in sorted(self.point.params.items())},
            "eps": float(self.eps),
            "lhs": [float(self.lhs.c), float(self.lhs.r)],
            "rhs": [float(self.rhs.c), float(self.rhs.r)],
            "gap_bound": float(self.gap_bound),
            "certified": self.certified,
            "status": self.status,
            "pieces": self.pieces,
        }


def _product_ball(x: Fraction, q: Fraction, goal: Fraction, pieces: list) -> Ball:
    """(x;q)_inf enclosed by a partial product and a remainder bound.

    With s = |x||q|^J, the log of the remainder is at most
    S = s / ((1-|q|)(1-s)) in modulus, and |remainder - 1| <= S/(1-S).
    """
    aq = abs(q)
    ax = abs(x)
    part = Fraction(1)
    w = x
    J = 0
    while True:
        if part == 0:
            delta = Fraction(0)
            break
        s = ax * aq**J
        if s < Fraction(1, 2):
            S = s / ((1 - aq) * (1 - s))
            delta = S / (1 - S)
            if delta * abs(part) <= goal:
                break
        part *= 1 - w
        w *= q
        J += 1
    pieces.append({"kind": "product", "factors": J, "rel_bound": float(delta)})
    return Ball(part, abs(part) * delta)


def _finite_ball(x: Fraction, q: Fraction, n: int, invert: bool) -> Ball:
    v = qpoch(x, q, n, EXACT)
    if invert:
        if v is POLE:
            return Ball(Fraction(0))
        if v == 0:
            raise DegeneratePoint("finite q-Pochhammer denominator vanishes")
        return Ball(1 / v)
    if v is POLE:
        raise DegeneratePoint("finite q-Pochhammer numerator has a pole")
    return Ball(v)


def _unilateral_ball(spec: Any, stop: int | None, goal: Fraction, pieces: list) -> Ball:
    term = detect_termination(spec, EXACT)
    stops = [x for x in (stop, term.above) if x is not None]
    if stops:
        K = min(stops)
        return Ball(sum(partial_terms(spec, K, EXACT), Fraction(0)))
    K = 8
    while True:
        try:
            cert = tail_bound(spec, K, EvalOptions(EXACT))
            if cert.bound <= goal:
                break
        except QbilError as exc:
            if exc.kind != "NoContraction" or K > 4000:
                raise
        K = K * 2 if K < 64 else K + 64
    total = sum(partial_terms(spec, K, EXACT), Fraction(0))
    pieces.append({"kind": "series", "K": K, "rho": float(cert.rho), "tail_bound": float(cert.bound)})
    return Ball(total, cert.bound)


def _series_ball(spec: Any, goal: Fraction, pieces: list) -> Ball:
    if isinstance(spec, ShiftedSum):
        raise CertificationTooTight("kernel sums are not supported by the certifier")
    if spec.kind != BILATERAL:
        return _unilateral_ball(spec, None, goal, pieces)
    term = detect_termination(spec, EXACT)
    fwd = _unilateral_ball(forward_part(spec), term.above, goal, pieces)
    if term.below == 0:
        return fwd
    pre, rev = reverse_bilateral(spec, EXACT)
    if pre == 0:
        return fwd
    stop = None if term.below is None else term.below - 1
    back = _unilateral_ball(rev, stop, goal / max(abs(pre), 1), pieces)
    return fwd + Ball(pre) * back


def _term_ball(t: Term, q: Fraction, goal: Fraction, pieces: list) -> Ball:
    ball = Ball(Fraction(t.coeff))
    for x in t.num:
        ball = ball * _product_ball(x, q, goal, pieces)
    for x in t.den:
        ball = ball * _product_ball(x, q, goal, pieces).inverse()
    for x in t.pnum:
        ball = ball * _product_ball(x, q * q, goal, pieces)
    for x in t.pden:
        ball = ball * _product_ball(x, q * q, goal, pieces).inverse()
    for x, n in t.fnum:
        ball = ball * _finite_ball(x, q, n, False)
    for x, n in t.fden:
        ball = ball * _finite_ball(x, q, n, True)
    if t.series is not None and ball.mag != 0:
        ball = ball * _series_ball(t.series, goal, pieces)
    return ball


def _side_ball(terms: Sequence[Term], q: Fraction, goal: Fraction, pieces: list) -> Ball:
    total = Ball(Fraction(0))
    for t in terms:
        total = total + _term_ball(t, q, goal, pieces)
    return total


def certify(identity: str, values: Mapping[str, Any], eps: Any, shape: Mapping | None = None,
            max_rounds: int = 6) -> CertifiedReport:
    """Prove |LHS - RHS| <= eps at a rational point with rigorous rational enclosures.

    Series tails use the ratio-majorant certificate and infinite products the
    geometric remainder bound; everything is exact rational arithmetic, so the
    final comparison needs no rounding.  The truncation goal is tightened until
    the enclosure gap is below ``eps`` or the identity is refuted.
    """
    eps = Fraction(eps) if not isinstance(eps, float) else Fraction(eps)
    if eps <= 0:
        raise CertificationTooTight("eps must be positive: truncated enclosures have nonzero width")
    d = get(identity)
    pt = full_point(d, values, shape, EXACT)
    cons = constraints_check(d, pt, EXACT)
    if not cons.ok:
        raise SpecError("point violates " + "; ".join(i["constraint"] for i in cons.failed()))
    q = pt.params["q"]
    goal = eps / 16
    for _ in range(max_rounds):
        pieces: list = []
        lb = _side_ball(d.lhs_terms(pt), q, goal, pieces)
        rb = _side_ball(d.rhs_terms(pt), q, goal, pieces)
        center_gap = abs(lb.c - rb.c)
        gap_bound = center_gap + lb.r + rb.r
        if gap_bound <= eps:
            return CertifiedReport(d.id, pt, eps, lb, rb, gap_bound, True, False, pieces)
        if center_gap - lb.r - rb.r > eps:
            return CertifiedReport(d.id, pt, eps, lb, rb, gap_bound, False, True, pieces)
        # widths were too large relative to the magnitudes involved
        scale = max(lb.mag, rb.mag, Fraction(1))
        goal = goal / (scale * 2**40)
    raise CertificationTooTight(f"could not reach eps={float(eps):.3g} in {max_rounds} refinements")


__all__ = [
    "Agreement",
    "Ball",
    "CertifiedReport",
    "POLICY",
    "Policy",
    "SweepSummary",
    "VerificationReport",
    "certify",
    "check_exact_terminating",
    "check_identity",
    "check_kernel",
    "check_sample",
    "check_specialization",
    "compare_identities",
    "interchange_point",
    "interchange_reconstruction",
    "options_for",
    "policy",
    "summarize",
    "sweep",
    "sweep_many",
]
