"""Evaluation of unilateral (r phi s) and bilateral (r psi s) basic hypergeometric series.

Terms are generated by their ratio recurrence.  Bilateral series are split at
k = 0; the k <= -1 part is reindexed into a forward series (see
:func:`reverse_bilateral`) so both halves share one summation engine and one
stopping rule.  Very-well-poised series carry their special parameter sigma and
contribute the factor (1 - sigma q^{2k})/(1 - sigma) directly, so no square root
of sigma is ever taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Sequence

from qbil.errors import (
    DivergentDomain,
    NoContraction,
    NonConvergent,
    PoleInTerm,
    SigmaDegenerate,
    SpecError,
)
from qbil.numerics import DOUBLE, Tolerance, Tower, encode_number
from qbil.qfactorial import vanishes

UNILATERAL = "unilateral"
BILATERAL = "bilateral"
KINDS = (UNILATERAL, BILATERAL)

# Stopping rule: this many consecutive small, decaying terms end the sum.
STOP_RUN = 3
STOP_RATIO = 0.99
MAX_TERMS = 10_000
# Termination search range for q^{-n} parameters.
MAX_TERMINATION_INDEX = 64


@dataclass(frozen=True)
class SeriesSpec:
    """r phi s (unilateral) or r psi s (bilateral) with raw parameter values."""

    kind: str
    upper: tuple
    lower: tuple
    q: Any
    z: Any

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "upper", tuple(self.upper))
        object.__setattr__(self, "lower", tuple(self.lower))

    @property
    def r(self) -> int:
        return len(self.upper)

    @property
    def s(self) -> int:
        return len(self.lower)

    @property
    def sigma(self) -> None:
        return None

    def exponent(self) -> int:
        """Power of (-1)^k q^{C(k,2)} carried by each term."""
        if self.kind == UNILATERAL:
            return 1 + self.s - self.r
        return self.s - self.r


@dataclass(frozen=True)
class VWPSpec:
    """Very-well-poised series stored without its +-sqrt(sigma) parameter pairs.

    ``upper``/``lower`` hold every parameter except the pairs q*sqrt(sigma),
    -q*sqrt(sigma) (upper) and sqrt(sigma), -sqrt(sigma) (lower).  For a
    unilateral series sigma itself is listed in ``upper`` as usual.
    """

    sigma: Any
    upper: tuple
    lower: tuple
    q: Any
    z: Any
    kind: str = UNILATERAL

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "upper", tuple(self.upper))
        object.__setattr__(self, "lower", tuple(self.lower))

    @property
    def r(self) -> int:
        return len(self.upper) + 2

    @property
    def s(self) -> int:
        return len(self.lower) + 2

    def exponent(self) -> int:
        if self.kind == UNILATERAL:
            return 1 + self.s - self.r
        return self.s - self.r

    def expanded(self, root: Any) -> SeriesSpec:
        """Explicit form with the pairs materialized; ``root**2`` must equal sigma."""
        q = self.q
        return SeriesSpec(
            self.kind,
            self.upper + (q * root, -q * root),
            self.lower + (root, -root),
            q,
            self.z,
        )


AnySpec = SeriesSpec | VWPSpec


@dataclass(frozen=True)
class EvalOptions:
    tower: Tower = DOUBLE
    tol: Tolerance | None = None
    max_terms: int = MAX_TERMS

    @property
    def tolerance(self) -> Tolerance:
        return self.tol or self.tower.default_tolerance()


@dataclass(frozen=True)
class Termination:
    """``above``: an upper parameter equals q^{-n}, so terms k > n vanish.

    ``below``: a bilateral lower parameter equals q^{1+n}, so only n terms with
    negative index survive.
    """

    above: int | None = None
    below: int | None = None

    @property
    def none(self) -> bool:
        return self.above is None and self.below is None


@dataclass
class SeriesResult:
    value: Any
    terms: int
    last_term: float
    terminated: bool
    backward_terms: int = 0
    notes: list = field(default_factory=list)

    def diagnostics(self) -> dict:
        out = {"terms": self.terms, "last_term": self.last_term, "terminated": self.terminated}
        if self.backward_terms:
            out["backward_terms"] = self.backward_terms
        return out


@dataclass(frozen=True)
class TailCertificate:
    """|sum_{k>K} t_k| <= bound, from the ratio majorant rho valid for all k >= K."""

    K: int
    rho: Any
    bound: Any
    last_term: Any


# -- termination -------------------------------------------------------

def power_index(x: Any, q: Any, tower: Tower, sign: int = -1, limit: int = MAX_TERMINATION_INDEX) -> int | None:
    """n >= 0 with x = q^{sign*n}, or None.

    Exact in rational mode, relative 1e-12 (double) or tower zero_tol (big).
    """
    try:
        ax = abs(complex(x))
        aq = abs(complex(q))
    except (TypeError, OverflowError):
        return None
    if ax == 0:
        return None
    est = sign * math.log(ax) / math.log(aq)
    n = round(est)
    if n < 0 or n > limit or abs(est - n) > 1e-6:
        return None
    target = q ** (sign * n)
    if tower.is_exact:
        return n if x == target else None
    tol = 1e-12 if tower.mode.value == "double" else tower.zero_tol
    return n if abs(x - target) <= tol * abs(target) else None


def detect_termination(spec: AnySpec, tower: Tower | None = None) -> Termination:
    """Report whether the series is a finite sum above and/or below."""
    tower = tower or _guess_tower(spec)
    above = None
    for a in spec.upper:
        n = power_index(a, spec.q, tower, sign=-1)
        if n is not None and (above is None or n < above):
            above = n
    below = None
    if spec.kind == BILATERAL:
        for b in spec.lower:
            m = power_index(b, spec.q, tower, sign=+1)
            if m is not None and m >= 1 and (below is None or m - 1 < below):
                below = m - 1
    return Termination(above, below)


def _guess_tower(spec: AnySpec) -> Tower:
    from qbil.qfactorial import tower_of

    return tower_of(spec.q)


# -- the summation engine ----------------------------------------------

def _forward_sum(
    upper: Sequence[Any],
    lower: Sequence[Any],
    z: Any,
    q: Any,
    *,
    sigma: Any,
    q_denominator: bool,
    exponent: int,
    stop_at: int | None,
    opts: EvalOptions,
) -> SeriesResult:
    """Sum_{k>=0} of the term with ratio prod(1-a q^k)/prod(1-b q^k) * z * ...

    ``stop_at`` (inclusive) is the last index of a terminating series.
    """
    tower = opts.tower
    tol = opts.tolerance
    one = tower.one()
    u = one  # term without the very-well-poised factor
    total = one
    peak = 1.0
    count = 1
    last = 1.0
    run = 0
    prev_mag = 1.0
    qk = one  # q^k
    if sigma is not None:
        sig_den = 1 - sigma
        if vanishes(sig_den, abs(sigma), tower):
            raise SigmaDegenerate("special parameter equals 1")
        q2 = q * q
        sig_w = sigma  # sigma q^{2k}
    if stop_at == 0:
        return SeriesResult(total, 1, 1.0, True)
    exact = tower.is_exact
    term_tol = tol.term_tol
    k = 0
    while True:
        if count >= opts.max_terms:
            raise NonConvergent(f"stopping rule unmet after {opts.max_terms} terms")
        num = one
        for a in upper:
            num = num * (1 - a * qk)
        den = one
        for b in lower:
            f = 1 - b * qk
            if vanishes(f, abs(b * qk), tower):
                raise PoleInTerm(f"lower parameter hits q^-{k} at index {k}")
            den = den * f
        if q_denominator:
            den = den * (1 - qk * q)
        ratio = num * z / den
        if exponent:
            ratio = ratio * (-qk) ** exponent
        u = u * ratio
        k += 1
        qk = qk * q
        if sigma is not None:
            sig_w = sig_w * q2
            f = 1 - sig_w
            t = u * f / sig_den
        else:
            t = u
        total = total + t
        count += 1
        if stop_at is not None and k >= stop_at:
            return SeriesResult(total, count, float(abs(t)), True)
        if exact:
            continue
        mag = float(abs(t))
        last = mag
        if mag > peak:
            peak = mag
        if mag == 0.0 and u == 0:
            return SeriesResult(total, count, 0.0, False)
        scale = max(float(abs(total)), peak)
        if mag <= term_tol * scale and (prev_mag == 0 or mag < STOP_RATIO * prev_mag):
            run += 1
            if run >= STOP_RUN:
                return SeriesResult(total, count, last, False)
        else:
            run = 0
        prev_mag = mag


def _check_ratio(x: Any, what: str) -> None:
    m = abs(x)
    if m > 1:
        raise DivergentDomain(f"{what} has modulus {float(m):.6g} > 1")
    if m == 1:
        raise NonConvergent(f"{what} lies on the unit circle")


def _opts(opts: EvalOptions | None, spec: AnySpec) -> EvalOptions:
    if opts is None:
        return EvalOptions(_guess_tower(spec))
    return opts


def _unilateral(spec: AnySpec, opts: EvalOptions) -> SeriesResult:
    tower = opts.tower
    term = detect_termination(spec, tower)
    r, s = spec.r, spec.s
    if term.above is None:
        if spec.z == 0:
            return SeriesResult(tower.one(), 1, 0.0, True)
        if tower.is_exact:
            raise NonConvergent("exact mode only sums terminating series")
        if r > s + 1:
            raise DivergentDomain(f"{r}phi{s} with r > s+1 diverges unless it terminates")
        if r == s + 1:
            _check_ratio(spec.z, "argument z")
    sigma = spec.sigma if isinstance(spec, VWPSpec) else None
    return _forward_sum(
        spec.upper,
        spec.lower,
        spec.z,
        spec.q,
        sigma=sigma,
        q_denominator=True,
        exponent=spec.exponent(),
        stop_at=term.above,
        opts=opts,
    )


def eval_phi(spec: SeriesSpec, opts: EvalOptions | None = None) -> SeriesResult:
    """Unilateral series sum_{k>=0} (a)_k/(q,b)_k ((-1)^k q^{C(k,2)})^{1+s-r} z^k."""
    if spec.kind != UNILATERAL:
        raise SpecError("eval_phi needs a unilateral spec")
    opts = _opts(opts, spec)
    with opts.tower.context():
        return _unilateral(spec, opts)


def eval_vwp(spec: VWPSpec, opts: EvalOptions | None = None) -> SeriesResult:
    """Very-well-poised series, unilateral or bilateral, without square roots."""
    opts = _opts(opts, spec)
    with opts.tower.context():
        if vanishes(1 - spec.sigma, abs(spec.sigma), opts.tower):
            raise SigmaDegenerate("special parameter equals 1")
        if spec.kind == UNILATERAL:
            return _unilateral(spec, opts)
        return _bilateral(spec, opts)


def eval_psi(spec: SeriesSpec, opts: EvalOptions | None = None) -> SeriesResult:
    """Bilateral series sum_{k in Z} (a)_k/(b)_k ((-1)^k q^{C(k,2)})^{s-r} z^k (r = s)."""
    if spec.kind != BILATERAL:
        raise SpecError("eval_psi needs a bilateral spec")
    opts = _opts(opts, spec)
    with opts.tower.context():
        return _bilateral(spec, opts)


def evaluate(spec: AnySpec, opts: EvalOptions | None = None) -> SeriesResult:
    """Dispatch on spec type and kind."""
    if isinstance(spec, VWPSpec):
        return eval_vwp(spec, opts)
    if spec.kind == UNILATERAL:
        return eval_phi(spec, opts)
    return eval_psi(spec, opts)


def _bilateral(spec: AnySpec, opts: EvalOptions) -> SeriesResult:
    tower = opts.tower
    if len(spec.upper) != len(spec.lower):
        raise SpecError("bilateral evaluation requires as many upper as lower parameters")
    term = detect_termination(spec, tower)
    fwd_view = forward_part(spec)
    pre, rev = reverse_bilateral(spec, tower)
    if term.above is None:
        if tower.is_exact:
            raise NonConvergent("exact mode only sums terminating series")
        _check_ratio(spec.z, "argument z")
    backward_needed = term.below is None or term.below > 0
    if backward_needed and term.below is None and pre != 0:
        if tower.is_exact:
            raise NonConvergent("exact mode only sums terminating series")
        _check_ratio(rev.z, "backward argument")
    fwd = _unilateral_with_stop(fwd_view, opts, term.above)
    total = fwd.value
    back_terms = 0
    if backward_needed and pre != 0:
        stop = None if term.below is None else term.below - 1
        back = _unilateral_with_stop(rev, opts, stop)
        total = total + pre * back.value
        back_terms = back.terms
    return SeriesResult(total, fwd.terms, fwd.last_term, fwd.terminated, back_terms)


def _unilateral_with_stop(spec: AnySpec, opts: EvalOptions, stop_at: int | None) -> SeriesResult:
    term = detect_termination(spec, opts.tower)
    stops = [x for x in (stop_at, term.above) if x is not None]
    stop = min(stops) if stops else None
    if stop is None and spec.z == 0:
        return SeriesResult(opts.tower.one(), 1, 0.0, True)
    sigma = spec.sigma if isinstance(spec, VWPSpec) else None
    return _forward_sum(
        spec.upper,
        spec.lower,
        spec.z,
        spec.q,
        sigma=sigma,
        q_denominator=True,
        exponent=spec.exponent(),
        stop_at=stop,
        opts=opts,
    )


def forward_part(spec: AnySpec) -> AnySpec:
    """The k >= 0 half of a bilateral series as a unilateral spec.

    An extra upper parameter q cancels the implicit (q;q)_k of the unilateral
    definition, and keeps the sign/power exponent unchanged.
    """
    if spec.kind != BILATERAL:
        raise SpecError("forward_part needs a bilateral spec")
    upper = (spec.q,) + tuple(spec.upper)
    if isinstance(spec, VWPSpec):
        return VWPSpec(spec.sigma, upper, spec.lower, spec.q, spec.z, UNILATERAL)
    return SeriesSpec(UNILATERAL, upper, spec.lower, spec.q, spec.z)


def _prod(values: Sequence[Any], one: Any) -> Any:
    out = one
    for v in values:
        out = out * v
    return out


def backward_argument(spec: AnySpec) -> Any:
    """b_1...b_r / (a_1...a_r z), divided by q^2 for very-well-poised specs."""
    one = spec.q / spec.q
    w = _prod(spec.lower, one) / (_prod(spec.upper, one) * spec.z)
    if isinstance(spec, VWPSpec):
        w = w / (spec.q * spec.q)
    return w


def reflect_bilateral(spec: AnySpec) -> AnySpec:
    """The bilateral spec whose k-th term is the original's (-k)-th term (r = s).

    Uses (a;q)_{-k} = (-q/a)^k q^{C(k,2)}/(q/a;q)_k; an involution.
    """
    if spec.kind != BILATERAL or len(spec.upper) != len(spec.lower):
        raise SpecError("reflection needs a bilateral spec with r = s")
    q = spec.q
    upper = tuple(q / b for b in spec.lower)
    lower = tuple(q / a for a in spec.upper)
    if isinstance(spec, VWPSpec):
        return VWPSpec(1 / spec.sigma, upper, lower, q, backward_argument(spec), BILATERAL)
    return SeriesSpec(BILATERAL, upper, lower, q, backward_argument(spec))


def reverse_bilateral(spec: AnySpec, tower: Tower | None = None) -> tuple[Any, AnySpec]:
    """(prefactor, unilateral spec) with prefactor * sum(spec) = sum_{k<=-1} t_k.

    With k = -1 - j the negative half becomes
        prod(1-q/b)/prod(1-q/a) * w * sum_j (q, q^2/b)_j / (q, q^2/a)_j w^j
    where w is :func:`backward_argument`.  For a very-well-poised series the
    factor (1 - sigma q^{2k})/(1 - sigma) at k = -1-j turns into the factor for
    the special parameter q^2/sigma, times a constant absorbed into the prefactor.
    Raises PoleInTerm when an upper parameter equals q.
    """
    if spec.kind != BILATERAL:
        raise SpecError("reverse_bilateral needs a bilateral spec")
    if len(spec.upper) != len(spec.lower):
        raise SpecError("reverse_bilateral requires r = s")
    tower = tower or _guess_tower(spec)
    q = spec.q
    one = tower.one()
    w = backward_argument(spec)
    num = one
    killed = False
    for b in spec.lower:
        f = 1 - q / b
        if vanishes(f, abs(q / b), tower):
            killed = True
        num = num * f
    den = one
    for a in spec.upper:
        f = 1 - q / a
        if vanishes(f, abs(q / a), tower):
            raise PoleInTerm("upper parameter equals q: negative-index terms are infinite")
        den = den * f
    pre = tower.zero() if killed else num * w / den
    upper = (q,) + tuple(q * q / b for b in spec.lower)
    lower = tuple(q * q / a for a in spec.upper)
    if isinstance(spec, VWPSpec):
        inv = 1 / spec.sigma
        f = 1 - inv
        if vanishes(f, abs(inv), tower):
            raise SigmaDegenerate("special parameter equals 1")
        sig2 = inv * q * q
        pre = pre * (1 - sig2) / f
        return pre, VWPSpec(sig2, upper, lower, q, w, UNILATERAL)
    return pre, SeriesSpec(UNILATERAL, upper, lower, q, w)


# -- generic term sums (kernels) ---------------------------------------

def sum_terms(term: Callable[[int], Any], opts: EvalOptions, start: int = 0,
              stop: int | None = None) -> SeriesResult:
    """Sum term(k) for k = start, start+1, ... with the standard stopping rule.

    ``stop`` (inclusive) makes the sum finite.  Zero terms never trigger the stop
    before the first nonzero term, so leading zeros are skipped safely.
    """
    tower = opts.tower
    tol = opts.tolerance
    total = tower.zero()
    peak = 0.0
    run = 0
    prev = None
    count = 0
    k = start
    last = 0.0
    while True:
        if stop is not None and k > stop:
            return SeriesResult(total, count, last, True)
        if count >= opts.max_terms:
            raise NonConvergent(f"stopping rule unmet after {opts.max_terms} terms")
        t = term(k)
        total = total + t
        count += 1
        k += 1
        if stop is not None or tower.is_exact:
            continue
        mag = float(abs(t))
        last = mag
        peak = max(peak, mag)
        if peak == 0.0:
            continue  # leading zero terms
        scale = max(float(abs(total)), peak)
        decaying = prev is None or mag < STOP_RATIO * prev or mag == 0.0
        if mag <= tol.term_tol * scale and decaying:
            run += 1
            if run >= STOP_RUN:
                return SeriesResult(total, count, last, False)
        else:
            run = 0
        prev = mag


# -- certified tails ---------------------------------------------------

def _mag(x: Any, exact: bool) -> Any:
    if exact:
        return abs(Fraction(x))
    return abs(x)


def ratio_majorant(spec: AnySpec, K: int, exact: bool) -> Any:
    """rho(K) bounding |t_{k+1}/t_k| for every k >= K of a unilateral spec."""
    if spec.kind != UNILATERAL:
        raise SpecError("ratio_majorant expects a unilateral spec")
    e = spec.exponent()
    if e < 0:
        raise NoContraction("negative sign/power exponent: terms are not majorized")
    aq = _mag(spec.q, exact)
    qK = aq**K
    rho = _mag(spec.z, exact) * qK**e
    for a in spec.upper:
        rho = rho * (1 + _mag(a, exact) * qK)
    denom_parts = [1 - aq ** (K + 1)] + [1 - _mag(b, exact) * qK for b in spec.lower]
    if isinstance(spec, VWPSpec):
        sig = _mag(spec.sigma, exact)
        rho = rho * (1 + sig * qK * qK * aq * aq)
        denom_parts.append(1 - sig * qK * qK)
    for d in denom_parts:
        if d <= 0:
            raise NoContraction(f"majorant undefined at K={K}")
        rho = rho / d
    return rho


def tail_bound(spec: AnySpec, K: int, opts: EvalOptions | None = None) -> TailCertificate:
    """Certified bound on sum_{k>K} |t_k| from |t_K| and the ratio majorant.

    In exact mode everything is rational, so the bound is rigorous.
    """
    opts = _opts(opts, spec)
    exact = opts.tower.is_exact
    rho = ratio_majorant(spec, K, exact)
    if rho >= 1:
        raise NoContraction(f"ratio majorant {float(rho):.4g} >= 1 at K={K}")
    tK = abs(term_at(spec, K, opts.tower))
    return TailCertificate(K, rho, tK * rho / (1 - rho), tK)


def term_at(spec: AnySpec, K: int, tower: Tower) -> Any:
    """The K-th term of a unilateral spec, computed by the ratio recurrence."""
    q = spec.q
    one = tower.one()
    u = one
    qk = one
    e = spec.exponent()
    for _ in range(K):
        num = _prod([1 - a * qk for a in spec.upper], one)
        den = _prod([1 - b * qk for b in spec.lower], one) * (1 - qk * q)
        u = u * num * spec.z / den
        if e:
            u = u * (-qk) ** e
        qk = qk * q
    if isinstance(spec, VWPSpec):
        u = u * (1 - spec.sigma * qk * qk) / (1 - spec.sigma)
    return u


def partial_terms(spec: AnySpec, K: int, tower: Tower) -> list:
    """Terms t_0..t_K of a unilateral spec (exact arithmetic in exact mode)."""
    q = spec.q
    one = tower.one()
    u = one
    qk = one
    e = spec.exponent()
    out = []
    sigma = spec.sigma if isinstance(spec, VWPSpec) else None
    for k in range(K + 1):
        t = u if sigma is None else u * (1 - sigma * qk * qk) / (1 - sigma)
        out.append(t)
        num = _prod([1 - a * qk for a in spec.upper], one)
        den = _prod([1 - b * qk for b in spec.lower], one) * (1 - qk * q)
        if den == 0:
            break
        u = u * num * spec.z / den
        if e:
            u = u * (-qk) ** e
        qk = qk * q
    return out


# -- JSON --------------------------------------------------------------

def spec_to_json(spec: AnySpec) -> dict:
    out = {
        "kind": spec.kind,
        "upper": [encode_number(x) for x in spec.upper],
        "lower": [encode_number(x) for x in spec.lower],
        "q": encode_number(spec.q),
        "z": encode_number(spec.z),
    }
    if isinstance(spec, VWPSpec):
        out["sigma"] = encode_number(spec.sigma)
    return out


def spec_from_json(obj: dict, tower: Tower) -> AnySpec:
    """Parse the JSON series format; errors name the offending field."""
    if not isinstance(obj, dict):
        raise SpecError("series spec must be a JSON object")
    for key in ("kind", "upper", "lower", "q", "z"):
        if key not in obj:
            raise SpecError(f"missing field {key!r}")

    def conv(value: Any, where: str) -> Any:
        try:
            return tower.convert(value)
        except Exception as exc:  # noqa: BLE001 - rewrapped with context
            if isinstance(exc, SpecError):
                raise SpecError(f"{where}: {exc}") from None
            if exc.__class__.__name__ == "IllegalDemotion":
                raise
            raise SpecError(f"{where}: cannot parse {value!r}") from None

    with tower.context():
        upper = tuple(conv(v, f"upper[{i}]") for i, v in enumerate(obj["upper"]))
        lower = tuple(conv(v, f"lower[{i}]") for i, v in enumerate(obj["lower"]))
        q = conv(obj["q"], "q")
        z = conv(obj["z"], "z")
        kind = obj["kind"]
        if not 0 < abs(complex(q)) < 1:
            raise SpecError("q: base must satisfy 0 < |q| < 1")
        if "sigma" in obj:
            return VWPSpec(conv(obj["sigma"], "sigma"), upper, lower, q, z, kind)
        return SeriesSpec(kind, upper, lower, q, z)


def with_z(spec: AnySpec, z: Any) -> AnySpec:
    return replace(spec, z=z)
