"""Bid-response curves: exact step functions of one machine's own bid.

For a deterministic allocation rule and fixed competitor bids, the first
machine's workload as a function of its own bid is a nonincreasing step
function with rational breakpoints.  This module discovers those
breakpoints exactly (candidate seeding plus simplest-rational bisection),
integrates the curve exactly, and, for the fractional binning rule, derives
the piecewise closed form of the *expected* workload, whose integral picks
up logarithmic terms that are kept symbolic with rational enclosures.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Callable, Optional, Sequence

from .core import (
    DomainError,
    ExpectedAllocation,
    Instance,
    RationalLike,
    rat,
    rat_str,
    rats,
)

DEFAULT_MAX_DENOMINATOR = 2 ** 64


class CurveResolutionError(RuntimeError):
    """Breakpoint discovery exhausted its budget; the curve is not exact."""


class DivergentIntegral(ArithmeticError):
    """The integral to infinity of a curve with nonzero tail."""


def simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """The rational with smallest denominator in the open interval (lo, hi).

    Ties on denominator are broken toward the smaller numerator, which is
    what the Stern-Brocot descent below produces.  Requires 0 <= lo < hi.
    """
    if lo < 0:
        raise DomainError("simplest_between only supports nonnegative bounds")
    if not lo < hi:
        raise DomainError("empty interval")
    floor_lo = lo.numerator // lo.denominator
    if lo == floor_lo:
        if hi > floor_lo + 1:
            return Fraction(floor_lo + 1)
        # (integer, hi) with hi <= integer+1: smallest k with floor+1/k < hi
        inv = 1 / (hi - lo)
        k = inv.numerator // inv.denominator + 1
        return floor_lo + Fraction(1, k)
    if Fraction(floor_lo + 1) < hi:
        return Fraction(floor_lo + 1)
    return floor_lo + 1 / simplest_between(1 / (hi - floor_lo), 1 / (lo - floor_lo))


@dataclass(frozen=True)
class WorkCurve:
    """Piecewise-constant bid response.

    ``values[j]`` holds on the open interval (breakpoints[j-1], breakpoints[j])
    with the left edge of the first interval at 0; ``tail`` holds beyond the
    last breakpoint.
    Values at the breakpoints themselves are taken from the right: they are
    measure zero and never affect an integral.  ``cap`` records how far the
    curve was actually sampled; a nonzero tail means the underlying rule was
    still allocating work at the cap, so integrals to infinity diverge (or
    the cap was simply too small -- that is the caller's promise to keep).
    """

    breakpoints: tuple[Fraction, ...]
    values: tuple[Fraction, ...]
    tail: Fraction
    cap: Fraction
    approximate: bool = False

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints):
            raise DomainError("need one value per breakpoint interval")
        prev = Fraction(0)
        for x in self.breakpoints:
            if x <= prev:
                raise DomainError("breakpoints must be strictly increasing and positive")
            prev = x

    @property
    def finite_support(self) -> bool:
        return self.tail == 0

    def value_at(self, x: RationalLike) -> Fraction:
        x = rat(x)
        if x <= 0:
            raise DomainError("curves are defined on positive bids only")
        for bp, v in zip(self.breakpoints, self.values):
            if x < bp:
                return v
        return self.tail

    def is_nonincreasing(self) -> bool:
        seq = list(self.values) + [self.tail]
        return all(a >= b for a, b in zip(seq, seq[1:]))

    def monotonicity_violations(self) -> list[tuple[Fraction, Fraction, Fraction]]:
        """(breakpoint, value before, value after) wherever the curve rises."""
        seq = list(self.values) + [self.tail]
        out = []
        for k, (a, b) in enumerate(zip(seq, seq[1:])):
            if b > a:
                out.append((self.breakpoints[k], a, b))
        return out

    def to_json_dict(self) -> dict:
        return {
            "breakpoints": [rat_str(x) for x in self.breakpoints],
            "values": [rat_str(v) for v in self.values],
            "tail": rat_str(self.tail),
            "cap": rat_str(self.cap),
            "approximate": self.approximate,
        }


def integrate(
    curve: WorkCurve, lo: RationalLike, hi: Optional[RationalLike]
) -> Fraction:
    """Exact integral of the step function over [lo, hi]; hi=None means infinity."""
    lo = rat(lo)
    if lo < 0:
        raise DomainError("integration starts at a nonnegative bound")
    if hi is None:
        if not curve.finite_support:
            raise DivergentIntegral(
                f"tail value {rat_str(curve.tail)} is nonzero; integral diverges"
            )
        hi = max(curve.breakpoints, default=Fraction(0))
        if hi <= lo:
            return Fraction(0)
    else:
        hi = rat(hi)
    if hi < lo:
        raise DomainError("upper bound below lower bound")
    total = Fraction(0)
    prev = Fraction(0)
    for bp, v in zip(curve.breakpoints, curve.values):
        seg_lo = max(prev, lo)
        seg_hi = min(bp, hi)
        if seg_hi > seg_lo:
            total += v * (seg_hi - seg_lo)
        prev = bp
    if hi > max(prev, lo):
        total += curve.tail * (hi - max(prev, lo))
    return total


# ---------------------------------------------------------------------------
# Step-function discovery


def _locate_jumps(
    f: Callable[[Fraction], Fraction],
    x1: Fraction,
    v1: Fraction,
    x2: Fraction,
    v2: Fraction,
    max_denominator: int,
    depth: int = 0,
) -> Optional[list[Fraction]]:
    """Exact jump points of a step function in [x1, x2], given f(x1) != f(x2).

    Alternates a simplest-rational hypothesis test with plain bisection.
    Bisection shrinks the bracket geometrically; once it is tight enough
    that the true jump is the simplest rational inside (any two rationals
    with denominator at most q are at least 1/q^2 apart), the hypothesis
    test confirms it exactly.  Steps closed on either side are caught by
    endpoint probes.  Returns None when the budgets run out, in which case
    the caller flags the curve approximate.
    """
    if depth > 8:
        return None
    lo, vlo, hi, vhi = x1, v1, x2, v2
    for _ in range(260):
        width = hi - lo
        # Endpoint hypotheses: the value changes immediately after lo
        # (breakpoint lo itself), or only at hi.
        if all(f(lo + width / (1 << k)) == vhi for k in (14, 34, 54)):
            return [lo]
        if all(f(hi - width / (1 << k)) == vlo for k in (14, 34, 54)):
            return [hi]
        z = simplest_between(lo, hi)
        if z.denominator <= max_denominator:
            left_gap = z - lo
            right_gap = hi - z
            left_ok = all(
                f(z - left_gap / (1 << k)) == vlo for k in (1, 16, 40)
            )
            right_ok = all(
                f(z + right_gap / (1 << k)) == vhi for k in (1, 16, 40)
            )
            if left_ok and right_ok and f(z) in (vlo, vhi):
                return [z]
        mid = lo + width / 2
        vm = f(mid)
        if vm == vlo:
            lo = mid
        elif vm == vhi:
            hi = mid
        else:
            left = _locate_jumps(f, lo, vlo, mid, vm, max_denominator, depth + 1)
            right = _locate_jumps(f, mid, vm, hi, vhi, max_denominator, depth + 1)
            if left is None or right is None:
                return None
            return left + right
    return None


MAX_BREAKPOINTS = 512


def discover_step_function(
    f: Callable[[Fraction], Fraction],
    candidates: Sequence[Fraction],
    cap: Fraction,
    max_denominator: int = DEFAULT_MAX_DENOMINATOR,
) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...], Fraction, bool]:
    """Recover a piecewise-constant f on (0, cap] exactly.

    ``candidates`` delimit the initial sampling grid (three quantiles per
    candidate interval); every jump is then located exactly between adjacent
    samples that disagree, so candidates guide the search but are never
    trusted to be jumps themselves.  Returns (breakpoints, values, tail,
    approximate) where tail is the value on the final interval ending at cap.
    A jump hiding between two equal-valued samples is invisible; candidate
    sets must be dense enough to expose one sign of every change.
    """
    cap = rat(cap)
    if cap <= 0:
        raise DomainError("cap must be positive")
    points = sorted({rat(c) for c in candidates if 0 < rat(c) < cap})
    edges = [Fraction(0)] + points + [cap]
    samples: list[Fraction] = []
    for lo, hi in zip(edges, edges[1:]):
        samples.extend(lo + (hi - lo) * Fraction(k, 4) for k in (1, 2, 3))
    values = [f(q) for q in samples]
    approximate = False
    jumps: set[Fraction] = set()
    for (xa, va), (xb, vb) in zip(zip(samples, values), zip(samples[1:], values[1:])):
        if va != vb:
            found = _locate_jumps(f, xa, va, xb, vb, max_denominator)
            if found is None:
                approximate = True
                jumps.add(xb)  # best effort: split at the right sample
            else:
                jumps.update(found)
            if len(jumps) > MAX_BREAKPOINTS:
                raise CurveResolutionError(
                    f"more than {MAX_BREAKPOINTS} jumps on (0, {rat_str(cap)}]; "
                    "the response does not look like a bounded step function"
                )
    edges = [Fraction(0)] + sorted(jumps) + [cap]
    breakpoints: list[Fraction] = []
    vals: list[Fraction] = []
    for lo, hi in zip(edges, edges[1:]):
        v = f(lo + (hi - lo) / 2)
        if vals and vals[-1] == v:
            continue
        if vals:
            breakpoints.append(lo)
        vals.append(v)
    tail = vals.pop()
    return tuple(breakpoints), tuple(vals), tail, approximate


def _own_bid_eval(rule, others_bids, jobs) -> Callable[[Fraction], Fraction]:
    def f(x: Fraction) -> Fraction:
        result = rule(Instance(jobs, (x, *others_bids)))
        if isinstance(result, ExpectedAllocation):
            raise DomainError(
                "rule returns expected allocations; use expected_workcurve"
            )
        return result.workloads[0]

    return f


def _generic_candidates(others_bids, jobs, cap) -> set[Fraction]:
    """Seed set good for the rules in this package.

    Covers bid-comparison thresholds (competitor bids scaled by ratios of
    job subset sums, where makespan comparisons flip), plus every power of
    two in range (where rounded speeds change).
    """
    cands: set[Fraction] = set()
    sums = {Fraction(0)}
    if len(jobs) <= 12:
        for l in jobs:
            sums |= {s + l for s in sums}
    else:
        acc = Fraction(0)
        for l in jobs:
            acc += l
            sums.add(acc)
            sums.add(l)
    sums.discard(Fraction(0))
    for b in others_bids:
        cands.add(rat(b))
        for s1 in sums:
            for s2 in sums:
                x = rat(b) * s1 / s2
                if 0 < x <= cap:
                    cands.add(x)
    e = 0
    while Fraction(2) ** e <= cap:
        e += 1
    lo_ref = min(list(others_bids) + [cap]) * min(jobs) / (sum(jobs) * 2)
    while Fraction(2) ** e >= lo_ref:
        cands.add(Fraction(2) ** e)
        e -= 1
    return {c for c in cands if 0 < c <= cap}


def build_workcurve(
    rule,
    others_bids: Sequence[RationalLike],
    jobs: Sequence[RationalLike],
    cap: RationalLike,
    max_denominator: int = DEFAULT_MAX_DENOMINATOR,
) -> WorkCurve:
    """Exact bid-response step function of ``rule`` for the first machine.

    The caller promises that ``cap`` lies beyond the last breakpoint whenever
    the rule's support is bounded; a nonzero tail in the result means that
    promise could not be confirmed at the cap.
    """
    others_bids = rats(others_bids)
    jobs = rats(jobs)
    cap = rat(cap)
    f = _own_bid_eval(rule, others_bids, jobs)
    hints = getattr(rule, "breakpoint_hints", None)
    if hints is not None:
        # A rule that knows its own comparison structure supplies a complete
        # candidate set; the quantile verification still guards it.
        candidates = {rat(c) for c in hints(others_bids, jobs, cap)}
    else:
        candidates = _generic_candidates(others_bids, jobs, cap)
    bps, vals, tail, approx = discover_step_function(
        f, sorted(candidates), cap, max_denominator
    )
    return WorkCurve(bps, vals, tail, cap, approx)


def build_response_curve(
    eval_fn: Callable[[Fraction], Fraction],
    candidates: Sequence[RationalLike],
    cap: RationalLike,
    max_denominator: int = DEFAULT_MAX_DENOMINATOR,
) -> WorkCurve:
    """Step-function discovery for an arbitrary one-dimensional response.

    Used for curves in a *competitor's* bid, which the certificate for
    scalable two-machine rules integrates on both sides of its inequality.
    """
    cap = rat(cap)
    bps, vals, tail, approx = discover_step_function(
        eval_fn, [rat(c) for c in candidates], cap, max_denominator
    )
    return WorkCurve(bps, vals, tail, cap, approx)


# ---------------------------------------------------------------------------
# Symbolic expected curves (fractional binning rule)


@dataclass(frozen=True)
class CurvePiece:
    """One regime of an expected-workload curve on (lo, hi].

    kind "const": value c; "recip": c/x; "affine": p + q*x.
    hi=None encodes an unbounded final piece (then kind must be "const").
    """

    lo: Fraction
    hi: Optional[Fraction]
    kind: str
    params: tuple[Fraction, ...]

    def value_at(self, x: Fraction) -> Fraction:
        if self.kind == "const":
            return self.params[0]
        if self.kind == "recip":
            return self.params[0] / x
        if self.kind == "affine":
            return self.params[0] + self.params[1] * x
        raise DomainError(f"unknown piece kind {self.kind!r}")

    def integral(self) -> "LogLinearValue":
        """Exact integral over (lo, hi); recip pieces contribute a log atom."""
        if self.hi is None:
            if self.kind == "const" and self.params[0] == 0:
                return LogLinearValue(Fraction(0), ())
            raise DivergentIntegral("unbounded nonzero piece")
        lo, hi = self.lo, self.hi
        if self.kind == "const":
            return LogLinearValue(self.params[0] * (hi - lo), ())
        if self.kind == "recip":
            return LogLinearValue(Fraction(0), ((self.params[0], hi / lo),))
        if self.kind == "affine":
            p, q = self.params
            return LogLinearValue(p * (hi - lo) + q * (hi * hi - lo * lo) / 2, ())
        raise DomainError(f"unknown piece kind {self.kind!r}")

    def to_json_dict(self) -> dict:
        return {
            "lo": rat_str(self.lo),
            "hi": None if self.hi is None else rat_str(self.hi),
            "kind": self.kind,
            "params": [rat_str(p) for p in self.params],
        }


@dataclass(frozen=True)
class LogLinearValue:
    """rational + sum of coef*ln(arg) with rational coefs and args > 1."""

    rational: Fraction
    logs: tuple[tuple[Fraction, Fraction], ...]

    def __add__(self, other: "LogLinearValue") -> "LogLinearValue":
        merged: dict[Fraction, Fraction] = {}
        for coef, a in self.logs + other.logs:
            merged[a] = merged.get(a, Fraction(0)) + coef
        logs = tuple(sorted((c, a) for a, c in merged.items() if c != 0))
        return LogLinearValue(self.rational + other.rational, logs)

    def scaled(self, c: RationalLike) -> "LogLinearValue":
        c = rat(c)
        return LogLinearValue(
            self.rational * c, tuple((coef * c, a) for coef, a in self.logs)
        )

    def enclosure(self, eps: RationalLike) -> tuple[Fraction, Fraction]:
        """Rational interval of width < eps containing the exact value."""
        eps = rat(eps)
        if eps <= 0:
            raise DomainError("enclosure width must be positive")
        lo = hi = self.rational
        if not self.logs:
            return lo, hi
        share = eps / len(self.logs)
        for coef, a in self.logs:
            llo, lhi = ln_enclosure(a, share / (2 * max(abs(coef), Fraction(1))))
            if coef >= 0:
                lo += coef * llo
                hi += coef * lhi
            else:
                lo += coef * lhi
                hi += coef * llo
        return lo, hi

    def to_json_dict(self) -> dict:
        return {
            "rational": rat_str(self.rational),
            "logs": [
                {"coef": rat_str(c), "arg": rat_str(a)} for c, a in self.logs
            ],
        }


def ln_enclosure(arg: RationalLike, eps: RationalLike) -> tuple[Fraction, Fraction]:
    """Bracket ln(arg) for rational arg >= 1 to width < eps.

    Uses the alternating series ln(1+t) = t - t^2/2 + ... after factoring
    the argument into powers of 3/2 so that t <= 1/2; consecutive partial
    sums of an alternating series with decreasing terms bracket the limit.
    """
    arg = rat(arg)
    eps = rat(eps)
    if arg < 1:
        raise DomainError("ln_enclosure expects an argument >= 1")
    if eps <= 0:
        raise DomainError("enclosure width must be positive")
    base = Fraction(3, 2)
    k = 0
    while arg > base:
        arg /= base
        k += 1
    pieces = [base] * k + ([arg] if arg > 1 else [])
    if not pieces:
        return Fraction(0), Fraction(0)
    lo = hi = Fraction(0)
    share = eps / len(pieces)
    for r in pieces:
        t = r - 1  # 0 < t <= 1/2
        term = t
        partial = Fraction(0)
        j = 1
        sign = 1
        while term >= share / 2 or j <= 2:
            partial += sign * term / j
            j += 1
            sign = -sign
            term *= t
            if j > 4096:
                raise CurveResolutionError("log series failed to converge")
        # partial ends after an even or odd number of terms; the next term
        # bounds the remainder with the sign of `sign`.
        tail = term / j
        if sign > 0:
            lo += partial
            hi += partial + tail
        else:
            lo += partial - tail
            hi += partial
    return lo, hi


def piecewise_integral(pieces: Sequence[CurvePiece]) -> LogLinearValue:
    total = LogLinearValue(Fraction(0), ())
    for p in pieces:
        total = total + p.integral()
    return total


def piecewise_value_at(pieces: Sequence[CurvePiece], x: Fraction) -> Fraction:
    for p in pieces:
        if p.lo < x and (p.hi is None or x <= p.hi):
            return p.value_at(x)
    raise DomainError(f"{rat_str(x)} not covered by pieces")


def _rational_roots(a2: Fraction, a1: Fraction, a0: Fraction) -> list[Fraction]:
    """Positive rational roots of a2*x^2 + a1*x + a0 = 0."""
    if a2 == 0:
        if a1 == 0:
            return []
        r = -a0 / a1
        return [r] if r > 0 else []
    disc = a1 * a1 - 4 * a2 * a0
    if disc < 0:
        return []
    n, d = disc.numerator, disc.denominator
    sn, sd = isqrt(n), isqrt(d)
    if sn * sn != n or sd * sd != d:
        return []  # irrational crossing; the fit verification would catch it
    s = Fraction(sn, sd)
    return [r for r in ((-a1 + s) / (2 * a2), (-a1 - s) / (2 * a2)) if r > 0]


def _linfrac_equal_roots(e1, e2) -> list[Fraction]:
    """Roots of (n0+n1*x)/(d0+d1*x) == (N0+N1*x)/(D0+D1*x)."""
    n0, n1, d0, d1 = e1
    N0, N1, D0, D1 = e2
    a0 = n0 * D0 - N0 * d0
    a1 = n0 * D1 + n1 * D0 - N0 * d1 - N1 * d0
    a2 = n1 * D1 - N1 * d1
    return _rational_roots(a2, a1, a0)


def _fit_piece(lo: Fraction, hi: Fraction, samples: list[tuple[Fraction, Fraction]]) -> CurvePiece:
    """Fit const / c/x / affine through exact samples, verifying every point."""
    xs = [x for x, _ in samples]
    ys = [y for _, y in samples]
    if all(y == ys[0] for y in ys):
        return CurvePiece(lo, hi, "const", (ys[0],))
    if all(x * y == xs[0] * ys[0] for x, y in samples):
        return CurvePiece(lo, hi, "recip", (xs[0] * ys[0],))
    q = (ys[1] - ys[0]) / (xs[1] - xs[0])
    p = ys[0] - q * xs[0]
    if all(p + q * x == y for x, y in samples):
        return CurvePiece(lo, hi, "affine", (p, q))
    raise CurveResolutionError(
        f"expected workload on ({rat_str(lo)}, {rat_str(hi)}] fits no "
        "supported closed form (const, c/x, affine)"
    )


def expected_workcurve(
    rule,
    others_bids: Sequence[RationalLike],
    jobs: Sequence[RationalLike],
    cap: RationalLike,
) -> list[CurvePiece]:
    """Symbolic expected workload of the fractional binning rule vs own bid.

    Supported for at most one competitor (the two-machine analysis); each
    regime of the underlying max-min lower bound and of the bin pour is
    bounded by a root of a linear or bilinear rational equation, all of
    which are enumerated and solved exactly, and the expected workload on
    each regime is fit to one of the closed forms const, c/x or affine.
    """
    if getattr(rule, "name", None) != "at-expected":
        raise DomainError("expected curves are defined for the binning rule only")
    others_bids = rats(others_bids)
    jobs = rats(jobs)
    cap = rat(cap)
    if len(others_bids) == 0:
        L = sum(jobs, Fraction(0))
        return [CurvePiece(Fraction(0), None, "const", (L,))]
    if len(others_bids) > 1:
        raise DomainError("symbolic expected curves support two machines only")
    a = others_bids[0]
    jobs_sorted = tuple(sorted(jobs, reverse=True))
    prefixes = list(itertools.accumulate(jobs_sorted))
    L = prefixes[-1]
    l_min = jobs_sorted[-1]

    # Candidate expressions the lower bound can equal, as (n0,n1,d0,d1)
    # encoding (n0+n1*x)/(d0+d1*x).
    exprs: set[tuple[Fraction, Fraction, Fraction, Fraction]] = set()
    zero, one = Fraction(0), Fraction(1)
    for l, P in zip(jobs_sorted, prefixes):
        exprs.add((a * l, zero, one, zero))  # competitor per-job bound
        exprs.add((zero, l, one, zero))  # own per-job bound
        exprs.add((zero, P, one, zero))  # own-first average bound
        exprs.add((P * a, zero, one, zero))  # competitor-first average bound
        exprs.add((zero, P * a, a, one))  # two-machine harmonic bound
    candidates: set[Fraction] = {a, cap, a * L / l_min}
    expr_list = sorted(exprs)
    for e1, e2 in itertools.combinations(expr_list, 2):
        candidates.update(_linfrac_equal_roots(e1, e2))
    # Pour boundaries: prefix sums crossing bin-capacity sums under any
    # candidate value of the lower bound.
    for e in expr_list:
        for P in prefixes:
            candidates.update(_linfrac_equal_roots((zero, P, one, zero), e))
            candidates.update(_linfrac_equal_roots((P * a, zero, one, zero), e))
            candidates.update(_linfrac_equal_roots((zero, P * a, a, one), e))
    support_end = a * L / l_min
    hi_end = max(cap, support_end)
    points = sorted({c for c in candidates if 0 < c <= hi_end})

    def eval_expected(x: Fraction) -> Fraction:
        return rule(Instance(jobs_sorted, (x, a))).expected_workloads[0]

    pieces: list[CurvePiece] = []
    edges = [Fraction(0)] + points
    for lo, hi in zip(edges, edges[1:]):
        span = hi - lo
        sample_xs = [lo + span * Fraction(k, 6) for k in (1, 2, 3, 4, 5)]
        piece = _fit_piece(lo, hi, [(x, eval_expected(x)) for x in sample_xs])
        # Each closed interval end belongs to its piece; verify at hi too.
        if piece.value_at(hi) != eval_expected(hi):
            raise CurveResolutionError(
                f"piece on ({rat_str(lo)}, {rat_str(hi)}] fails at its right edge"
            )
        pieces.append(piece)
    # Beyond the last candidate the competitor bin swallows everything.
    final_val = eval_expected(hi_end * 2)
    if final_val != 0:
        raise CurveResolutionError("expected workload does not vanish beyond support")
    pieces.append(CurvePiece(points[-1], None, "const", (Fraction(0),)))
    # Merge adjacent pieces that are restrictions of the same closed form.
    merged: list[CurvePiece] = []
    for p in pieces:
        if merged and merged[-1].kind == p.kind and merged[-1].params == p.params:
            prev = merged.pop()
            p = CurvePiece(prev.lo, p.hi, p.kind, p.params)
        merged.append(p)
    return merged
