"""Machine-checked certificates for the impossibility arithmetic.

Each certificate reproduces one quantitative argument as a list of exact
inequalities: the 13a/4 bid-response integral that rules out payments for
the rounded-speed greedy rule, the 3.5+ln3-ln2 expected-integral analogue
for the fractional binning rule, the (2m-1)/m lower-bound harness, the g(k)
inequality for scalable two-machine rules, the two-machine optimal rule's
property sweep, and a finite-grid envy-free/truthful payment polytope
solver.  Reports never rely on floating point: logarithms stay symbolic
with rational enclosures, and every recorded check re-evaluates exactly.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .allocations import (
    at_fractional,
    at_lower_bound,
    lpt_star,
    opt_makespan,
    two_machine_opt,
    vcg_allocate,
)
from .core import (
    BudgetExceeded,
    DomainError,
    Instance,
    RationalLike,
    makespan,
    rat,
    rat_str,
    rats,
    rounded_speed,
)
from .exactlp import Constraint, irreducible_infeasible_subset, solve_feasibility
from .payments import HFunction, Mechanism
from .properties import (
    check_anonymous,
    check_local_efficiency,
    check_monotone,
    check_scalable,
)
from .workcurve import (
    CurvePiece,
    build_response_curve,
    build_workcurve,
    expected_workcurve,
    integrate,
    piecewise_integral,
)


class CertificateFailure(RuntimeError):
    """An exact computation came out different from the certified shape."""


_RELATIONS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
}


@dataclass(frozen=True)
class CheckRecord:
    """One exact comparison; ``holds`` is recomputed, never stored."""

    label: str
    lhs: Fraction
    relation: str
    rhs: Fraction

    @property
    def holds(self) -> bool:
        return _RELATIONS[self.relation](self.lhs, self.rhs)

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "lhs": rat_str(self.lhs),
            "relation": self.relation,
            "rhs": rat_str(self.rhs),
            "holds": self.holds,
        }


@dataclass
class CertificateReport:
    name: str
    inputs: dict
    constants: dict
    checks: list[CheckRecord] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return all(c.holds for c in self.checks)

    def add(self, label: str, lhs, relation: str, rhs) -> CheckRecord:
        record = CheckRecord(label, rat(lhs), relation, rat(rhs))
        self.checks.append(record)
        return record

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs": self.inputs,
            "constants": self.constants,
            "checks": [c.to_json_dict() for c in self.checks],
            "notes": self.notes,
            "verified": self.verified,
        }

    def to_text(self) -> str:
        lines = [f"certificate {self.name}: {'VERIFIED' if self.verified else 'FAILED'}"]
        for key, value in self.inputs.items():
            lines.append(f"  input {key} = {value}")
        for key, value in self.constants.items():
            lines.append(f"  const {key} = {value}")
        for c in self.checks:
            mark = "ok " if c.holds else "BAD"
            lines.append(
                f"  [{mark}] {c.label}: {rat_str(c.lhs)} {c.relation} {rat_str(c.rhs)}"
            )
        for note in self.notes:
            lines.append(f"  note: {note}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Greedy rounded-speed rule: no truthful+envy-free+IR+anonymous payments


def theorem5_certificate(
    a_values: Sequence[RationalLike] = (8, 16, 32),
) -> CertificateReport:
    """Exact 13a/4 accounting that rules out payments for the greedy rule.

    For jobs (2,1) against a competitor bidding a power of two a >= 8, the
    greedy rule's bid response is 3 on (0,a/4], 2 on (a/4,a], 1 on (a,2a]
    and 0 beyond, so any individually rational additive term must be at
    least its integral 13a/4; anonymity and envy-freeness cap the same term
    at h(1) + 3a, which is impossible once a > 4*h(1).
    """
    a_values = rats(a_values)
    jobs = (Fraction(2), Fraction(1))
    report = CertificateReport(
        name="theorem5",
        inputs={"a_values": [rat_str(a) for a in a_values], "jobs": ["2", "1"]},
        constants={},
    )
    for a in a_values:
        if rounded_speed(a) != a or a < 8:
            raise DomainError(
                f"a must be a power of two at least 8, got {rat_str(a)}; smaller "
                "powers change the response shape the argument relies on"
            )
        curve = build_workcurve(lpt_star, (a,), jobs, cap=4 * a)
        if curve.approximate:
            raise CertificateFailure("bid response could not be resolved exactly")
        expected_bps = (a / 4, a, 2 * a)
        expected_vals = (Fraction(3), Fraction(2), Fraction(1))
        if (
            curve.breakpoints != expected_bps
            or curve.values != expected_vals
            or curve.tail != 0
        ):
            raise CertificateFailure(
                f"bid response at a={rat_str(a)} is "
                f"{[rat_str(x) for x in curve.breakpoints]} / "
                f"{[rat_str(v) for v in curve.values]} / tail {rat_str(curve.tail)}, "
                f"expected {[rat_str(x) for x in expected_bps]} / (3, 2, 1) / tail 0"
            )
        tag = f"a={rat_str(a)}"
        integral = integrate(curve, 0, None)
        report.constants[f"{tag}:integral"] = rat_str(integral)
        report.add(f"{tag}: response integral equals 13a/4", integral, "==", a * 13 / 4)
        report.add(
            f"{tag}: anchor w(a/4, a)",
            lpt_star(Instance(jobs, (a / 4, a))).workloads[0],
            "==",
            3,
        )
        report.add(
            f"{tag}: anchor w(2a, a)",
            lpt_star(Instance(jobs, (2 * a, a))).workloads[0],
            "==",
            1,
        )
        # Envy chain between speeds (1, a): h(a) - h(1) <= L*1 + (a-1)*w,
        # and the workload at that profile is the full L = 3.
        w_at_one = lpt_star(Instance(jobs, (Fraction(1), a))).workloads[0]
        report.add(f"{tag}: workload at bids (1, a) is the whole L", w_at_one, "==", 3)
        report.add(
            f"{tag}: envy cap 3 + (a-1)*3 equals 3a",
            3 + (a - 1) * w_at_one,
            "==",
            3 * a,
        )
        # Contradiction at the pinned choice h(1) = a/8 (i.e. a = 8*h(1)).
        h1 = a / 8
        report.constants[f"{tag}:h1_choice"] = rat_str(h1)
        report.add(
            f"{tag}: 13a/4 exceeds 3a + h(1) at a = 8*h(1)",
            integral,
            ">",
            3 * a + h1,
        )
    report.add("slope comparison 13/4 > 3", Fraction(13, 4), ">", 3)
    report.notes.append(
        "any nonnegative h(1) is contradicted once a > 4*h(1): the response "
        "integral grows at 13/4 per unit of a while the envy cap grows at 3"
    )
    report.notes.append(
        "for bids beyond 2a the rounded speed is at least 4a, so both jobs "
        "prefer the competitor and the response stays 0; the tail is exact"
    )
    return report


# ---------------------------------------------------------------------------
# Fractional binning rule: expected-response integral 3.5 + ln 3 - ln 2


EXPECTED_BINNING_PIECES = (
    CurvePiece(Fraction(0), Fraction(1, 3), "const", (Fraction(3),)),
    CurvePiece(Fraction(1, 3), Fraction(1, 2), "recip", (Fraction(1),)),
    CurvePiece(Fraction(1, 2), Fraction(1), "const", (Fraction(2),)),
    CurvePiece(Fraction(1), Fraction(2), "const", (Fraction(1),)),
    CurvePiece(Fraction(2), Fraction(3), "affine", (Fraction(3), Fraction(-1))),
    CurvePiece(Fraction(3), None, "const", (Fraction(0),)),
)


def theorem7_certificate(
    tolerance: RationalLike = Fraction(1, 10 ** 6),
) -> CertificateReport:
    """Expected-response accounting for the fractional binning rule.

    Against a competitor bidding 1 with jobs (2,1) the expected workload is
    piecewise (3, 1/x, 2, 1, 3-x, 0) with boundaries (1/3, 1/2, 1, 2, 3);
    its integral is exactly 7/2 + ln(3/2), which exceeds the envy cap slope
    3, so no payments work (pinned at a = 2*h(1): the bound exceeds 7*h(1)).
    """
    tolerance = rat(tolerance)
    jobs = (Fraction(2), Fraction(1))
    report = CertificateReport(
        name="theorem7",
        inputs={"tolerance": rat_str(tolerance), "jobs": ["2", "1"], "other_bid": "1"},
        constants={},
    )
    pieces = tuple(expected_workcurve(at_fractional, (1,), jobs, cap=4))
    if pieces != EXPECTED_BINNING_PIECES:
        raise CertificateFailure(
            "expected-workload pieces diverge: got "
            + ", ".join(str(p.to_json_dict()) for p in pieces)
        )
    report.constants["pieces"] = [p.to_json_dict() for p in pieces]
    total = piecewise_integral(pieces)
    report.constants["integral"] = total.to_json_dict()
    report.add("rational part of the integral", total.rational, "==", Fraction(7, 2))
    log_ok = total.logs == ((Fraction(1), Fraction(3, 2)),)
    report.add("log part is exactly one ln(3/2) atom", 1 if log_ok else 0, "==", 1)
    lo, hi = total.enclosure(tolerance)
    report.constants["enclosure"] = [rat_str(lo), rat_str(hi)]
    report.add("enclosure width below tolerance", hi - lo, "<", tolerance)
    report.add("integral exceeds the envy cap slope 3", lo, ">", 3)
    # At a = 2*h(1) the bound reads 2*(7/2 + ln(3/2))*h(1) > 7*h(1).
    report.add("contradiction at a = 2*h(1)", 2 * lo, ">", 7)
    # The expected allocation fills every bin except possibly the last, so
    # expected workloads equal lower_bound/bid there: local efficiency.
    for x in (Fraction(1, 4), Fraction(2, 5), Fraction(1), Fraction(5, 2)):
        inst = Instance(jobs, (x, Fraction(1)))
        lower = at_lower_bound(inst)
        expected = at_fractional(inst)
        order = sorted(range(2), key=lambda i: (inst.bids[i], i))
        last_nonempty = max(
            (pos for pos in range(2) if expected.expected_workloads[order[pos]] > 0),
            default=0,
        )
        for pos in range(last_nonempty):
            i = order[pos]
            report.add(
                f"bin of machine bidding {rat_str(inst.bids[i])} at x={rat_str(x)} "
                "is exactly full",
                expected.expected_workloads[i],
                "==",
                lower / inst.bids[i],
            )
        sorted_loads = [expected.expected_workloads[i] for i in order]
        report.add(
            f"expected workloads nonincreasing in bid order at x={rat_str(x)}",
            1 if all(a >= b for a, b in zip(sorted_loads, sorted_loads[1:])) else 0,
            "==",
            1,
        )
    report.notes.append(
        "beyond x = L*a/min_job the competitor bin holds every job, so the "
        "final const-0 piece is exact out to infinity"
    )
    return report


# ---------------------------------------------------------------------------
# Lower-bound harness: ratio (2m-1)/m on the pinned adversarial instance


@dataclass(frozen=True)
class Theorem1Params:
    """Derived constants of the lower-bound construction.

    total length L = 2m-1, growth ratio gamma = c*L + eps, additive-term
    budget f = gamma^(m-1)*L + h at the geometric profile, and the speed
    scale alpha = (L*c/(m-1))*f.  Jobs are (1, ..., 1, m).
    """

    m: int
    c: Fraction
    eps: Fraction
    L: Fraction
    gamma: Fraction
    f: Fraction
    alpha: Fraction

    @classmethod
    def derive(cls, m: int, c: Fraction, eps: Fraction, h_geometric: Fraction):
        L = Fraction(2 * m - 1)
        gamma = c * L + eps
        f = gamma ** (m - 1) * L + h_geometric
        alpha = (L * c / (m - 1)) * f
        return cls(m, c, eps, L, gamma, f, alpha)


def theorem1_harness(
    mechanism: Mechanism,
    m: int,
    c: RationalLike,
    eps: RationalLike = Fraction(1, 2),
) -> CertificateReport:
    """Run a mechanism on the adversarial instance behind the (2m-1)/m bound.

    Extracts the additive term h at the profiles the argument needs, forms
    the constants, and reports whether every job lands on the uniquely fast
    machine, the achieved ratio against the brute-force optimum, and the
    two bounds on h whose collision forces that allocation.  Probe
    disagreement during extraction aborts with NotTruthfulEvidence.
    """
    c = rat(c)
    eps = rat(eps)
    if m < 2:
        raise DomainError("the construction needs at least two machines")
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if not 0 < c < 2 - Fraction(1, m):
        raise DomainError(
            f"target ratio must lie in (0, 2 - 1/m); got {rat_str(c)} for m={m}"
        )
    jobs = tuple([Fraction(m)] + [Fraction(1)] * (m - 1))
    h = HFunction(mechanism, jobs)
    gamma_seed = c * Fraction(2 * m - 1) + eps
    geometric_profile = tuple(gamma_seed ** e for e in range(m - 2, -1, -1))
    h_geometric = h(geometric_profile)
    params = Theorem1Params.derive(m, c, eps, h_geometric)
    speeds = tuple([m * params.alpha] * (m - 1) + [params.alpha])
    instance = Instance(jobs, speeds)
    outcome = mechanism.run(instance)
    workloads = outcome.allocation.workloads
    all_on_fast = workloads == tuple(
        [Fraction(0)] * (m - 1) + [instance.total_length]
    )
    achieved = makespan(outcome.allocation, speeds)
    _, opt = opt_makespan(instance)
    ratio = achieved / opt
    h_adversarial = h(speeds[1:])

    report = CertificateReport(
        name="theorem1",
        inputs={
            "mechanism": mechanism.name,
            "m": m,
            "c": rat_str(c),
            "eps": rat_str(eps),
        },
        constants={
            "L": rat_str(params.L),
            "gamma": rat_str(params.gamma),
            "f": rat_str(params.f),
            "alpha": rat_str(params.alpha),
            "h_geometric": rat_str(h_geometric),
            "h_adversarial": rat_str(h_adversarial),
            "workloads": [rat_str(w) for w in workloads],
            "makespan": rat_str(achieved),
            "opt": rat_str(opt),
            "ratio": rat_str(ratio),
            "all_on_fast": all_on_fast,
        },
    )
    lower = (params.L + Fraction(m - 1) / (params.L * c)) * params.alpha
    upper = params.L * params.alpha + params.f
    report.add(
        "alpha is pinned so the lower bound meets the strict upper bound",
        lower,
        "==",
        upper,
    )
    report.add("extracted h stays below the strict cap", h_adversarial, "<", upper)
    report.add("brute-force optimum equals m*alpha", opt, "==", m * params.alpha)
    if all_on_fast:
        report.add(
            "achieved ratio equals (2m-1)/m",
            ratio,
            "==",
            Fraction(2 * m - 1, m),
        )
        report.notes.append(
            "every job went to the uniquely fast machine, so the early-machine "
            "hypothesis of the lower bound is vacuous and only the cap binds"
        )
    else:
        report.add(
            "with work on an early machine, h must reach the lower bound",
            h_adversarial,
            ">=",
            lower,
        )
        report.notes.append(
            "an early machine received work: the recorded bounds now collide, "
            "witnessing that the mechanism cannot be truthful, envy-free, IR, "
            "anonymous and c-approximate at once"
        )
    return report


# ---------------------------------------------------------------------------
# g(k) inequality for scalable two-machine rules


def lemma6_g(
    rule,
    k: RationalLike,
    jobs: Sequence[RationalLike],
    inequality_samples: Sequence[RationalLike] = (1, 2, 5),
) -> tuple[Fraction, CertificateReport]:
    """Exact g(k) and the transfer inequality for a scalable 2-machine rule.

    g(k) = (4k^2/(k+1)^2 - 1) * integral over (1/k, (k+1)/(2k)) of the
    unit-bid machine's workload as the competitor's bid varies; the rule
    must be scalable and keep the low bidder busy below bid ratio k.
    """
    k = rat(k)
    if k <= 1:
        raise DomainError("k must exceed 1")
    jobs = rats(jobs)
    L = sum(jobs, Fraction(0))
    # Scalability spot-check.
    for y in (Fraction(1, 3), Fraction(1, 2), Fraction(3, 2), Fraction(2)):
        verdict = check_scalable(
            rule, Instance(jobs, (Fraction(1), y)), (2, Fraction(1, 3), Fraction(7, 5))
        )
        if not verdict:
            raise DomainError(f"rule is not scalable at competitor bid {rat_str(y)}")
    # Busy-below-k precondition: w(x, 1) > 0 for sampled x < k.
    for j in range(1, 16):
        x = k * Fraction(j, 16)
        w = rule(Instance(jobs, (x, Fraction(1)))).workloads[0]
        if w == 0:
            raise DomainError(
                f"rule idles the machine bidding {rat_str(x)} against bid 1, "
                f"violating the busy-below-{rat_str(k)} precondition"
            )

    ratio_cap = (k + 1) / (2 * k)

    def unit_machine_response(y: Fraction) -> Fraction:
        return rule(Instance(jobs, (Fraction(1), y))).workloads[0]

    candidates = _subset_ratio_points(jobs, Fraction(1))
    unit_curve = build_response_curve(
        unit_machine_response, sorted(candidates), cap=2
    )
    if unit_curve.approximate:
        raise CertificateFailure("competitor response could not be resolved exactly")
    core_integral = integrate(unit_curve, Fraction(1) / k, ratio_cap)
    factor = Fraction(4) * k * k / ((k + 1) * (k + 1)) - 1
    g = factor * core_integral

    report = CertificateReport(
        name="lemma6",
        inputs={
            "rule": getattr(rule, "name", "rule"),
            "k": rat_str(k),
            "jobs": [rat_str(l) for l in jobs],
            "samples": [rat_str(rat(a)) for a in inequality_samples],
        },
        constants={
            "factor": rat_str(factor),
            "core_integral": rat_str(core_integral),
            "g": rat_str(g),
        },
    )
    report.add("g(k) is strictly positive", g, ">", 0)
    for a in rats(inequality_samples):
        own_curve = build_workcurve(rule, (a,), jobs, cap=2 * k * a)
        lhs = integrate(own_curve, a, k * a)

        def cross_response(x: Fraction) -> Fraction:
            return rule(Instance(jobs, (a, x))).workloads[0]

        cross_candidates = _subset_ratio_points(jobs, a)
        cross_curve = build_response_curve(
            cross_response, sorted(cross_candidates), cap=2 * a
        )
        rhs = integrate(cross_curve, a / k, a) + g * a
        report.add(
            f"transfer inequality at a={rat_str(a)}",
            lhs,
            ">=",
            rhs,
        )
    return g, report


def _subset_ratio_points(jobs, scale: Fraction) -> set[Fraction]:
    """Points where exact comparisons against a bid can flip: the bid scaled
    by every ratio of job subset sums."""
    sums = {Fraction(0)}
    for l in jobs:
        sums |= {s + l for s in sums}
    sums.discard(Fraction(0))
    out = {scale}
    for s1 in sums:
        for s2 in sums:
            out.add(scale * s1 / s2)
    return {p for p in out if p > 0}


# ---------------------------------------------------------------------------
# Two-machine optimal rule: the property sweep and the VCG separation


def prop12_verify(
    sample_budget: int = 1000, seed: int = 20250809
) -> CertificateReport:
    """Sweep the two-machine min-makespan/min-running-time rule.

    Local efficiency, monotonicity, scalability and anonymity all pass on a
    random-instance sample, yet the rule differs from the all-to-fastest
    allocation; combined with the scalable-rule certificate this shows those
    four properties do not buy a payment scheme.
    """
    rng = random.Random(seed)
    report = CertificateReport(
        name="prop12",
        inputs={"sample_budget": sample_budget, "seed": seed},
        constants={},
    )
    failures = 0
    for trial in range(sample_budget):
        n = rng.randint(1, 5)
        jobs = [Fraction(rng.randint(1, 24), rng.choice((1, 2, 4))) for _ in range(n)]
        bids = [Fraction(rng.randint(1, 16), rng.choice((1, 2, 3))) for _ in range(2)]
        instance = Instance(jobs, bids)
        allocation = two_machine_opt(instance)
        grid = tuple(max(bids) * Fraction(j, 4) for j in range(1, 9))
        verdicts = [
            check_local_efficiency(instance.bids, allocation.workloads),
            check_monotone(two_machine_opt, instance, grid),
            check_scalable(
                two_machine_opt, instance, (2, Fraction(1, 3), Fraction(7, 5))
            ),
            check_anonymous(two_machine_opt, instance),
        ]
        for v in verdicts:
            if not v:
                failures += 1
                report.notes.append(
                    f"trial {trial}: {v.prop} failed on jobs "
                    f"{[rat_str(l) for l in instance.jobs]} bids "
                    f"{[rat_str(b) for b in instance.bids]}: "
                    f"{v.counterexample.to_json_dict()}"
                )
    report.add("property failures across the sample", failures, "==", 0)
    # The rule genuinely differs from all-to-fastest.
    separating = Instance((2, 1), (1, Fraction(3, 2)))
    ours = two_machine_opt(separating).workloads
    vcg = vcg_allocate(separating).workloads
    report.constants["separating_workloads"] = [rat_str(w) for w in ours]
    report.constants["vcg_workloads"] = [rat_str(w) for w in vcg]
    report.add(
        "two-machine rule differs from all-to-fastest on jobs (2,1), bids (1,3/2)",
        1 if ours != vcg else 0,
        "==",
        1,
    )
    report.add("two-machine rule splits the jobs there", ours[0], "==", 2)
    # Raising the second bid never hands the second machine more work.
    sweep = Instance((2, 1), (1, 1))
    prev = None
    monotone_ok = 1
    for step in range(1, 33):
        b2 = Fraction(step, 8)
        w2 = two_machine_opt(sweep.with_bid(1, b2)).workloads[1]
        if prev is not None and w2 > prev:
            monotone_ok = 0
            report.notes.append(f"second-machine workload rose at bid {rat_str(b2)}")
        prev = w2
    report.add("raised-bid sweep finds no monotonicity violation", monotone_ok, "==", 1)
    return report


# ---------------------------------------------------------------------------
# Finite-grid payment polytope


@dataclass
class FeasibilityResult:
    """Outcome of the grid polytope solve.

    Grid feasibility is one-directional evidence: the constraints on a grid
    are a strict subset of the continuum constraints, so only infeasibility
    transfers.  Witnesses and infeasible subsets are re-verified exactly;
    ``infeasible_constraints`` carries the raw rows so callers can re-solve
    the subset themselves (labels only in the JSON rendering).
    """

    feasible: bool
    witness: Optional[dict]
    infeasible_subset: Optional[list[str]]
    n_profiles: int
    n_constraints: int
    notes: list[str] = field(default_factory=list)
    infeasible_constraints: Optional[list[Constraint]] = None
    n_variables: int = 0

    def to_json_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "witness": self.witness,
            "infeasible_subset": self.infeasible_subset,
            "n_profiles": self.n_profiles,
            "n_constraints": self.n_constraints,
            "notes": self.notes,
        }


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def payment_polytope_feasible(
    rule,
    bid_grid: Sequence[RationalLike],
    jobs: Sequence[RationalLike],
    machines: int = 2,
    profile_budget: int = 4096,
) -> FeasibilityResult:
    """Exact feasibility of truthful+envy-free+IR+anonymous payments on a grid.

    One payment variable per (machine, grid profile); truthfulness over all
    single-coordinate grid deviations, envy-freeness over all ordered pairs,
    individual rationality everywhere, and payment anonymity across
    bid-permuted profiles at unique bids.  Variables are shifted to
    truthful-report utilities so IR becomes plain nonnegativity, and
    anonymity ties collapse to variable merges whenever the rule's own
    workloads swap correctly.
    """
    grid = tuple(sorted({rat(b) for b in bid_grid}))
    if not grid or grid[0] <= 0:
        raise DomainError("grid bids must be positive")
    jobs = rats(jobs)
    profiles = list(itertools.product(grid, repeat=machines))
    if len(profiles) > profile_budget:
        raise BudgetExceeded(
            f"{len(grid)}^{machines} profiles exceed budget {profile_budget}"
        )
    workloads: dict[tuple, tuple] = {}
    for b in profiles:
        allocation = rule(Instance(jobs, b))
        workloads[b] = allocation.workloads
    notes: list[str] = []
    var_index = {(i, b): t for t, (b, i) in enumerate(
        (b, i) for b in profiles for i in range(machines)
    )}
    n_vars = len(var_index)
    uf = _UnionFind(n_vars)
    broken_swaps = []
    for b in profiles:
        for kpos in range(machines):
            if b.count(b[kpos]) != 1:
                continue
            for lpos in range(machines):
                if lpos == kpos:
                    continue
                swapped = list(b)
                swapped[kpos], swapped[lpos] = swapped[lpos], swapped[kpos]
                swapped = tuple(swapped)
                if workloads[swapped][lpos] == workloads[b][kpos]:
                    uf.union(var_index[(kpos, b)], var_index[(lpos, swapped)])
                else:
                    notes.append(
                        f"rule workloads break anonymity at profile "
                        f"{tuple(rat_str(x) for x in b)} swap ({kpos},{lpos})"
                    )
                    broken_swaps.append((b, kpos, swapped, lpos))

    def rep(i: int, b) -> int:
        return uf.find(var_index[(i, b)])

    # Payment anonymity at a broken workload swap stays an explicit row;
    # built after the union pass so it names final representatives.
    constraints: list[Constraint] = []
    for b, kpos, swapped, lpos in broken_swaps:
        rhs = b[kpos] * (workloads[b][kpos] - workloads[swapped][lpos])
        constraints.append(
            Constraint(
                _combine(((rep(lpos, swapped), 1), (rep(kpos, b), -1))),
                "==",
                rhs,
                label=(
                    f"ANON profile={tuple(rat_str(x) for x in b)} "
                    f"swap=({kpos},{lpos})"
                ),
            )
        )
    for b in profiles:
        w = workloads[b]
        for i in range(machines):
            for j in range(machines):
                if i == j:
                    continue
                # utility_i >= utility_j's bundle at bid_i, in shifted vars
                coeffs = _combine(((rep(i, b), 1), (rep(j, b), -1)))
                constraints.append(
                    Constraint(
                        coeffs,
                        ">=",
                        (b[j] - b[i]) * w[j],
                        label=(
                            f"EF profile={tuple(rat_str(x) for x in b)} i={i} j={j}"
                        ),
                    )
                )
        for i in range(machines):
            for d in grid:
                if d == b[i]:
                    continue
                deviated = list(b)
                deviated[i] = d
                deviated = tuple(deviated)
                w_dev = workloads[deviated][i]
                coeffs = _combine(((rep(i, b), 1), (rep(i, deviated), -1)))
                constraints.append(
                    Constraint(
                        coeffs,
                        ">=",
                        (d - b[i]) * w_dev,
                        label=(
                            f"IC profile={tuple(rat_str(x) for x in b)} "
                            f"i={i} dev={rat_str(d)}"
                        ),
                    )
                )
    solution = solve_feasibility(n_vars, constraints)
    if solution is not None:
        witness = {}
        for b in profiles:
            for i in range(machines):
                q = solution[rep(i, b)]
                payment = q + b[i] * workloads[b][i]
                witness[f"p[{i}]({','.join(rat_str(x) for x in b)})"] = rat_str(payment)
        _verify_witness(grid, profiles, machines, workloads,
                        {(i, b): solution[rep(i, b)] + b[i] * workloads[b][i]
                         for b in profiles for i in range(machines)})
        return FeasibilityResult(
            True, witness, None, len(profiles), len(constraints), notes,
            n_variables=n_vars,
        )
    subset = irreducible_infeasible_subset(n_vars, constraints)
    assert solve_feasibility(n_vars, subset) is None
    return FeasibilityResult(
        False,
        None,
        [c.label for c in subset],
        len(profiles),
        len(constraints),
        notes,
        infeasible_constraints=subset,
        n_variables=n_vars,
    )


def _combine(pairs) -> tuple[tuple[int, Fraction], ...]:
    acc: dict[int, Fraction] = {}
    for idx, coef in pairs:
        acc[idx] = acc.get(idx, Fraction(0)) + Fraction(coef)
    return tuple((i, c) for i, c in acc.items() if c != 0)


def _verify_witness(grid, profiles, machines, workloads, payments):
    """Substitute payments into every original constraint in payment space."""
    for b in profiles:
        w = workloads[b]
        for i in range(machines):
            assert payments[(i, b)] - b[i] * w[i] >= 0, "IR violated by witness"
            for j in range(machines):
                if i == j:
                    continue
                assert (
                    payments[(i, b)] - b[i] * w[i]
                    >= payments[(j, b)] - b[i] * w[j]
                ), "EF violated by witness"
            for d in grid:
                if d == b[i]:
                    continue
                deviated = list(b)
                deviated[i] = d
                deviated = tuple(deviated)
                assert (
                    payments[(i, b)] - b[i] * w[i]
                    >= payments[(i, deviated)] - b[i] * workloads[deviated][i]
                ), "IC violated by witness"
        for kpos in range(machines):
            if b.count(b[kpos]) != 1:
                continue
            for lpos in range(machines):
                if lpos == kpos:
                    continue
                swapped = list(b)
                swapped[kpos], swapped[lpos] = swapped[lpos], swapped[kpos]
                swapped = tuple(swapped)
                assert payments[(lpos, swapped)] == payments[(kpos, b)], (
                    "anonymity violated by witness"
                )
