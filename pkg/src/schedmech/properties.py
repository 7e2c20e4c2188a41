"""Checkers for the mechanism properties: local efficiency, envy-freeness,
individual rationality, truthfulness, monotonicity, anonymity, scalability,
and the exact approximation ratio.

Every failed check carries a counterexample with both sides of the violated
inequality as exact rationals, so verdicts can be re-checked independently.
Truthfulness and monotonicity are grid checks: a continuum check is
impossible, a grid gives counterexample power.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .allocations import opt_makespan
from .core import (
    DomainError,
    Instance,
    RationalLike,
    makespan,
    rat_str,
    rats,
)

PERMUTATION_CHECK_LIMIT = 6


@dataclass(frozen=True)
class Counterexample:
    """A violated inequality, reproducible from its exact pieces."""

    description: str
    lhs: Fraction
    relation: str
    rhs: Fraction
    context: dict

    def violation_holds(self) -> bool:
        """True when the recorded comparison is indeed violated."""
        if self.relation == ">=":
            return self.lhs < self.rhs
        if self.relation == "<=":
            return self.lhs > self.rhs
        if self.relation == "==":
            return self.lhs != self.rhs
        raise DomainError(f"unknown relation {self.relation!r}")

    def to_json_dict(self) -> dict:
        return {
            "description": self.description,
            "lhs": rat_str(self.lhs),
            "relation": self.relation,
            "rhs": rat_str(self.rhs),
            "context": self.context,
        }


@dataclass(frozen=True)
class PropertyVerdict:
    prop: str
    passed: bool
    counterexample: Optional[Counterexample] = None

    def __bool__(self) -> bool:
        return self.passed

    def to_json_dict(self) -> dict:
        out = {"property": self.prop, "pass": self.passed}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample.to_json_dict()
        return out


def _verdict(prop: str, ce: Optional[Counterexample]) -> PropertyVerdict:
    if ce is None:
        return PropertyVerdict(prop, True)
    assert ce.violation_holds(), "counterexample must re-evaluate to a violation"
    return PropertyVerdict(prop, False, ce)


def default_grid(instance: Instance, points: int = 64) -> tuple[Fraction, ...]:
    """Deviation bids: j/8 steps scaled by the largest bid, plus the bids."""
    scale = max(instance.bids)
    grid = {scale * Fraction(j, 8) for j in range(1, points + 1)}
    grid.update(instance.bids)
    return tuple(sorted(grid))


def check_local_efficiency(
    bids: Sequence[RationalLike],
    workloads: Sequence[RationalLike],
    permutation_check: bool = True,
) -> PropertyVerdict:
    """No bid-workload dot product can be reduced by permuting the bundles.

    Uses the pairwise criterion (a strictly slower machine never carries a
    strictly larger workload); for up to six machines the full permutation
    definition is cross-checked, which must agree by the rearrangement
    inequality.
    """
    bids = rats(bids)
    workloads = rats(workloads)
    if len(bids) != len(workloads):
        raise DomainError("bids and workloads must have equal length")
    ce = None
    for i in range(len(bids)):
        for k in range(len(bids)):
            if bids[i] > bids[k] and workloads[i] > workloads[k]:
                ce = Counterexample(
                    "slower machine carries more workload",
                    workloads[i],
                    "<=",
                    workloads[k],
                    {
                        "i": i,
                        "k": k,
                        "bid_i": rat_str(bids[i]),
                        "bid_k": rat_str(bids[k]),
                    },
                )
                break
        if ce:
            break
    if permutation_check and len(bids) <= PERMUTATION_CHECK_LIMIT:
        base = sum((b * w for b, w in zip(bids, workloads)), Fraction(0))
        best_perm = None
        for perm in itertools.permutations(range(len(bids))):
            value = sum(
                (bids[i] * workloads[p] for i, p in enumerate(perm)), Fraction(0)
            )
            if value < base:
                best_perm = (perm, value)
                break
        assert (best_perm is None) == (ce is None), (
            "pairwise criterion and permutation enumeration disagree"
        )
        if best_perm is not None and ce is not None:
            perm, value = best_perm
            ce = Counterexample(
                "a permutation of the bundles lowers the total running time",
                base,
                "<=",
                value,
                {"permutation": list(perm)},
            )
    return _verdict("local-efficiency", ce)


def check_envy_free(
    bids: Sequence[RationalLike],
    workloads: Sequence[RationalLike],
    payments: Sequence[RationalLike],
) -> PropertyVerdict:
    """No machine prefers another's workload-payment bundle at its own bid."""
    bids, workloads, payments = rats(bids), rats(workloads), rats(payments)
    if not len(bids) == len(workloads) == len(payments):
        raise DomainError("bids, workloads and payments must align")
    for i in range(len(bids)):
        own = payments[i] - bids[i] * workloads[i]
        for j in range(len(bids)):
            if j == i:
                continue
            swapped = payments[j] - bids[i] * workloads[j]
            if own < swapped:
                return _verdict(
                    "envy-freeness",
                    Counterexample(
                        f"machine {i} envies machine {j}",
                        own,
                        ">=",
                        swapped,
                        {"i": i, "j": j},
                    ),
                )
    return _verdict("envy-freeness", None)


def check_ir(
    bids: Sequence[RationalLike],
    workloads: Sequence[RationalLike],
    payments: Sequence[RationalLike],
) -> PropertyVerdict:
    """Payment covers cost at the reported profile for every machine."""
    bids, workloads, payments = rats(bids), rats(workloads), rats(payments)
    for i in range(len(bids)):
        u = payments[i] - bids[i] * workloads[i]
        if u < 0:
            return _verdict(
                "individual-rationality",
                Counterexample(
                    f"machine {i} runs at a loss",
                    u,
                    ">=",
                    Fraction(0),
                    {"i": i},
                ),
            )
    return _verdict("individual-rationality", None)


def check_truthful(
    mechanism,
    instance: Instance,
    deviation_grid: Optional[Sequence[RationalLike]] = None,
) -> PropertyVerdict:
    """Grid check: no machine gains by deviating from its profile bid.

    The profile bid is treated as the true speed; every grid deviation of
    every machine must not beat truthful reporting.
    """
    grid = (
        rats(deviation_grid) if deviation_grid is not None else default_grid(instance)
    )
    truthful_outcome = mechanism.run(instance)
    for i in range(instance.m):
        true_speed = instance.bids[i]
        honest = (
            truthful_outcome.payments[i]
            - true_speed * truthful_outcome.allocation.workloads[i]
        )
        for dev in grid:
            if dev == true_speed:
                continue
            deviated = mechanism.run(instance.with_bid(i, dev))
            gained = (
                deviated.payments[i] - true_speed * deviated.allocation.workloads[i]
            )
            if honest < gained:
                return _verdict(
                    "truthfulness",
                    Counterexample(
                        f"machine {i} profits by bidding {rat_str(dev)}",
                        honest,
                        ">=",
                        gained,
                        {
                            "machine": i,
                            "true_speed": rat_str(true_speed),
                            "deviation": rat_str(dev),
                        },
                    ),
                )
    return _verdict("truthfulness", None)


def check_monotone(
    rule,
    instance: Instance,
    deviation_grid: Optional[Sequence[RationalLike]] = None,
) -> PropertyVerdict:
    """Raising one's own bid never increases one's workload (grid check)."""
    grid = sorted(
        rats(deviation_grid) if deviation_grid is not None else default_grid(instance)
    )
    for i in range(instance.m):
        prev_bid = None
        prev_w = None
        for bid in grid:
            allocation = rule(instance.with_bid(i, bid))
            w = allocation.workloads[i]
            if prev_w is not None and w > prev_w:
                return _verdict(
                    "monotonicity",
                    Counterexample(
                        f"machine {i} gains workload by raising its bid",
                        w,
                        "<=",
                        prev_w,
                        {
                            "machine": i,
                            "bid_low": rat_str(prev_bid),
                            "bid_high": rat_str(bid),
                        },
                    ),
                )
            prev_bid, prev_w = bid, w
    return _verdict("monotonicity", None)


def check_anonymous(mechanism, instance: Instance) -> PropertyVerdict:
    """Swapping a unique bid with any other swaps workloads (and payments).

    Accepts either a mechanism (payments included in the check) or a bare
    allocation rule.  Profiles without a unique bid are vacuously fine.
    """
    is_mechanism = hasattr(mechanism, "run")

    def evaluate(inst):
        if is_mechanism:
            outcome = mechanism.run(inst)
            return outcome.allocation.workloads, outcome.payments
        return mechanism(inst).workloads, None

    base_w, base_p = evaluate(instance)
    for k in range(instance.m):
        if instance.bids.count(instance.bids[k]) != 1:
            continue
        for l in range(instance.m):
            if l == k:
                continue
            swapped_w, swapped_p = evaluate(instance.with_swapped_bids(k, l))
            checks = [("workload", base_w[k], swapped_w[l])]
            if base_p is not None:
                checks.append(("payment", base_p[k], swapped_p[l]))
            for label, expected, actual in checks:
                if expected != actual:
                    return _verdict(
                        "anonymity",
                        Counterexample(
                            f"{label} does not follow the bid swap ({k},{l})",
                            actual,
                            "==",
                            expected,
                            {"k": k, "l": l},
                        ),
                    )
    return _verdict("anonymity", None)


def check_scalable(
    rule, instance: Instance, scalars: Sequence[RationalLike]
) -> PropertyVerdict:
    """Workloads are unchanged when all bids are scaled by each constant."""
    base = rule(instance).workloads
    for c in rats(scalars):
        scaled = rule(instance.scaled(c)).workloads
        if scaled != base:
            idx = next(i for i in range(len(base)) if base[i] != scaled[i])
            return _verdict(
                "scalability",
                Counterexample(
                    f"workload of machine {idx} changes under scaling by {rat_str(c)}",
                    scaled[idx],
                    "==",
                    base[idx],
                    {"scale": rat_str(c), "machine": idx},
                ),
            )
    return _verdict("scalability", None)


def approx_ratio(rule, instance: Instance, budget: Optional[int] = None) -> Fraction:
    """Exact ratio of the rule's makespan to the optimum, with bids as speeds."""
    allocation = rule(instance)
    kwargs = {} if budget is None else {"budget": budget}
    _, opt = opt_makespan(instance, **kwargs)
    return makespan(allocation, instance.bids) / opt
