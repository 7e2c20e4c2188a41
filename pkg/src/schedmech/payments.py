"""Payment schemes and the additive-term extraction for truthful mechanisms.

A truthful mechanism's payment is pinned down, up to a bid-independent
additive term h, by the identity p = h + b*w(b) - integral of the bid
response from 0 to b.  This module implements that identity, the Clarke
pivot payments for the total-running-time minimizer, the envy-free payment
chain for locally efficient workloads, and the extraction of h from any
outcome-producing mechanism (probe disagreement is constructive evidence
the mechanism is not truthful).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .allocations import vcg_allocate
from .core import (
    Assignment,
    DomainError,
    Instance,
    Outcome,
    RationalLike,
    rat,
    rat_str,
    rats,
)
from .workcurve import WorkCurve, build_workcurve, integrate


class NotLocallyEfficient(ValueError):
    """Workloads violate the faster-machine-gets-no-less ordering."""


class PaymentInconsistency(ValueError):
    """A supplied workload disagrees with the bid-response curve."""


class NotTruthfulEvidence(RuntimeError):
    """Two probe bids extracted different additive terms.

    Carries both probes and both extracted values: re-evaluating them is a
    constructive witness that the mechanism violates the truthful payment
    identity.
    """

    def __init__(self, others_bids, probe_a, h_a, probe_b, h_b):
        self.others_bids = tuple(others_bids)
        self.probe_a = probe_a
        self.h_a = h_a
        self.probe_b = probe_b
        self.h_b = h_b
        super().__init__(
            f"h({', '.join(rat_str(b) for b in others_bids)}) resolves to "
            f"{rat_str(h_a)} at probe {rat_str(probe_a)} but {rat_str(h_b)} "
            f"at probe {rat_str(probe_b)}"
        )


def _pairwise_locally_efficient(bids, workloads) -> bool:
    for i in range(len(bids)):
        for k in range(len(bids)):
            if bids[i] > bids[k] and workloads[i] > workloads[k]:
                return False
    return True


def ef_chain_payments(
    bids: Sequence[RationalLike], workloads: Sequence[RationalLike]
) -> tuple[Fraction, ...]:
    """Envy-free payments for locally efficient workloads.

    With indices ordered by nonincreasing bid, the slowest machine is paid
    its full cost and each faster machine is paid the previous payment plus
    its own bid times the workload increment.  Bid ties keep their original
    relative order.
    """
    bids = rats(bids)
    workloads = rats(workloads)
    if len(bids) != len(workloads):
        raise DomainError("bids and workloads must have equal length")
    if not _pairwise_locally_efficient(bids, workloads):
        raise NotLocallyEfficient(
            "chain payments require locally efficient workloads"
        )
    order = sorted(range(len(bids)), key=lambda i: (-bids[i], i))
    payments = [Fraction(0)] * len(bids)
    prev_payment = None
    prev_workload = None
    for i in order:
        if prev_payment is None:
            payments[i] = bids[i] * workloads[i]
        else:
            payments[i] = prev_payment + bids[i] * (workloads[i] - prev_workload)
        prev_payment, prev_workload = payments[i], workloads[i]
    return tuple(payments)


def truthful_payment(
    h_value: RationalLike,
    bid: RationalLike,
    workload: RationalLike,
    curve: WorkCurve,
) -> Fraction:
    """Payment from the truthful identity: h + bid*workload - curve integral."""
    h_value, bid, workload = rat(h_value), rat(bid), rat(workload)
    at_bid = curve.value_at(bid)
    if at_bid != workload:
        raise PaymentInconsistency(
            f"curve value {rat_str(at_bid)} at bid {rat_str(bid)} does not "
            f"match workload {rat_str(workload)}"
        )
    return h_value + bid * workload - integrate(curve, 0, bid)


def vcg_payments(
    instance: Instance, assignment: Assignment
) -> tuple[Fraction, ...]:
    """Clarke pivot payments for the total-running-time minimizer.

    Each machine is paid the externality it imposes: the minimum total
    running time without it, minus the running time the others actually
    incur.  A single machine is paid its cost (the pivot is vacuous, so
    utility is pinned at zero).
    """
    expected = vcg_allocate(instance)
    if assignment.workloads != expected.workloads:
        raise DomainError("payments are defined on the rule's own allocation")
    L = instance.total_length
    if instance.m == 1:
        return (instance.bids[0] * L,)
    payments = []
    for i in range(instance.m):
        min_without = min(b for k, b in enumerate(instance.bids) if k != i) * L
        others_cost = sum(
            (
                instance.bids[k] * assignment.workloads[k]
                for k in range(instance.m)
                if k != i
            ),
            Fraction(0),
        )
        payments.append(min_without - others_cost)
    return tuple(payments)


@dataclass
class Mechanism:
    """An allocation rule paired with a payment scheme."""

    name: str
    rule: Callable[[Instance], Assignment]
    payment_fn: Callable[[Instance, Assignment], Sequence[Fraction]]

    def run(self, instance: Instance) -> Outcome:
        allocation = self.rule(instance)
        payments = tuple(self.payment_fn(instance, allocation))
        return Outcome(allocation, payments)


vcg_mechanism = Mechanism("vcg", vcg_allocate, vcg_payments)


def ef_chain_mechanism(rule) -> Mechanism:
    """Pair any locally efficient rule with its envy-free chain payments."""

    def pay(instance: Instance, allocation) -> Sequence[Fraction]:
        return ef_chain_payments(instance.bids, allocation.workloads)

    return Mechanism(f"{getattr(rule, 'name', 'rule')}+ef-chain", rule, pay)


def bid_proportional_mechanism(rule) -> Mechanism:
    """Pays bid times workload; useful as a known-untruthful specimen."""

    def pay(instance: Instance, allocation) -> Sequence[Fraction]:
        return tuple(
            b * w for b, w in zip(instance.bids, allocation.workloads)
        )

    return Mechanism(f"{getattr(rule, 'name', 'rule')}+bid-cost", rule, pay)


_curve_cache: dict = {}
_curve_lock = threading.Lock()


def _mechanism_curve(mechanism: Mechanism, jobs, others_bids, cap) -> WorkCurve:
    key = (id(mechanism.rule), jobs, others_bids)
    with _curve_lock:
        cached = _curve_cache.get(key)
    if cached is not None and cached.cap >= cap:
        return cached
    curve = build_workcurve(mechanism.rule, others_bids, jobs, cap)
    with _curve_lock:
        _curve_cache[key] = curve
    return curve


def extract_h(
    mechanism: Mechanism,
    jobs: Sequence[RationalLike],
    others_bids: Sequence[RationalLike],
    probe_bid: RationalLike,
) -> Fraction:
    """Evaluate the additive term h at one competitor profile.

    Rearranges the truthful payment identity at the probe bid:
    h = p - probe*w + integral of the bid response from 0 to the probe.
    For a truthful mechanism the result is independent of the probe.
    """
    jobs = rats(jobs)
    others_bids = rats(others_bids)
    probe_bid = rat(probe_bid)
    if probe_bid <= 0:
        raise DomainError("probe bid must be positive")
    outcome = mechanism.run(Instance(jobs, (probe_bid, *others_bids)))
    w = outcome.allocation.workloads[0]
    p = outcome.payments[0]
    cap = max(probe_bid * 2, *others_bids) * 2
    curve = _mechanism_curve(mechanism, jobs, others_bids, cap)
    return p - probe_bid * w + integrate(curve, 0, probe_bid)


def extract_h_checked(
    mechanism: Mechanism,
    jobs: Sequence[RationalLike],
    others_bids: Sequence[RationalLike],
    probes: Sequence[RationalLike],
) -> Fraction:
    """Extract h at several probes; disagreement raises NotTruthfulEvidence."""
    probes = rats(probes)
    if len(probes) < 2:
        raise DomainError("need at least two probes to cross-check")
    values = [extract_h(mechanism, jobs, others_bids, p) for p in probes]
    for probe, value in zip(probes[1:], values[1:]):
        if value != values[0]:
            raise NotTruthfulEvidence(
                rats(others_bids), probes[0], values[0], probe, value
            )
    return values[0]


@dataclass
class HFunction:
    """Memoized additive-term evaluations for an (assumed) truthful mechanism.

    Values are represented extensionally: certificates only ever need h at
    finitely many competitor profiles.  Every evaluation is cross-checked
    at probes below the lowest competitor bid and above the highest (the
    response curve differs across that range, which is what exposes
    untruthful payments) and cached behind a lock for concurrent use.
    """

    mechanism: Mechanism
    jobs: tuple[Fraction, ...]
    low_factors: tuple[Fraction, ...] = (Fraction(1, 2), Fraction(1, 3))
    high_factor: Fraction = Fraction(2)
    _memo: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def __call__(self, others_bids: Sequence[RationalLike]) -> Fraction:
        key = rats(others_bids)
        with self._lock:
            if key in self._memo:
                return self._memo[key]
        probes = [min(key) * f for f in self.low_factors]
        probes.append(max(key) * self.high_factor)
        value = extract_h_checked(self.mechanism, self.jobs, key, probes)
        with self._lock:
            self._memo[key] = value
        return value
