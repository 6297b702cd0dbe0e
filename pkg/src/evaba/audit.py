"""Replay a run's event log against the protocol's safety and liveness invariants.

The log is a list of flat records (see ``harness``); the first record is the
``run`` header naming n, f, the Byzantine parties and the validity predicate.
Every check is a function ``(ctx) -> iterable of Violation`` registered in
:data:`CHECKS`; each violation points at the first offending record.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

from .evaba import VALIDITY_PREDICATES


@dataclass(frozen=True)
class Violation:
    check: str
    index: int
    detail: str

    def as_dict(self) -> dict:
        return asdict(self)


class AuditContext:
    def __init__(self, events: list[dict]):
        if not events or events[0].get("ev") != "run":
            raise ValueError("event log must start with a 'run' header record")
        self.events = events
        head = events[0]
        self.header = head
        self.n, self.f = head["n"], head["f"]
        self.quorum = self.n - self.f
        self.byzantine = {int(k) for k in head.get("byzantine", {})}
        self.honest = set(range(1, self.n + 1)) - self.byzantine
        self.valid = VALIDITY_PREDICATES[head.get("validity", "default")](self.n)
        self.max_views = head.get("max_views", 20)
        self.fairness_bound = head.get("fairness_bound")
        self.by_kind: dict[str, list[tuple[int, dict]]] = defaultdict(list)
        for i, rec in enumerate(events):
            self.by_kind[rec["ev"]].append((i, rec))
        self.inputs = {rec["value"] for _, rec in self.by_kind["input"]}
        self.committees: dict[tuple[int, int], list] = {}
        for _, rec in self.by_kind["committee"]:
            self.committees.setdefault((rec["party"], rec["view"]), rec["members"])

    def of(self, kind: str, honest_only: bool = False) -> list[tuple[int, dict]]:
        recs = self.by_kind.get(kind, [])
        if honest_only:
            return [(i, r) for i, r in recs if r.get("party") in self.honest]
        return recs


CHECKS: dict[str, Callable[[AuditContext], Iterable[Violation]]] = {}


def check(name: str):
    def register(fn):
        CHECKS[name] = fn
        return fn
    return register


# -- network ------------------------------------------------------------------

@check("exactly_once")
def _exactly_once(ctx):
    seen: set[int] = set()
    for i, rec in ctx.of("deliver"):
        if rec["seq"] in seen:
            yield Violation("exactly_once", i, f"envelope {rec['seq']} delivered twice")
        seen.add(rec["seq"])
    for i, rec in ctx.of("end"):
        if any(s >= rec["injected"] for s in seen):
            yield Violation("exactly_once", i, "delivered an envelope that was never injected")
        if rec.get("quiescent") and len(seen) != rec["injected"]:
            yield Violation("exactly_once", i,
                            f"quiescent with {len(seen)} of {rec['injected']} delivered")


@check("fairness")
def _fairness(ctx):
    bound = ctx.fairness_bound
    if bound is None:
        return
    for i, rec in ctx.of("deliver"):
        if rec["wait"] > bound:
            yield Violation("fairness", i, f"envelope {rec['seq']} waited {rec['wait']} > {bound}")


# -- committee and election ---------------------------------------------------

@check("committee_validity")
def _committee_validity(ctx):
    for i, rec in ctx.of("committee", honest_only=True):
        members = rec["members"]
        if len(members) != ctx.f + 1 or len(set(members)) != len(members):
            yield Violation("committee_validity", i, f"bad committee size/members {members}")
        elif not set(members) & ctx.honest:
            yield Violation("committee_validity", i, f"committee {members} has no honest member")


@check("committee_agreement")
def _committee_agreement(ctx):
    first: dict[int, list] = {}
    for i, rec in ctx.of("committee", honest_only=True):
        seen = first.setdefault(rec["view"], rec["members"])
        if seen != rec["members"]:
            yield Violation("committee_agreement", i,
                            f"view {rec['view']}: {rec['members']} vs {seen}")


@check("election_agreement")
def _election_agreement(ctx):
    first: dict[int, int] = {}
    for i, rec in ctx.of("elect", honest_only=True):
        view, leader = rec["view"], rec["leader"]
        members = ctx.committees.get((rec["party"], view))
        if members is None or leader not in members:
            yield Violation("election_agreement", i, f"leader {leader} not in committee {members}")
        elif rec["raw"] in members and leader != rec["raw"]:
            yield Violation("election_agreement", i, "member leader was remapped")
        if first.setdefault(view, leader) != leader:
            yield Violation("election_agreement", i, f"view {view}: {leader} vs {first[view]}")


# -- provable broadcast -------------------------------------------------------

@check("pb_integrity")
def _pb_integrity(ctx):
    seen: set = set()
    for i, rec in ctx.of("pb_deliver", honest_only=True):
        key = (rec["party"], rec["sender"], rec["view"], rec["pb"])
        if key in seen:
            yield Violation("pb_integrity", i, f"party {key[0]} delivered {key[1:]} twice")
        seen.add(key)


@check("pb_selected")
def _pb_selected(ctx):
    for i, rec in ctx.of("pb_deliver", honest_only=True):
        members = ctx.committees.get((rec["party"], rec["view"]))
        if members is None or rec["sender"] not in members:
            yield Violation("pb_selected", i, f"party {rec['party']} delivered from "
                            f"non-member {rec['sender']} in view {rec['view']}")


def _pb_sigs(ctx):
    return [(i, r) for i, r in ctx.of("tsig") if r.get("kind") == "pb"]


@check("pb_abandon")
def _pb_abandon(ctx):
    # a party abandons every promotion of a view before it runs the election
    elected: dict[tuple, int] = {}
    for i, rec in ctx.of("elect", honest_only=True):
        elected.setdefault((rec["party"], rec["view"]), i)
    for i, rec in ctx.of("pb_deliver", honest_only=True):
        cut = elected.get((rec["party"], rec["view"]))
        if cut is not None and cut < i:
            yield Violation("pb_abandon", i, f"party {rec['party']} delivered step {rec['pb']} "
                            f"of {rec['sender']} after abandoning view {rec['view']}")


@check("pb_uniqueness")
def _pb_uniqueness(ctx):
    values: dict[tuple, str] = {}
    for i, rec in _pb_sigs(ctx):
        key = (rec["sender"], rec["view"], rec["pb"])
        if values.setdefault(key, rec["value"]) != rec["value"]:
            yield Violation("pb_uniqueness", i, f"two certified values for {key}")


@check("threshold_arithmetic")
def _threshold_arithmetic(ctx):
    for i, rec in ctx.of("tsig"):
        signers = rec["signers"]
        if len(set(signers)) < ctx.quorum:
            yield Violation("threshold_arithmetic", i,
                            f"certificate with {len(set(signers))} < {ctx.quorum} signers")


@check("provability_dispersal")
def _provability_dispersal(ctx):
    deliveries: dict[tuple, list[tuple[int, int]]] = defaultdict(list)
    for i, rec in ctx.of("pb_deliver", honest_only=True):
        deliveries[(rec["sender"], rec["view"], rec["pb"], rec["value"])].append((i, rec["party"]))

    def honest_before(key, index) -> int:
        return len({p for j, p in deliveries.get(key, ()) if j < index})

    for i, rec in _pb_sigs(ctx):
        s, v, step, value = rec["sender"], rec["view"], rec["pb"], rec["value"]
        steps = (step - 1, step) if step >= 2 else (step,)
        for j in steps:
            got = honest_before((s, v, j, value), i)
            if got < ctx.f + 1:
                yield Violation("provability_dispersal", i,
                                f"step-{step} certificate of {s} in view {v}: only {got} honest "
                                f"step-{j} deliveries")


@check("evidence_chaining")
def _evidence_chaining(ctx):
    # Step 1 carries no certificate, so an equivocating sender can show honest
    # parties different step-1 values; from step 2 on the value is pinned.
    values: dict[tuple, str] = {}
    for i, rec in ctx.of("pb_deliver", honest_only=True):
        if rec["pb"] < 2:
            continue
        key = (rec["sender"], rec["view"])
        if values.setdefault(key, rec["value"]) != rec["value"]:
            yield Violation("evidence_chaining", i, f"certified value changed within "
                            f"promotion of {key[0]} in view {key[1]}")


@check("commit_implies_lock")
def _commit_implies_lock(ctx):
    locks: dict[tuple, set] = defaultdict(set)
    for i, rec in ctx.of("pb_deliver", honest_only=True):
        key = (rec["sender"], rec["view"], rec["value"])
        if rec["pb"] == 3:
            locks[key].add(rec["party"])
        elif rec["pb"] == 4 and len(locks[key]) < ctx.f + 1:
            yield Violation("commit_implies_lock", i,
                            f"commit evidence for {key} with {len(locks[key])} lock holders")


# -- agreement ----------------------------------------------------------------

@check("agreement")
def _agreement(ctx):
    first = None
    for i, rec in ctx.of("decide", honest_only=True):
        if first is None:
            first = rec["value"]
        elif rec["value"] != first:
            yield Violation("agreement", i, f"party {rec['party']} decided {rec['value']!r} "
                            f"but {first!r} was decided")


@check("integrity")
def _integrity(ctx):
    for i, rec in ctx.of("decide", honest_only=True):
        if rec["value"] not in ctx.inputs:
            yield Violation("integrity", i, f"decided {rec['value']!r} was never proposed")


@check("external_validity")
def _external_validity(ctx):
    for i, rec in ctx.of("decide", honest_only=True):
        if not ctx.valid(rec["value"]):
            yield Violation("external_validity", i, f"decided invalid value {rec['value']!r}")


@check("liveness")
def _liveness(ctx):
    ends = ctx.of("end")
    if not ends:
        return
    index = ends[-1][0]
    decided = {r["party"]: r["view"] for _, r in ctx.of("decide", honest_only=True)}
    for pid in sorted(ctx.honest):
        if pid not in decided:
            yield Violation("liveness", index, f"honest party {pid} never decided")
        elif decided[pid] > ctx.max_views:
            yield Violation("liveness", index, f"party {pid} decided after max views")


@check("lock_safety")
def _lock_safety(ctx):
    decided_views = {r["view"] for _, r in ctx.of("decide", honest_only=True)}
    for i, rec in ctx.of("enter_view", honest_only=True):
        j = rec["view"] - 1
        if j in decided_views and rec["lock"] < j:
            yield Violation("lock_safety", i, f"party {rec['party']} entered view {j + 1} "
                            f"with LOCK {rec['lock']} after a decision in view {j}")


@check("prepare_convergence")
def _prepare_convergence(ctx):
    locked_views = {r["view"] for _, r in ctx.of("lock", honest_only=True)}
    values: dict[int, str] = {}
    for i, rec in ctx.of("enter_view", honest_only=True):
        j = rec["view"] - 1
        if j not in locked_views:
            continue
        if rec["prepare_cert"] != j:
            yield Violation("prepare_convergence", i, f"party {rec['party']} entered view "
                            f"{j + 1} with PREPARE view {rec['prepare_cert']}, expected {j}")
        elif values.setdefault(j, rec["prepare_value"]) != rec["prepare_value"]:
            yield Violation("prepare_convergence", i, f"PREPARE values diverge after view {j}")


@check("skip_soundness")
def _skip_soundness(ctx):
    first_quorum: dict[int, int] = {}
    for i, rec in ctx.of("done_quorum"):
        first_quorum.setdefault(rec["view"], i)
    for i, rec in ctx.of("skip", honest_only=True):
        q = first_quorum.get(rec["view"])
        if q is None or q > i:
            yield Violation("skip_soundness", i, f"party {rec['party']} skipped view "
                            f"{rec['view']} before any DONE quorum")


@check("suggestion_quorum")
def _suggestion_quorum(ctx):
    suggesters: dict[tuple, list[tuple[int, int]]] = defaultdict(list)
    for i, rec in ctx.of("deliver"):
        if rec["type"] == "SUGGESTION":
            suggesters[(rec["dst"], rec["view"])].append((i, rec["src"]))
    for i, rec in ctx.of("done", honest_only=True):
        got = {s for j, s in suggesters[(rec["party"], rec["view"])] if j < i}
        if len(got) < ctx.quorum:
            yield Violation("suggestion_quorum", i, f"party {rec['party']} sent DONE after "
                            f"{len(got)} suggestions")


def message_bounds(n: int, f: int) -> dict[str, int]:
    """Per-view upper bounds on envelopes sent by honest parties, per type."""
    return {
        "SHARE(cs)": n * n,
        "SHARE(elect)": n * n,
        "PROPOSAL": (f + 1) * n,
        # one relay multicast per party plus the completers' own suggestion
        "SUGGESTION": n * n + (f + 1) * n,
        "DONE": n * n,
        "SKIP-SHARE": n * n,
        "SKIP": n * n,
        "VIEW-CHANGE": n * n,
    }


@check("message_bounds")
def _message_bounds(ctx):
    bounds = message_bounds(ctx.n, ctx.f)
    per_view: Counter = Counter()
    first_over: dict[tuple, int] = {}
    for i, rec in ctx.of("deliver"):
        if rec["src"] not in ctx.honest:
            continue
        kind, view = rec["type"], rec["view"]
        if kind in ("SEND", "ACK"):
            key = (kind, view, rec["pb"])
            limit = ctx.n * (ctx.f + 1)
        else:
            key = (kind, view, None)
            limit = bounds.get(kind)
        per_view[key] += 1
        if limit is not None and per_view[key] > limit and key not in first_over:
            first_over[key] = i
            yield Violation("message_bounds", i, f"{kind} in view {view} step {key[2]} "
                            f"exceeds {limit}")


def audit_event_log(events: list[dict], checks: Iterable[str] = None) -> list[Violation]:
    ctx = AuditContext(events)
    names = list(CHECKS) if checks is None else list(checks)
    found: list[Violation] = []
    for name in names:
        found.extend(CHECKS[name](ctx))
    found.sort(key=lambda v: (v.index, v.check))
    return found
