"""The per-party Efficient-VABA state machine.

Each view runs: committee selection, promotion by committee members,
propose/suggest, the DONE / SKIP barrier, leader election mapped onto the
committee, and the view change that either decides or carries the elected
party's prepare and lock forward.

Blocking waits in the protocol become phases of :class:`ViewState`;
:meth:`Party._advance` re-evaluates the current phase after every message.
Message handlers that the protocol runs outside the view loop (DONE,
SKIP-SHARE, SKIP, VIEW-CHANGE) accept messages for any view.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

from .committee import Committee, ShareCollector, committee_collector, committee_from
from .crypto_oracle import Oracle, ThresholdSig
from .election import election_collector, elected_party
from .messages import (Ack, Done, Proposal, Send, Share, Skip, SkipShare, Suggestion,
                       ViewChange)
from .ppb import PbReceiver, PrepareKey, StepId, ex_pb_val, promotion_tuple, signed_tuple
from .promotion import Promotion, PromotionReceiver
from .sim_core import Envelope, Simulation


def default_validity(n: int) -> Callable[[str], bool]:
    """Non-empty payload that names its proposer: ``p<id>/<tag>``."""
    pattern = re.compile(r"p(\d+)/[0-9a-z-]+")

    def valid(value) -> bool:
        if not isinstance(value, str):
            return False
        m = pattern.fullmatch(value)
        return m is not None and 1 <= int(m.group(1)) <= n
    return valid


def any_nonempty(n: int) -> Callable[[str], bool]:
    return lambda value: isinstance(value, str) and value != ""


VALIDITY_PREDICATES = {"default": default_validity, "nonempty": any_nonempty}


def skip_tuple(instance: str, view: int) -> tuple:
    return (instance, "SKIP", view)


@dataclass
class ProtocolParams:
    n: int
    f: int
    instance: str = "evaba"
    max_views: int = 20
    validity: str = "default"

    def __post_init__(self):
        self.valid = VALIDITY_PREDICATES[self.validity](self.n)


@dataclass
class PrepareState:
    view: int
    value: str
    proof: Optional[ThresholdSig] = None

    @property
    def certified_view(self) -> int:
        return self.view if self.proof is not None else 0


@dataclass(frozen=True)
class Decision:
    value: str
    view: int
    evidence: ThresholdSig


@dataclass
class ViewState:
    phase: str = "idle"
    committee: Optional[Committee] = None
    suggest: bool = False
    best: Optional[tuple] = None  # first valid (proposer, value, step-4 cert) seen
    own: Optional[tuple] = None
    suggesters: set = field(default_factory=set)
    done_sent: bool = False
    dones: set = field(default_factory=set)
    skip_share_sent: bool = False
    skip_shares: dict = field(default_factory=dict)
    skip: bool = False
    skip_sent: bool = False
    vc_from: set = field(default_factory=set)
    vc_buffer: list = field(default_factory=list)
    send_buffer: list = field(default_factory=list)


class Party:
    honest = True
    behavior = "honest"

    def __init__(self, pid: int, params: ProtocolParams, sim: Simulation, oracle: Oracle,
                 value: str):
        self.pid = pid
        self.params = params
        self.instance = params.instance
        self.n, self.f = params.n, params.f
        self.quorum = params.n - params.f
        self.sim = sim
        self.oracle = oracle
        self.keys = oracle.holder(pid)
        self.input = value

        self.lock = 0
        self.prepare = PrepareState(0, value, None)
        self.decided = False  # the per-view DECIDED flag
        self.decision: Optional[Decision] = None
        self.view = 0
        self.halted = False
        self.party_of: dict[int, int] = {}
        self.views: dict[int, ViewState] = {}
        self.collectors: dict[tuple[str, int], ShareCollector] = {}
        self.pb = PbReceiver()
        self.evidence = PromotionReceiver(self.pb, self.instance)
        self.promotion: Optional[Promotion] = None

        self._dispatch = {
            Share: self._on_share, Send: self._on_send, Ack: self._on_ack,
            Proposal: self._on_completed, Suggestion: self._on_completed,
            Done: self._on_done, SkipShare: self._on_skip_share, Skip: self._on_skip,
            ViewChange: self._on_view_change,
        }

    # -- plumbing ---------------------------------------------------------

    def multicast(self, msg) -> None:
        self.sim.multicast(self.pid, msg)

    def send(self, dst: int, msg) -> None:
        self.sim.inject(self.pid, dst, msg)

    def log(self, ev: str, **fields) -> None:
        self.sim.record(ev, party=self.pid, **fields)

    def vs(self, view: int) -> ViewState:
        st = self.views.get(view)
        if st is None:
            st = self.views[view] = ViewState()
        return st

    def collector(self, purpose: str, view: int) -> ShareCollector:
        key = (purpose, view)
        col = self.collectors.get(key)
        if col is None:
            make = committee_collector if purpose == "cs" else election_collector
            col = self.collectors[key] = make(self.oracle, self.instance, view)
        return col

    def decide_value(self) -> Optional[Decision]:
        return self.decision

    # -- entry points -----------------------------------------------------

    def start(self) -> None:
        self._enter_view(1)
        self._advance()

    def on_envelope(self, env: Envelope) -> None:
        if self.halted:
            return
        handler = self._dispatch.get(type(env.payload))
        if handler is None:
            return
        handler(env.src, env.payload)
        self._advance()

    # -- view loop --------------------------------------------------------

    def _enter_view(self, view: int) -> None:
        self.view = view
        st = self.vs(view)
        st.phase = "committee"
        st.suggest = False
        self.log("enter_view", view=view, lock=self.lock, prepare_view=self.prepare.view,
                 prepare_cert=self.prepare.certified_view, prepare_value=self.prepare.value)
        label = self.collector("cs", view).label
        self.multicast(Share("cs", self.instance, view, self.keys.coin_share(label)))

    def _advance(self) -> None:
        while not self.halted and self.view:
            view = self.view
            st = self.views[view]
            if st.phase == "committee":
                out = self.collector("cs", view).result
                if out is None:
                    return
                self._on_committee(st, committee_from(out, view))
            elif st.phase == "running":
                if not st.suggest and st.best is not None:
                    st.suggest = True
                    self.multicast(Suggestion(view, *st.best))
                if not st.done_sent and not st.skip and len(st.suggesters) >= self.quorum:
                    st.done_sent = True
                    self.log("done", view=view)
                    self._send_done(view, st.own or st.best)
                if not st.skip:
                    return
                for member in st.committee:
                    self.evidence.abandon_all(member, view)
                st.phase = "electing"
                label = self.collector("elect", view).label
                self.multicast(Share("elect", self.instance, view, self.keys.coin_share(label)))
            elif st.phase == "electing":
                out = self.collector("elect", view).result
                if out is None:
                    return
                leader = elected_party(view, out.value, st.committee)
                self.party_of[view] = leader
                self.log("elect", view=view, raw=out.value, leader=leader)
                st.phase = "view_change"
                buffered, st.vc_buffer = st.vc_buffer, []
                for src, msg in buffered:
                    self._process_view_change(src, msg)
                self.multicast(ViewChange(view, self.evidence.get_prepare(leader, view),
                                          self.evidence.get_lock(leader, view),
                                          self.evidence.get_commit(leader, view)))
            elif st.phase == "view_change":
                if len(st.vc_from) < self.quorum:
                    return
                st.phase = "complete"
                if self._should_halt():
                    self.halted = True
                    self.log("halt", view=view)
                    return
                self._enter_view(view + 1)
            else:
                return

    def _should_halt(self) -> bool:
        if self.view >= self.params.max_views:
            return True
        # a decided party stays for one more full view to drive the others' barriers
        return self.decision is not None and self.view >= self.decision.view + 1

    def _on_committee(self, st: ViewState, committee: Committee) -> None:
        view = committee.view
        st.committee = committee
        self.log("committee", view=view, members=list(committee.members))
        if self.pid in committee:
            self._start_promotion(view)
        self.decided = False
        st.phase = "running"
        buffered, st.send_buffer = st.send_buffer, []
        for src, msg in buffered:
            self._handle_send(src, msg)

    def _start_promotion(self, view: int, value: Optional[str] = None) -> None:
        # Fresh requests replace PREPARE only in view 1 or after a decision when
        # the application has more to order; a single-shot run never does.
        fresh = self.next_requests() if self.decided else None
        if view == 1 or fresh is not None:
            self.prepare = PrepareState(view, fresh or self.input, self.prepare.proof)
        key = PrepareKey(self.prepare.view, self.prepare.proof)
        value = self.prepare.value if value is None else value
        self.log("promote", view=view, value=value)
        self.promotion = self._make_promotion(view, value, key)
        self.promotion.start()

    def next_requests(self) -> Optional[str]:
        return None

    def _make_promotion(self, view: int, value: str, key: PrepareKey) -> Promotion:
        return Promotion(self.instance, self.pid, view, value, key, self.oracle,
                         send=self._send_pb, on_done=lambda v, sig: self._on_promoted(view, v, sig))

    def _send_pb(self, sid: StepId, value: str, prepare, in_proof) -> None:
        self.multicast(Send(sid, value, prepare, in_proof))

    def _on_promoted(self, view: int, value: str, sig: ThresholdSig) -> None:
        if self.view != view:
            return
        st = self.views[view]
        st.own = (self.pid, value, sig)
        self.multicast(Proposal(view, self.pid, value, sig))
        self.multicast(Suggestion(view, self.pid, value, sig))
        st.suggest = True

    def _send_done(self, view: int, proof: tuple) -> None:
        proposer, value, sig = proof
        self.multicast(Done(view, proposer, value, sig))

    # -- handlers ---------------------------------------------------------

    def _on_share(self, src: int, msg: Share) -> None:
        if msg.instance != self.instance or msg.purpose not in ("cs", "elect"):
            return
        self.collector(msg.purpose, msg.view).add(src, msg.share)

    def _on_send(self, src: int, msg: Send) -> None:
        sid = msg.step_id
        if sid.instance != self.instance:
            return
        st = self.vs(sid.view)
        if st.committee is None:
            st.send_buffer.append((src, msg))
            return
        self._handle_send(src, msg)

    def _handle_send(self, src: int, msg: Send) -> None:
        sid = msg.step_id
        if not self.pb.accepts(sid, src, self.views[sid.view].committee):
            return
        if not ex_pb_val(sid, msg.value, msg.prepare, msg.in_proof, lock=self.lock,
                         party_of=self.party_of, oracle=self.oracle, valid=self.params.valid):
            return
        self.pb.deliver(sid)
        self.log("pb_deliver", sender=sid.party, view=sid.view, pb=sid.step, value=msg.value)
        self.evidence.record_delivery(sid.party, sid.view, sid.step, msg.value, msg.in_proof)
        self.send(src, Ack(sid, self.keys.share_sign(signed_tuple(sid, msg.value))))

    def _on_ack(self, src: int, msg: Ack) -> None:
        p = self.promotion
        if p is None or p.view != self.view or msg.step_id.promotion() != p.base.promotion():
            return
        p.on_ack(src, msg.step_id, msg.share)

    def _completion_valid(self, msg) -> bool:
        return self.oracle.threshold_validate(
            promotion_tuple(self.instance, msg.proposer, msg.view, 4, msg.value), msg.proof)

    def _on_completed(self, src: int, msg) -> None:
        if not self._completion_valid(msg):
            return
        st = self.vs(msg.view)
        if st.best is None:
            st.best = (msg.proposer, msg.value, msg.proof)
        if isinstance(msg, Suggestion):
            st.suggesters.add(src)

    def _on_done(self, src: int, msg: Done) -> None:
        st = self.vs(msg.view)
        if src in st.dones or not self._completion_valid(msg):
            return
        st.dones.add(src)
        if len(st.dones) >= self.quorum and not st.skip_share_sent:
            st.skip_share_sent = True
            self.log("done_quorum", view=msg.view)
            share = self.keys.share_sign(skip_tuple(self.instance, msg.view))
            self.multicast(SkipShare(msg.view, share))

    def _on_skip_share(self, src: int, msg: SkipShare) -> None:
        st = self.vs(msg.view)
        if src in st.skip_shares:
            return
        if not self.oracle.share_validate(skip_tuple(self.instance, msg.view), src, msg.share):
            return
        st.skip_shares[src] = msg.share
        self._set_skip(msg.view)
        if len(st.skip_shares) == self.quorum and not st.skip_sent:
            st.skip_sent = True
            self.multicast(Skip(msg.view, self.oracle.threshold_sign(st.skip_shares.values())))

    def _on_skip(self, src: int, msg: Skip) -> None:
        if not self.oracle.threshold_validate(skip_tuple(self.instance, msg.view), msg.proof):
            return
        st = self.vs(msg.view)
        self._set_skip(msg.view)
        if not st.skip_sent:
            st.skip_sent = True
            self.multicast(Skip(msg.view, msg.proof))

    def _set_skip(self, view: int) -> None:
        st = self.vs(view)
        if not st.skip:
            st.skip = True
            self.log("skip", view=view)

    def _on_view_change(self, src: int, msg: ViewChange) -> None:
        if msg.view not in self.party_of:
            self.vs(msg.view).vc_buffer.append((src, msg))
            return
        self._process_view_change(src, msg)

    def _process_view_change(self, src: int, msg: ViewChange) -> None:
        view = msg.view
        st = self.vs(view)
        if src in st.vc_from:
            return
        st.vc_from.add(src)
        leader = self.party_of[view]

        def certified(evidence, step) -> bool:
            value, sig = evidence
            return value is not None and self.oracle.threshold_validate(
                promotion_tuple(self.instance, leader, view, step, value), sig)

        if certified(msg.commit, 3):
            self._decide(msg.commit[0], view, msg.commit[1])
        if view > self.lock and certified(msg.lock, 2):
            self.lock = view
            self.log("lock", view=view, value=msg.lock[0])
        if view > self.prepare.certified_view and certified(msg.prepare, 1):
            self.prepare = PrepareState(view, msg.prepare[0], msg.prepare[1])
            self.log("prepare", view=view, value=msg.prepare[0])

    def _decide(self, value: str, view: int, evidence: ThresholdSig) -> None:
        self.decided = True
        if self.decision is None:
            self.decision = Decision(value, view, evidence)
            self.log("decide", view=view, value=value)
        elif value != self.decision.value:
            # never expected; logged so the audit reports it
            self.log("decide", view=view, value=value)
