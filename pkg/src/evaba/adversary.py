"""Byzantine party strategies.

Each strategy deviates in one place and otherwise runs the honest code,
always under its own identity (the oracle refuses anything else).
Crash faults need no subclass: the kernel stops a crashed party from
sending and handling.
"""

from __future__ import annotations

import hashlib

from .evaba import Party
from .messages import Ack, Done, Send
from .ppb import PbBroadcast, PrepareKey, signed_tuple
from .promotion import Promotion


def alternate_value(seed: int, pid: int) -> str:
    return f"p{pid}/alt-{hashlib.sha256(f'alt:{seed}:{pid}'.encode()).hexdigest()[:10]}"


class CrashedParty(Party):
    honest = False
    behavior = "crash"


class EquivocatingPromotion(Promotion):
    """Step 1 goes out with two different values to two halves of the parties."""

    def __init__(self, *args, alt_value: str, owner: "EquivocatingParty", **kwargs):
        super().__init__(*args, **kwargs)
        self.alt_value = alt_value
        self.owner = owner

    def start(self) -> None:
        self.step = 1
        sid = self.base.at(1)
        values = (self.value, self.alt_value)
        self.broadcasts = [PbBroadcast(sid, v, self.oracle) for v in values]
        n = self.owner.n
        half = n // 2
        for dst in range(1, n + 1):
            value = values[0] if dst <= half else values[1]
            self.owner.send(dst, Send(sid, value, self.prepare, None))
        # vouch for both versions itself
        for value in values:
            share = self.owner.keys.share_sign(signed_tuple(sid, value))
            self.owner.send(self.owner.pid, Ack(sid, share))


class EquivocatingParty(Party):
    honest = False
    behavior = "equivocate-send"

    def __init__(self, *args, alt_value: str, **kwargs):
        super().__init__(*args, **kwargs)
        self.alt_value = alt_value

    def _make_promotion(self, view, value, key):
        return EquivocatingPromotion(
            self.instance, self.pid, view, value, key, self.oracle, send=self._send_pb,
            on_done=lambda v, sig: self._on_promoted(view, v, sig),
            alt_value=self.alt_value, owner=self)


class UnselectedBroadcaster(Party):
    """Promotes its own input in every view, committee member or not."""

    honest = False
    behavior = "unselected-broadcaster"

    def _on_committee(self, st, committee):
        if self.pid not in committee:
            self.log("promote", view=committee.view, value=self.input)
            key = PrepareKey(self.prepare.view, self.prepare.proof)
            self.promotion = self._make_promotion(committee.view, self.input, key)
            self.promotion.start()
        super()._on_committee(st, committee)


class SilentAfterPromote(Party):
    """Goes completely silent as soon as one of its promotions completes."""

    honest = False
    behavior = "silent-after-promote"

    def _on_promoted(self, view, value, sig):
        self.halted = True
        self.log("silent", view=view)


class DoneSpammer(Party):
    """Sends every DONE five times plus one DONE carrying a step-3 certificate."""

    honest = False
    behavior = "done-spammer"
    copies = 5

    def _send_done(self, view, proof):
        proposer, value, sig = proof
        for _ in range(self.copies):
            self.multicast(Done(view, proposer, value, sig))
        step3 = self.promotion.certificates.get(3) if (
            self.promotion is not None and self.promotion.view == view) else None
        if step3 is not None:
            self.multicast(Done(view, self.pid, self.promotion.value, step3))


BEHAVIOR_CLASSES = {
    "honest": Party,
    "crash": CrashedParty,
    "equivocate-send": EquivocatingParty,
    "unselected-broadcaster": UnselectedBroadcaster,
    "silent-after-promote": SilentAfterPromote,
    "done-spammer": DoneSpammer,
}
