"""Proposal promotion: four chained P-PB steps per selected sender.

Step ``s`` carries the certificate of step ``s - 1`` as its input proof, so a
receiver that delivers step 2, 3 or 4 learns a certificate it can later
hand over during the view change as prepare, lock or commit evidence.
"""

from __future__ import annotations

from typing import Callable, Optional

from .crypto_oracle import Oracle, SignShare, ThresholdSig
from .ppb import PbBroadcast, PbReceiver, PrepareKey, StepId

Evidence = tuple  # (value, certificate) or EMPTY
EMPTY: Evidence = (None, None)

_SLOT_FOR_STEP = {2: "prepare", 3: "lock", 4: "commit"}


class PromotionReceiver:
    """Evidence learned from other parties' promotions, keyed by (sender, view)."""

    def __init__(self, pb: PbReceiver, instance: str):
        self.pb = pb
        self.instance = instance
        self._slots: dict[tuple[int, int], dict[str, Evidence]] = {}

    def record_delivery(self, sender: int, view: int, step: int, value: str,
                        in_proof: Optional[ThresholdSig]) -> None:
        slot = _SLOT_FOR_STEP.get(step)
        if slot is None:
            return
        self._slots.setdefault((sender, view), {})[slot] = (value, in_proof)

    def abandon_all(self, sender: int, view: int) -> None:
        for step in (1, 2, 3, 4):
            self.pb.abandon(StepId(self.instance, sender, view, step))

    def _get(self, sender: int, view: int, slot: str) -> Evidence:
        return self._slots.get((sender, view), {}).get(slot, EMPTY)

    def get_prepare(self, sender: int, view: int) -> Evidence:
        return self._get(sender, view, "prepare")

    def get_lock(self, sender: int, view: int) -> Evidence:
        return self._get(sender, view, "lock")

    def get_commit(self, sender: int, view: int) -> Evidence:
        return self._get(sender, view, "commit")


SendFn = Callable[[StepId, str, Optional[PrepareKey], Optional[ThresholdSig]], None]


class Promotion:
    """Sender side of one promotion, driven by incoming ACKs.

    ``send(step_id, value, prepare, in_proof)`` must multicast the SEND;
    ``on_done(value, sig)`` fires with the step-4 certificate.
    """

    def __init__(self, instance: str, party: int, view: int, value: str,
                 prepare: Optional[PrepareKey], oracle: Oracle, send: SendFn,
                 on_done: Callable[[str, ThresholdSig], None]):
        self.base = StepId(instance, party, view, 1)
        self.value = value
        self.prepare = prepare
        self.oracle = oracle
        self.send = send
        self.on_done = on_done
        self.step = 0
        self.certificates: dict[int, ThresholdSig] = {}
        self.result: Optional[ThresholdSig] = None
        self.broadcasts: list[PbBroadcast] = []

    @property
    def view(self) -> int:
        return self.base.view

    def start(self) -> None:
        self._next(self.value, None)

    def _next(self, value: str, in_proof: Optional[ThresholdSig]) -> None:
        self.step += 1
        self.value = value
        sid = self.base.at(self.step)
        self.broadcasts = [PbBroadcast(sid, value, self.oracle)]
        self.send(sid, value, self.prepare if self.step == 1 else None, in_proof)

    def on_ack(self, sender: int, step_id: StepId, share: SignShare) -> None:
        if self.result is not None:
            return
        for b in self.broadcasts:
            if b.step_id != step_id:
                continue
            sig = b.on_ack(sender, share)
            if sig is None:
                continue
            self.certificates[self.step] = sig
            if self.step == 4:
                self.result = sig
                self.value = b.value
                self.on_done(b.value, sig)
            else:
                self._next(b.value, sig)
            return
