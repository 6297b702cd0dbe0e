"""Prioritized provable broadcast.

Receivers sign (ACK) a SEND only when the sender sits in the view's
committee, the step has not been stopped for this receiver, and the
payload passes the external validation for its step.  The sender turns
``n - f`` ACK shares into a threshold signature over ``(step_id, value)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional

from .crypto_oracle import Oracle, SignShare, ThresholdSig


@dataclass(frozen=True, order=True)
class StepId:
    instance: str
    party: int
    view: int
    step: int

    def __post_init__(self):
        if self.step not in (1, 2, 3, 4):
            raise ValueError(f"P-PB step must be 1..4, got {self.step}")

    def promotion(self) -> tuple:
        return (self.instance, self.party, self.view)

    def at(self, step: int) -> "StepId":
        return StepId(self.instance, self.party, self.view, step)


def signed_tuple(step_id: StepId, value: str) -> tuple:
    """The message an ACK share (and the resulting certificate) binds to."""
    return ((step_id.promotion(), step_id.step), value)


def promotion_tuple(instance: str, party: int, view: int, step: int, value: str) -> tuple:
    return (((instance, party, view), step), value)


@dataclass(frozen=True)
class PrepareKey:
    """A ``<view, proof>`` pair attached to step-1 SENDs.

    ``proof`` is the step-1 certificate of the elected party's promotion in
    ``view``, or ``None`` when the value has never been through a view change.
    """
    view: int
    proof: Optional[ThresholdSig] = None

    @property
    def certified_view(self) -> int:
        # a key without a certificate proves nothing about any view
        return self.view if self.proof is not None else 0


NO_PREPARE = PrepareKey(0, None)


def check_key(value: str, prepare: Optional[PrepareKey], *, lock: int,
              instance: str, party_of: Mapping[int, int], oracle: Oracle,
              valid: Callable[[str], bool]) -> bool:
    """Accept ``value`` for step 1 given the receiver's current ``lock``."""
    if not valid(value):
        return False
    if prepare is None:
        prepare = NO_PREPARE
    # a view-1 key is the only one allowed to travel without a certificate
    if prepare.view > 1 or prepare.proof is not None:
        leader = party_of.get(prepare.view)
        if leader is None:
            return False
        msg = promotion_tuple(instance, leader, prepare.view, 1, value)
        if not oracle.threshold_validate(msg, prepare.proof):
            return False
    return prepare.certified_view >= lock


def ex_pb_val(step_id: StepId, value: str, prepare: Optional[PrepareKey],
              in_proof: Optional[ThresholdSig], *, lock: int, party_of: Mapping[int, int],
              oracle: Oracle, valid: Callable[[str], bool]) -> bool:
    if step_id.step == 1:
        return check_key(value, prepare, lock=lock, instance=step_id.instance,
                         party_of=party_of, oracle=oracle, valid=valid)
    return oracle.threshold_validate(signed_tuple(step_id.at(step_id.step - 1), value), in_proof)


class PbReceiver:
    """Per-party receiver side: one stop flag per StepId."""

    def __init__(self):
        self.stopped: set[StepId] = set()

    def accepts(self, step_id: StepId, sender: int, committee) -> bool:
        return (sender == step_id.party and sender in committee
                and step_id not in self.stopped)

    def deliver(self, step_id: StepId) -> None:
        if step_id in self.stopped:
            raise RuntimeError(f"{step_id} delivered twice")
        self.stopped.add(step_id)

    def abandon(self, step_id: StepId) -> None:
        self.stopped.add(step_id)


class PbBroadcast:
    """Sender side of one P-PB instance; a resumable continuation.

    ``on_ack`` returns the threshold signature once ``n - f`` distinct
    signers have ACKed with a valid share, and ``None`` before that (and
    after, since the sender stops waiting once the quorum is met).
    """

    def __init__(self, step_id: StepId, value: str, oracle: Oracle):
        self.step_id = step_id
        self.value = value
        self.oracle = oracle
        self.shares: dict[int, SignShare] = {}
        self.result: Optional[ThresholdSig] = None
        self._msg = signed_tuple(step_id, value)

    def on_ack(self, sender: int, share: SignShare) -> Optional[ThresholdSig]:
        if self.result is not None or sender in self.shares:
            return None
        if not self.oracle.share_validate(self._msg, sender, share):
            return None
        self.shares[sender] = share
        if len(self.shares) < self.oracle.sig_threshold:
            return None
        self.result = self.oracle.threshold_sign(self.shares.values())
        return self.result
