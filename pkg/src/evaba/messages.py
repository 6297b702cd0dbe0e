"""Wire messages.

Every message exposes ``kind`` (the metrics bucket), ``view`` and a byte
size estimate of ``|values| + K`` per signature object carried.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Optional

from .crypto_oracle import CoinShare, SignShare, ThresholdSig
from .ppb import PrepareKey, StepId
from .promotion import EMPTY, Evidence

SIG_BYTES = 48


def _vlen(value) -> int:
    return len(value.encode()) if isinstance(value, str) else 0


@dataclass(frozen=True)
class Share:
    purpose: str  # "cs" (committee selection) or "elect"
    instance: str
    view: int
    share: CoinShare
    pb_step: ClassVar[None] = None

    @property
    def kind(self) -> str:
        return f"SHARE({self.purpose})"

    def size(self, k: int = SIG_BYTES) -> int:
        return k


@dataclass(frozen=True)
class Send:
    kind: ClassVar[str] = "SEND"
    step_id: StepId
    value: str
    prepare: Optional[PrepareKey] = None
    in_proof: Optional[ThresholdSig] = None

    @property
    def view(self) -> int:
        return self.step_id.view

    @property
    def pb_step(self) -> int:
        return self.step_id.step

    def size(self, k: int = SIG_BYTES) -> int:
        sigs = (self.in_proof is not None) + (self.prepare is not None and self.prepare.proof is not None)
        return _vlen(self.value) + k * sigs


@dataclass(frozen=True)
class Ack:
    kind: ClassVar[str] = "ACK"
    step_id: StepId
    share: SignShare

    @property
    def view(self) -> int:
        return self.step_id.view

    @property
    def pb_step(self) -> int:
        return self.step_id.step

    def size(self, k: int = SIG_BYTES) -> int:
        return k


@dataclass(frozen=True)
class _Completed:
    """A completed promotion: proposer's value plus its step-4 certificate."""
    view: int
    proposer: int
    value: str
    proof: ThresholdSig
    pb_step: ClassVar[None] = None

    def size(self, k: int = SIG_BYTES) -> int:
        return _vlen(self.value) + k


@dataclass(frozen=True)
class Proposal(_Completed):
    kind: ClassVar[str] = "PROPOSAL"


@dataclass(frozen=True)
class Suggestion(_Completed):
    kind: ClassVar[str] = "SUGGESTION"


@dataclass(frozen=True)
class Done(_Completed):
    kind: ClassVar[str] = "DONE"


@dataclass(frozen=True)
class SkipShare:
    kind: ClassVar[str] = "SKIP-SHARE"
    view: int
    share: SignShare
    pb_step: ClassVar[None] = None

    def size(self, k: int = SIG_BYTES) -> int:
        return k


@dataclass(frozen=True)
class Skip:
    kind: ClassVar[str] = "SKIP"
    view: int
    proof: ThresholdSig
    pb_step: ClassVar[None] = None

    def size(self, k: int = SIG_BYTES) -> int:
        return k


@dataclass(frozen=True)
class ViewChange:
    kind: ClassVar[str] = "VIEW-CHANGE"
    view: int
    prepare: Evidence = EMPTY
    lock: Evidence = EMPTY
    commit: Evidence = EMPTY
    pb_step: ClassVar[None] = None

    def size(self, k: int = SIG_BYTES) -> int:
        total = 0
        for value, sig in (self.prepare, self.lock, self.commit):
            total += _vlen(value) + (k if sig is not None else 0)
        return total


MESSAGE_KINDS = ("SHARE(cs)", "SHARE(elect)", "SEND", "ACK", "PROPOSAL", "SUGGESTION",
                 "DONE", "SKIP-SHARE", "SKIP", "VIEW-CHANGE")
