"""Ideal threshold-signature and threshold-coin functionality.

One :class:`Oracle` is owned by a simulation run.  It plays the trusted
dealer: it issues shares on request, remembers what it issued, and answers
validation queries exactly.  Nobody outside the oracle holds the tag key, so
a share or signature that the oracle did not issue never validates.

Parties get a :class:`KeyHolder` bound to their own id; that is the only way
protocol code is meant to obtain shares.
"""

from __future__ import annotations

import hashlib
import hmac
import random
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional, Union


class OracleError(Exception):
    pass


class ForgeryError(OracleError):
    """A caller asked for a share under an identity that is not its own."""


class ThresholdNotMet(OracleError):
    pass


class MixedMessageError(OracleError):
    pass


class NotYetRevealed(OracleError):
    pass


Field = Union[None, int, str, bytes, tuple]


def encode(obj: Field) -> bytes:
    """Canonical, unambiguous byte encoding of a (nested) message tuple.

    Every field is written as a one-byte type tag, an 8-byte big-endian
    length and the payload; tuples are encoded as the count of their
    elements followed by each element in declared order.
    """
    return _encode(obj)


@lru_cache(maxsize=65536)
def _encode(obj: Field) -> bytes:
    if obj is None:
        return b"N" + struct.pack(">Q", 0)
    if isinstance(obj, bool):
        # True == 1 for hashing, so bools would alias ints in the caches
        raise TypeError("bool fields are not encodable")
    if isinstance(obj, int):
        raw = str(obj).encode()
        return b"I" + struct.pack(">Q", len(raw)) + raw
    if isinstance(obj, str):
        raw = obj.encode()
        return b"S" + struct.pack(">Q", len(raw)) + raw
    if isinstance(obj, bytes):
        return b"Y" + struct.pack(">Q", len(obj)) + obj
    if isinstance(obj, tuple):
        return b"T" + struct.pack(">Q", len(obj)) + b"".join(_encode(x) for x in obj)
    raise TypeError(f"cannot encode {type(obj).__name__}")


@lru_cache(maxsize=65536)
def digest(message: Field) -> bytes:
    return hashlib.sha256(_encode(message)).digest()


@dataclass(frozen=True)
class SignShare:
    signer: int
    digest: bytes
    tag: bytes


@dataclass(frozen=True)
class ThresholdSig:
    digest: bytes
    signers: frozenset
    tag: bytes


@dataclass(frozen=True)
class CoinShare:
    holder: int
    label: str
    tag: bytes


@dataclass(frozen=True)
class CoinOutput:
    label: str
    mode: str
    value: Union[int, tuple]


LEADER = "leader"
COMMITTEE = "committee"


class Oracle:
    """Dealer for an ``<n, n-f, f>`` threshold signature and an ``f+1`` coin.

    ``on_threshold`` is called with ``(message, sig)`` every time a threshold
    signature is formed, whoever formed it; the harness uses it to log
    certificates for auditing.
    """

    def __init__(self, n: int, f: int, seed: int,
                 on_threshold: Optional[Callable[[Field, ThresholdSig], None]] = None):
        self.n = n
        self.f = f
        self.sig_threshold = n - f
        self.coin_threshold = f + 1
        self.seed = seed
        self._key = hashlib.sha256(b"evaba-oracle-key" + str(seed).encode()).digest()
        self._issued: set[tuple[int, bytes]] = set()
        self._messages: dict[bytes, Field] = {}
        self._sigs: set[ThresholdSig] = set()
        self._coin_issued: dict[str, set[int]] = {}
        self._coin_cache: dict[tuple[str, str, int], CoinOutput] = {}
        self.on_threshold = on_threshold

    def _tag(self, *parts: bytes) -> bytes:
        return hmac.new(self._key, b"|".join(parts), hashlib.sha256).digest()[:16]

    # -- signatures ---------------------------------------------------------

    def share_sign(self, signer: int, message: Field, *, caller: int) -> SignShare:
        if caller != signer:
            raise ForgeryError(f"party {caller} asked to sign as {signer}")
        d = digest(message)
        self._issued.add((signer, d))
        self._messages[d] = message
        return SignShare(signer, d, self._tag(b"share", str(signer).encode(), d))

    def share_validate(self, message: Field, signer: int, share: SignShare) -> bool:
        if not isinstance(share, SignShare) or share.signer != signer:
            return False
        d = digest(message)
        if share.digest != d or (signer, d) not in self._issued:
            return False
        return hmac.compare_digest(share.tag, self._tag(b"share", str(signer).encode(), d))

    def _share_is_issued(self, share: SignShare) -> bool:
        return ((share.signer, share.digest) in self._issued and hmac.compare_digest(
            share.tag, self._tag(b"share", str(share.signer).encode(), share.digest)))

    def threshold_sign(self, shares: Iterable[SignShare]) -> ThresholdSig:
        shares = list(shares)
        for s in shares:
            if not self._share_is_issued(s):
                raise ForgeryError(f"share from {s.signer} was not issued by the dealer")
        digests = {s.digest for s in shares}
        if len(digests) > 1:
            raise MixedMessageError("shares sign different messages")
        signers = frozenset(s.signer for s in shares)
        if len(signers) < self.sig_threshold:
            raise ThresholdNotMet(f"{len(signers)} distinct signers, need {self.sig_threshold}")
        (d,) = digests
        sig = ThresholdSig(d, signers, self._tag(b"tsig", d, _signer_bytes(signers)))
        self._sigs.add(sig)
        if self.on_threshold is not None:
            self.on_threshold(self._messages[d], sig)
        return sig

    def threshold_validate(self, message: Field, sig: Optional[ThresholdSig]) -> bool:
        if not isinstance(sig, ThresholdSig) or sig not in self._sigs:
            return False
        return sig.digest == digest(message) and len(sig.signers) >= self.sig_threshold

    # -- coin ---------------------------------------------------------------

    def coin_share(self, holder: int, label: str, *, caller: int) -> CoinShare:
        if caller != holder:
            raise ForgeryError(f"party {caller} asked for the coin share of {holder}")
        self._coin_issued.setdefault(label, set()).add(holder)
        return CoinShare(holder, label, self._tag(b"coin", str(holder).encode(), label.encode()))

    def coin_share_verify(self, label: str, holder: int, share: CoinShare) -> bool:
        if not isinstance(share, CoinShare) or share.holder != holder or share.label != label:
            return False
        if holder not in self._coin_issued.get(label, ()):
            return False
        return hmac.compare_digest(
            share.tag, self._tag(b"coin", str(holder).encode(), label.encode()))

    def coin_toss(self, label: str, shares: Iterable[CoinShare], mode: str = LEADER,
                  size: int = 1) -> CoinOutput:
        holders = {s.holder for s in shares if self.coin_share_verify(label, s.holder, s)}
        if len(holders) < self.coin_threshold:
            raise ThresholdNotMet(f"{len(holders)} coin shares, need {self.coin_threshold}")
        return self._coin_value(label, mode, size)

    def reveal(self, label: str, mode: str = LEADER, size: int = 1) -> CoinOutput:
        """Introspection entry point (e.g. for an adversarial scheduler).

        Raises :class:`NotYetRevealed` until ``f+1`` distinct parties have been
        issued a share for ``label``.
        """
        if len(self._coin_issued.get(label, ())) < self.coin_threshold:
            raise NotYetRevealed(label)
        return self._coin_value(label, mode, size)

    def _coin_value(self, label: str, mode: str, size: int) -> CoinOutput:
        key = (label, mode, size)
        out = self._coin_cache.get(key)
        if out is None:
            out = CoinOutput(label, mode, coin_value(self.seed, label, self.n, mode, size))
            self._coin_cache[key] = out
        return out

    def holder(self, pid: int) -> "KeyHolder":
        return KeyHolder(self, pid)


def coin_value(seed: int, label: str, n: int, mode: str = LEADER, size: int = 1):
    """The dealer's PRG: a pure function of (seed, label, mode).

    Leader mode yields one id uniform on ``1..n``; committee mode shuffles
    ``1..n`` (Fisher-Yates) and keeps the first ``size`` ids, sorted.
    """
    h = hashlib.sha256(f"evaba-coin|{seed}|{label}|{mode}|{size}".encode()).digest()
    rng = random.Random(int.from_bytes(h[:8], "big"))
    if mode == LEADER:
        return rng.randrange(1, n + 1)
    if mode == COMMITTEE:
        if not 1 <= size <= n:
            raise ValueError(f"committee size {size} out of range for n={n}")
        ids = list(range(1, n + 1))
        rng.shuffle(ids)
        return tuple(sorted(ids[:size]))
    raise ValueError(f"unknown coin mode {mode!r}")


def _signer_bytes(signers: frozenset) -> bytes:
    return ",".join(str(s) for s in sorted(signers)).encode()


class KeyHolder:
    """A party's private signing and coin-share capability."""

    def __init__(self, oracle: Oracle, pid: int):
        self.oracle = oracle
        self.pid = pid

    def share_sign(self, message: Field) -> SignShare:
        return self.oracle.share_sign(self.pid, message, caller=self.pid)

    def coin_share(self, label: str) -> CoinShare:
        return self.oracle.coin_share(self.pid, label, caller=self.pid)
