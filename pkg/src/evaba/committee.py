"""Per-view committee selection with a threshold coin, and its analysis."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Optional

from .crypto_oracle import COMMITTEE, CoinOutput, CoinShare, Oracle


@dataclass(frozen=True)
class Committee:
    view: int
    members: tuple  # ascending party ids

    def __post_init__(self):
        if list(self.members) != sorted(set(self.members)):
            raise ValueError(f"committee members must be distinct and ascending: {self.members}")

    def __contains__(self, pid) -> bool:
        return pid in self.members

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)


def coin_label(instance: str, purpose: str, view: int) -> str:
    return f"{instance}/{purpose}/{view}"


class ShareCollector:
    """Accumulates the first valid coin share of each party for one label.

    Resolves to a :class:`CoinOutput` once ``f + 1`` shares are in.
    """

    def __init__(self, oracle: Oracle, label: str, mode: str, size: int = 1):
        self.oracle = oracle
        self.label = label
        self.mode = mode
        self.size = size
        self.shares: dict[int, CoinShare] = {}
        self.result: Optional[CoinOutput] = None

    def add(self, sender: int, share: CoinShare) -> bool:
        """Returns True when the share was counted."""
        if sender in self.shares:
            return False
        if not self.oracle.coin_share_verify(self.label, sender, share):
            return False
        self.shares[sender] = share
        if self.result is None and len(self.shares) >= self.oracle.coin_threshold:
            self.result = self.oracle.coin_toss(self.label, self.shares.values(),
                                                self.mode, self.size)
        return True


def committee_collector(oracle: Oracle, instance: str, view: int) -> ShareCollector:
    return ShareCollector(oracle, coin_label(instance, "cs", view), COMMITTEE, oracle.f + 1)


def committee_from(output: CoinOutput, view: int) -> Committee:
    return Committee(view, tuple(sorted(output.value)))


def all_faulty_probability(n: int, f: int, size: int) -> Fraction:
    """Probability that a uniform size-subset of n parties is all faulty."""
    return Fraction(comb(f, size), comb(n, size))


def committee_bound_holds(f: int, size: int) -> bool:
    """C(f, size) / C(3f+1, size) <= (1/3) ** size, exactly."""
    return all_faulty_probability(3 * f + 1, f, size) <= Fraction(1, 3) ** size
