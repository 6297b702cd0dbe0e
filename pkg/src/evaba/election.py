"""Leader election by threshold coin, mapped onto the view's committee."""

from __future__ import annotations

from .committee import Committee, ShareCollector, coin_label
from .crypto_oracle import LEADER, Oracle


def election_collector(oracle: Oracle, instance: str, view: int) -> ShareCollector:
    return ShareCollector(oracle, coin_label(instance, "elect", view), LEADER)


def map_to_party(view: int, leader: int, committee: Committee) -> int:
    """Nearest committee member to ``leader`` by |id difference|.

    The scan is ascending with a strict ``<``, so ties go to the smaller id.
    """
    best, party = None, None
    for member in committee.members:
        dis = abs(leader - member)
        if best is None or dis < best:
            best, party = dis, member
    if party is None:
        raise ValueError(f"empty committee in view {view}")
    return party


def elected_party(view: int, leader: int, committee: Committee) -> int:
    if leader in committee:
        return leader
    return map_to_party(view, leader, committee)
