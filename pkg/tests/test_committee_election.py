from fractions import Fraction

import pytest

from evaba.committee import (Committee, all_faulty_probability,
                             committee_collector, committee_bound_holds)
from evaba.crypto_oracle import COMMITTEE, LEADER, Oracle, coin_value
from evaba.election import elected_party, map_to_party


@pytest.mark.parametrize("leader,members,expected", [
    (4, (2, 5, 9), 5),  # distances 2, 1, 5
    (5, (2, 5, 9), 5),
    (7, (5, 9), 5),     # tie 2 vs 2 goes to the first (smaller) id
    (1, (3, 4), 3),
    (10, (1, 2, 3), 3),
])
def test_map_to_party(leader, members, expected):
    assert map_to_party(1, leader, Committee(1, members)) == expected
    assert elected_party(1, leader, Committee(1, members)) == expected


def test_committee_must_be_sorted():
    with pytest.raises(ValueError):
        Committee(1, (3, 2))


def test_collector_resolves_at_f_plus_one():
    o = Oracle(7, 2, 4)
    col = committee_collector(o, "evaba", 1)
    for i in (1, 2):
        assert col.add(i, o.holder(i).coin_share(col.label))
    assert not col.add(2, o.holder(2).coin_share(col.label))
    assert col.result is None
    assert col.add(6, o.holder(6).coin_share(col.label))
    assert col.result is not None and len(col.result.value) == 3


def test_share_for_other_view_does_not_count():
    o = Oracle(4, 1, 4)
    col = committee_collector(o, "evaba", 1)
    other = committee_collector(o, "evaba", 2)
    assert not col.add(1, o.holder(1).coin_share(other.label))
    assert col.add(1, o.holder(1).coin_share(col.label))
    assert col.result is None


def test_two_parties_agree_on_committee():
    o = Oracle(4, 1, 99)
    a = committee_collector(o, "evaba", 3)
    b = committee_collector(o, "evaba", 3)
    for i in (1, 2):
        a.add(i, o.holder(i).coin_share(a.label))
    for i in (3, 4):
        b.add(i, o.holder(i).coin_share(b.label))
    assert a.result == b.result


def _all_faulty_product(f: int, size: int) -> Fraction:
    # product form of C(f,k)/C(n,k), computed independently of math.comb
    out = Fraction(1)
    n = 3 * f + 1
    for i in range(size):
        out *= Fraction(f - i, n - i)
    return out


@pytest.mark.parametrize("f", range(1, 11))
def test_all_faulty_bound_exact(f):
    n = 3 * f + 1
    for size in range(1, f + 1):
        p = all_faulty_probability(n, f, size)
        assert p == _all_faulty_product(f, size)
        assert p <= Fraction(1, 3) ** size
        assert committee_bound_holds(f, size)
    assert all_faulty_probability(n, f, f + 1) == 0


def test_coin_modes_in_range():
    for i in range(200):
        assert 1 <= coin_value(1, f"l{i}", 10, LEADER) <= 10
        c = coin_value(1, f"l{i}", 10, COMMITTEE, 4)
        assert len(c) == 4 and all(1 <= x <= 10 for x in c)
