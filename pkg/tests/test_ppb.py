import pytest

from evaba.committee import Committee
from evaba.evaba import default_validity
from evaba.ppb import (NO_PREPARE, PbBroadcast, PbReceiver, PrepareKey, check_key, ex_pb_val,
                       signed_tuple)

from conftest import sid

VALID = default_validity(4)
V = "p1/aaaa"


def certify(oracle, step_id, value, signers=(1, 2, 3)):
    return oracle.threshold_sign(
        [oracle.holder(i).share_sign(signed_tuple(step_id, value)) for i in signers])


def kw(oracle, lock=0, party_of=None):
    return dict(lock=lock, party_of=party_of or {}, oracle=oracle, valid=VALID)


def test_view1_needs_no_prepare(oracle4):
    assert ex_pb_val(sid(step=1), V, None, None, **kw(oracle4))
    assert ex_pb_val(sid(step=1), V, PrepareKey(1), None, **kw(oracle4))


def test_invalid_value_rejected_whatever_the_prepare(oracle4):
    proof = certify(oracle4, sid(party=2, view=3), "bogus")
    assert not check_key("bogus", PrepareKey(3, proof), instance="evaba", **kw(oracle4, 0, {3: 2}))
    assert not check_key("", NO_PREPARE, instance="evaba", **kw(oracle4))


def test_prepare_below_lock_rejected(oracle4):
    proof = certify(oracle4, sid(party=2, view=2), V)
    key = PrepareKey(2, proof)
    args = dict(instance="evaba")
    assert check_key(V, key, **args, **kw(oracle4, lock=2, party_of={2: 2}))
    assert not check_key(V, key, **args, **kw(oracle4, lock=3, party_of={2: 2}))


def test_uncertified_prepare_does_not_pass_a_lock(oracle4):
    assert not check_key(V, PrepareKey(1), instance="evaba", **kw(oracle4, lock=1))


def test_prepare_checked_against_elected_party(oracle4):
    proof = certify(oracle4, sid(party=2, view=2), V)
    args = dict(instance="evaba")
    assert not check_key(V, PrepareKey(2, proof), **args, **kw(oracle4, 0, {2: 3}))
    assert not check_key(V, PrepareKey(2, proof), **args, **kw(oracle4, 0, {}))
    assert not check_key("p1/other", PrepareKey(2, proof), **args, **kw(oracle4, 0, {2: 2}))


def test_step_chaining(oracle4):
    s1 = sid(step=1)
    t1 = certify(oracle4, s1, V)
    assert ex_pb_val(s1.at(2), V, None, t1, **kw(oracle4))
    assert not ex_pb_val(s1.at(2), "p1/bbbb", None, t1, **kw(oracle4))
    assert not ex_pb_val(s1.at(3), V, None, t1, **kw(oracle4))  # proof for the wrong step
    assert not ex_pb_val(s1.at(2), V, None, None, **kw(oracle4))


def test_step_id_range():
    with pytest.raises(ValueError):
        sid(step=5)


def test_receiver_accepts_only_committee_senders():
    pb = PbReceiver()
    c = Committee(1, (1, 3))
    assert pb.accepts(sid(party=1), 1, c)
    assert not pb.accepts(sid(party=2), 2, c)
    assert not pb.accepts(sid(party=1), 3, c)  # sender must own the StepId


def test_receiver_delivers_at_most_once():
    pb = PbReceiver()
    c = Committee(1, (1, 3))
    pb.deliver(sid())
    assert not pb.accepts(sid(), 1, c)
    with pytest.raises(RuntimeError):
        pb.deliver(sid())


def test_abandon_blocks_later_delivery_and_is_idempotent():
    pb = PbReceiver()
    c = Committee(1, (1, 3))
    pb.abandon(sid(step=3))
    pb.abandon(sid(step=3))
    assert not pb.accepts(sid(step=3), 1, c)
    assert pb.accepts(sid(step=2), 1, c)


def test_broadcast_completes_at_quorum(oracle4):
    s = sid()
    b = PbBroadcast(s, V, oracle4)
    msg = signed_tuple(s, V)
    assert b.on_ack(1, oracle4.holder(1).share_sign(msg)) is None
    assert b.on_ack(1, oracle4.holder(1).share_sign(msg)) is None
    assert b.on_ack(2, oracle4.holder(3).share_sign(msg)) is None  # share of someone else
    assert b.on_ack(4, oracle4.holder(4).share_sign(signed_tuple(s, "p1/x"))) is None
    assert b.on_ack(2, oracle4.holder(2).share_sign(msg)) is None
    sig = b.on_ack(4, oracle4.holder(4).share_sign(msg))
    assert oracle4.threshold_validate(msg, sig)
    assert b.on_ack(3, oracle4.holder(3).share_sign(msg)) is None
