from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from evaba.committee import Committee
from evaba.crypto_oracle import COMMITTEE, Oracle, ThresholdNotMet, coin_value, encode
from evaba.election import map_to_party
from evaba.harness import ScenarioConfig, run_once
from evaba.sim_core import BEHAVIOR_KINDS, ByzantineBehavior, SchedulerPolicy, Simulation

fields = st.recursive(
    st.none() | st.integers() | st.text(max_size=5) | st.binary(max_size=5),
    lambda inner: st.lists(inner, max_size=3).map(tuple), max_leaves=8)


@given(fields, fields)
def test_encoding_injective(a, b):
    if a != b:
        assert encode(a) != encode(b)


@given(st.integers(1, 40), st.sets(st.integers(1, 40), min_size=1, max_size=10))
def test_map_to_party_is_nearest_then_smallest(leader, members):
    committee = Committee(1, tuple(sorted(members)))
    expected = min(members, key=lambda m: (abs(leader - m), m))
    assert map_to_party(1, leader, committee) == expected


@given(st.integers(1, 4), st.lists(st.integers(1, 10), min_size=0, max_size=12))
def test_threshold_counts_distinct_signers(f, signers):
    n = 3 * f + 1
    signers = [s for s in signers if s <= n]
    o = Oracle(n, f, 0)
    msg = ("m", f)
    shares = [o.holder(s).share_sign(msg) for s in signers]
    if len(set(signers)) >= n - f:
        assert o.threshold_validate(msg, o.threshold_sign(shares))
    else:
        try:
            o.threshold_sign(shares)
        except ThresholdNotMet:
            pass
        else:
            raise AssertionError("certificate below threshold")


@given(st.integers(0, 2**32), st.text(max_size=8), st.integers(1, 5))
def test_committee_coin_shape(seed, label, f):
    n = 3 * f + 1
    c = coin_value(seed, label, n, COMMITTEE, f + 1)
    assert len(c) == f + 1 and list(c) == sorted(set(c)) and 1 <= c[0] and c[-1] <= n


class _Nop:
    kind = "X"
    view = None
    pb_step = None

    def size(self, k):
        return 0


@given(st.sampled_from(SchedulerPolicy.KINDS), st.integers(0, 1000),
       st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)), min_size=1, max_size=40))
def test_every_policy_delivers_exactly_once(kind, seed, pairs):
    heal = 10 if kind == "partition-then-heal" else None
    sim = Simulation(4, SchedulerPolicy(kind, heal_step=heal).build(4, 1, seed))
    for src, dst in pairs:
        sim.inject(src, dst, _Nop())
    seen = []
    while (env := sim.step()) is not None:
        seen.append(env.seq)
    assert sorted(seen) == list(range(len(pairs)))


behaviors = st.sampled_from([k for k in BEHAVIOR_KINDS if k != "honest"])


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**32), st.sampled_from(SchedulerPolicy.KINDS), behaviors,
       st.integers(1, 4), st.integers(0, 300))
def test_random_small_runs_are_safe_and_live(seed, kind, behavior, victim, crash_at):
    policy = SchedulerPolicy(kind, heal_step=500 if kind == "partition-then-heal" else None)
    b = ByzantineBehavior(behavior, crash_at if behavior == "crash" else 0)
    cfg = ScenarioConfig(n=4, f=1, seed=seed, scheduler=policy, behaviors={victim: b})
    m = run_once(cfg, 0).metrics
    assert m.violations == []
    assert m.decided
