"""Deterministic discrete-event network simulation.

Time is the delivery step count.  Every injected envelope sits in a pending
pool until the scheduler policy picks it; the kernel forces delivery of the
oldest pending envelope once it has waited ``fairness_bound`` steps, which
makes every policy fair with a declared bound.
"""

from __future__ import annotations

import heapq
import random
import re
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Optional

DEFAULT_FAIRNESS_BOUND = 20_000


class SimulationError(Exception):
    pass


class SimulationHalted(SimulationError):
    pass


class CrashedSender(SimulationError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    seq: int
    src: int
    dst: int
    payload: object
    injected_at: int


# -- scheduler policies -------------------------------------------------------

class Scheduler:
    """Picks the next envelope to deliver among those still pending."""

    name = "abstract"

    def add(self, env: Envelope) -> None:
        raise NotImplementedError

    def pop(self, sim: "Simulation") -> Envelope:
        raise NotImplementedError


def _head(dq: deque, pending: dict) -> Optional[Envelope]:
    while dq and dq[0].seq not in pending:
        dq.popleft()
    return dq[0] if dq else None


class FifoScheduler(Scheduler):
    name = "fifo"

    def __init__(self):
        self.queue: deque = deque()

    def add(self, env):
        self.queue.append(env)

    def pop(self, sim):
        env = _head(self.queue, sim.pending)
        self.queue.popleft()
        return env


class RandomDelayScheduler(Scheduler):
    """Each envelope gets a deadline ``injected_at + U{0..max_delay}``."""

    name = "random-delay"

    def __init__(self, seed: int, max_delay: int):
        self.rng = random.Random(seed)
        self.max_delay = max_delay
        self.heap: list = []
        self.envs: dict[int, Envelope] = {}

    def add(self, env):
        deadline = env.injected_at + self.rng.randint(0, self.max_delay)
        heapq.heappush(self.heap, (deadline, env.seq))
        self.envs[env.seq] = env

    def pop(self, sim):
        while True:
            _, seq = heapq.heappop(self.heap)
            env = self.envs.pop(seq)
            if seq in sim.pending:
                return env


class RotationScheduler(Scheduler):
    """Starves one sender at a time; the victim rotates every ``period`` steps."""

    name = "worst-case-rotation"

    def __init__(self, n: int, period: int):
        self.n = n
        self.period = period
        self.by_sender: dict[int, deque] = {i: deque() for i in range(1, n + 1)}

    def add(self, env):
        self.by_sender[env.src].append(env)

    def pop(self, sim):
        victim = (sim.now // self.period) % self.n + 1
        best = None
        for src, dq in self.by_sender.items():
            if src == victim:
                continue
            head = _head(dq, sim.pending)
            if head is not None and (best is None or head.seq < best.seq):
                best = head
        if best is None:
            best = _head(self.by_sender[victim], sim.pending)
        self.by_sender[best.src].popleft()
        return best


class PartitionScheduler(Scheduler):
    """Holds traffic from or to ``parties`` until ``heal_step``, then FIFO.

    If nothing else is deliverable before the heal step, held envelopes are
    released early rather than stalling time.
    """

    name = "partition-then-heal"

    def __init__(self, heal_step: int, parties: frozenset):
        self.heal_step = heal_step
        self.parties = parties
        self.normal: deque = deque()
        self.held: deque = deque()

    def add(self, env):
        if env.src in self.parties or env.dst in self.parties:
            self.held.append(env)
        else:
            self.normal.append(env)

    def pop(self, sim):
        a = _head(self.normal, sim.pending)
        b = _head(self.held, sim.pending)
        if a is not None and (sim.now < self.heal_step or b is None or a.seq < b.seq):
            return self.normal.popleft()
        return self.held.popleft()


@dataclass(frozen=True)
class SchedulerPolicy:
    kind: str = "fifo"
    seed: Optional[int] = None
    max_delay: Optional[int] = None
    period: Optional[int] = None
    heal_step: Optional[int] = None
    parties: Optional[tuple] = None

    KINDS = ("fifo", "random-delay", "worst-case-rotation", "partition-then-heal")

    def validate(self, n: int, f: int, fairness_bound: int = DEFAULT_FAIRNESS_BOUND) -> None:
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown scheduler {self.kind!r}")
        if self.kind == "partition-then-heal":
            if self.heal_step is None or self.heal_step < 0:
                raise ConfigError("partition-then-heal needs a finite heal step; "
                                  "a partition that never heals is not a fair schedule")
            if self.heal_step >= fairness_bound:
                raise ConfigError(f"heal step {self.heal_step} exceeds the fairness bound "
                                  f"{fairness_bound}")
            for p in self.parties or ():
                if not 1 <= p <= n:
                    raise ConfigError(f"partitioned party {p} out of range")
        if self.max_delay is not None and self.max_delay < 0:
            raise ConfigError("max_delay must be non-negative")
        if self.period is not None and self.period < 1:
            raise ConfigError("rotation period must be positive")

    def build(self, n: int, f: int, run_seed: int) -> Scheduler:
        if self.kind == "fifo":
            return FifoScheduler()
        if self.kind == "random-delay":
            seed = self.seed if self.seed is not None else run_seed
            max_delay = self.max_delay if self.max_delay is not None else 10 * n * n
            return RandomDelayScheduler(seed, max_delay)
        if self.kind == "worst-case-rotation":
            return RotationScheduler(n, self.period if self.period is not None else n * n)
        if self.kind == "partition-then-heal":
            parties = self.parties if self.parties else tuple(range(n - f + 1, n + 1))
            return PartitionScheduler(self.heal_step, frozenset(parties))
        raise ConfigError(f"unknown scheduler {self.kind!r}")

    def __str__(self) -> str:
        args = []
        for key in ("seed", "max_delay", "period", "heal_step"):
            val = getattr(self, key)
            if val is not None:
                args.append(f"{key}={val}")
        if self.parties:
            args.append("parties=" + "+".join(str(p) for p in self.parties))
        return self.kind + (":" + ",".join(args) if args else "")

    @classmethod
    def parse(cls, text: str) -> "SchedulerPolicy":
        """``kind[:args]`` where args are ``key=value`` pairs or one bare number.

        A bare number is the seed for random-delay, the heal step for
        partition-then-heal and the period for worst-case-rotation.
        """
        kind, _, rest = text.strip().partition(":")
        kind = kind.strip()
        if kind not in cls.KINDS:
            raise ConfigError(f"unknown scheduler {kind!r}")
        positional = {"random-delay": "seed", "partition-then-heal": "heal_step",
                      "worst-case-rotation": "period"}
        kwargs: dict = {}
        for part in filter(None, (p.strip() for p in rest.split(","))):
            key, eq, val = part.partition("=")
            if not eq:
                if kind not in positional:
                    raise ConfigError(f"{kind} takes no positional argument")
                key, val = positional[kind], key
            key = {"heal": "heal_step", "delay": "max_delay"}.get(key.strip(), key.strip())
            if key == "parties":
                kwargs[key] = tuple(int(p) for p in val.split("+"))
            elif key in ("seed", "max_delay", "period", "heal_step"):
                kwargs[key] = int(val)
            else:
                raise ConfigError(f"unknown scheduler argument {key!r}")
        if kind == "partition-then-heal" and "heal_step" not in kwargs:
            raise ConfigError("partition-then-heal needs a heal step")
        return cls(kind=kind, **kwargs)


# -- Byzantine behaviour descriptors ------------------------------------------

BEHAVIOR_KINDS = ("honest", "crash", "equivocate-send", "unselected-broadcaster",
                  "silent-after-promote", "done-spammer")


@dataclass(frozen=True)
class ByzantineBehavior:
    kind: str = "honest"
    after_step: int = 0  # only meaningful for crash

    def __post_init__(self):
        if self.kind not in BEHAVIOR_KINDS:
            raise ConfigError(f"unknown behavior {self.kind!r}")

    @property
    def honest(self) -> bool:
        return self.kind == "honest"

    def __str__(self) -> str:
        return f"crash:{self.after_step}" if self.kind == "crash" else self.kind

    @classmethod
    def parse(cls, text: str) -> "ByzantineBehavior":
        m = re.fullmatch(r"\s*([a-z-]+)\s*(?:[:(]\s*(\d+)\s*\)?)?\s*", text)
        if not m:
            raise ConfigError(f"cannot parse behavior {text!r}")
        kind, arg = m.group(1), m.group(2)
        if arg is not None and kind != "crash":
            raise ConfigError(f"{kind} takes no argument")
        return cls(kind, int(arg) if arg is not None else 0)


# -- the kernel ---------------------------------------------------------------

Handler = Callable[[Envelope], None]


@dataclass
class Simulation:
    n: int
    scheduler: Scheduler = field(default_factory=FifoScheduler)
    fairness_bound: int = DEFAULT_FAIRNESS_BOUND
    sig_bytes: int = 48

    def __post_init__(self):
        self.now = 0
        self.next_seq = 0
        self.pending: dict[int, Envelope] = {}
        self._order: deque = deque()
        self.handlers: dict[int, Handler] = {}
        self.crash_at: dict[int, int] = {}
        self.counts: Counter = Counter()
        self.delivered = 0
        self.forced = 0
        self.max_wait = 0
        self.events: list[dict] = []
        self.halted = False

    def attach(self, pid: int, handler: Handler) -> None:
        self.handlers[pid] = handler

    def crash(self, pid: int, at_step: int = 0) -> None:
        self.crash_at[pid] = at_step

    def is_crashed(self, pid: int) -> bool:
        at = self.crash_at.get(pid)
        return at is not None and self.now >= at

    def record(self, ev: str, **fields) -> None:
        rec = {"ev": ev, "t": self.now}
        rec.update(fields)
        self.events.append(rec)

    def inject(self, src: int, dst: int, payload) -> Envelope:
        if self.halted:
            raise SimulationHalted("simulation has halted")
        if self.is_crashed(src):
            raise CrashedSender(f"party {src} has crashed")
        if not 1 <= dst <= self.n:
            raise SimulationError(f"no party {dst}")
        env = Envelope(self.next_seq, src, dst, payload, self.now)
        self.next_seq += 1
        self.pending[env.seq] = env
        self._order.append(env)
        self.scheduler.add(env)
        self.counts[getattr(payload, "kind", type(payload).__name__)] += 1
        return env

    def multicast(self, src: int, payload) -> None:
        for dst in range(1, self.n + 1):
            self.inject(src, dst, payload)

    def oldest(self) -> Optional[Envelope]:
        return _head(self._order, self.pending)

    def step(self) -> Optional[Envelope]:
        """Deliver one envelope; ``None`` means the network is quiescent."""
        if not self.pending:
            return None
        oldest = self.oldest()
        if self.now - oldest.injected_at >= self.fairness_bound:
            env = oldest
            self.forced += 1
        else:
            env = self.scheduler.pop(self)
        del self.pending[env.seq]
        wait = self.now - env.injected_at
        self.max_wait = max(self.max_wait, wait)
        payload = env.payload
        self.events.append({
            "ev": "deliver", "t": self.now, "seq": env.seq, "src": env.src, "dst": env.dst,
            "type": getattr(payload, "kind", type(payload).__name__),
            "view": getattr(payload, "view", None), "pb": getattr(payload, "pb_step", None),
            "size": payload.size(self.sig_bytes) if hasattr(payload, "size") else 0,
            "wait": wait,
        })
        self.delivered += 1
        handler = self.handlers.get(env.dst)
        if handler is not None and not self.is_crashed(env.dst):
            handler(env)
        self.now += 1
        return env

    def run(self, max_steps: Optional[int] = None,
            until: Optional[Callable[[], bool]] = None) -> bool:
        """Run until quiescent (returns True), ``until()`` holds or the step cap."""
        steps = 0
        while max_steps is None or steps < max_steps:
            if until is not None and until():
                return not self.pending
            if self.step() is None:
                return True
            steps += 1
        return not self.pending

    def halt(self) -> None:
        self.halted = True
