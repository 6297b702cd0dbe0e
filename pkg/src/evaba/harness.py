"""Scenario configuration, batch execution, metrics and reporting."""

from __future__ import annotations

import hashlib
import json
import statistics
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

from .adversary import BEHAVIOR_CLASSES, alternate_value
from .audit import audit_event_log
from .crypto_oracle import Oracle, ThresholdSig
from .evaba import VALIDITY_PREDICATES, ProtocolParams, skip_tuple
from .messages import MESSAGE_KINDS, SIG_BYTES
from .sim_core import (DEFAULT_FAIRNESS_BOUND, ByzantineBehavior, ConfigError, SchedulerPolicy,
                       Simulation)

STEP_CAP = 2_000_000


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 4
    f: int = 1
    seed: int = 0
    runs: int = 1
    scheduler: SchedulerPolicy = SchedulerPolicy()
    behaviors: tuple = ()  # sorted ((pid, ByzantineBehavior), ...)
    max_views: int = 20
    validity: str = "default"
    sig_bytes: int = SIG_BYTES
    payload_bytes: int = 32
    fairness_bound: int = DEFAULT_FAIRNESS_BOUND
    instance: str = "evaba"

    def __post_init__(self):
        if isinstance(self.behaviors, dict):
            object.__setattr__(self, "behaviors", tuple(sorted(self.behaviors.items())))

    @property
    def behavior_map(self) -> dict[int, ByzantineBehavior]:
        return dict(self.behaviors)

    @property
    def byzantine(self) -> dict[int, ByzantineBehavior]:
        return {p: b for p, b in self.behaviors if not b.honest}

    def validate(self) -> "ScenarioConfig":
        if self.f < 0 or self.n != 3 * self.f + 1:
            raise ConfigError(f"n must equal 3f+1 (got n={self.n}, f={self.f})")
        for pid, _ in self.behaviors:
            if not 1 <= pid <= self.n:
                raise ConfigError(f"behavior for unknown party {pid}")
        if len(self.byzantine) > self.f:
            raise ConfigError(f"{len(self.byzantine)} corrupt parties exceed f={self.f}")
        if self.runs < 0:
            raise ConfigError("runs must be non-negative")
        if self.max_views < 1:
            raise ConfigError("max_views must be positive")
        if self.validity not in VALIDITY_PREDICATES:
            raise ConfigError(f"unknown validity predicate {self.validity!r}")
        if self.payload_bytes < 1:
            raise ConfigError("payload size must be positive")
        self.scheduler.validate(self.n, self.f, self.fairness_bound)
        return self

    def describe(self) -> dict:
        return {
            "n": self.n, "f": self.f, "seed": self.seed, "runs": self.runs,
            "scheduler": str(self.scheduler),
            "behaviors": {str(p): str(b) for p, b in self.behaviors},
            "max_views": self.max_views, "validity": self.validity,
            "sig_bytes": self.sig_bytes, "payload_bytes": self.payload_bytes,
            "fairness_bound": self.fairness_bound,
        }


def derive_seed(batch_seed: int, index: int) -> int:
    """Run seed = first 8 bytes of sha256("<batch seed>:<run index>"), big-endian."""
    return int.from_bytes(hashlib.sha256(f"{batch_seed}:{index}".encode()).digest()[:8], "big")


def make_input(seed: int, pid: int, payload_bytes: int = 32) -> str:
    hexlen = max(1, payload_bytes - len(f"p{pid}/"))
    tag = hashlib.sha256(f"input:{seed}:{pid}".encode()).hexdigest()
    while len(tag) < hexlen:
        tag += hashlib.sha256(tag.encode()).hexdigest()
    return f"p{pid}/{tag[:hexlen]}"


def value_digest(value: Optional[str]) -> Optional[str]:
    return None if value is None else hashlib.sha256(value.encode()).hexdigest()[:16]


@dataclass
class RunMetrics:
    run_id: int
    seed: int
    decided: bool
    decided_view: Optional[int]
    value_digest: Optional[str]
    messages_by_type: dict
    ppb_send: dict  # "view:step" -> count
    ppb_ack: dict
    views: int
    steps: int
    quiescent: bool
    violations: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "run_id": self.run_id, "seed": self.seed, "decided": self.decided,
            "decided_view": self.decided_view, "value_digest": self.value_digest,
            "messages_by_type": self.messages_by_type, "ppb_send": self.ppb_send,
            "ppb_ack": self.ppb_ack, "views": self.views, "steps": self.steps,
            "quiescent": self.quiescent, "violations": self.violations,
        }


@dataclass
class RunResult:
    metrics: RunMetrics
    events: list
    parties: dict


def _sig_logger(sim: Simulation, instance: str):
    def on_threshold(message, sig: ThresholdSig) -> None:
        signers = sorted(sig.signers)
        if len(message) == 3 and message == skip_tuple(instance, message[2]):
            sim.record("tsig", kind="skip", view=message[2], signers=signers)
            return
        try:
            ((inst, sender, view), step), value = message
        except (TypeError, ValueError):
            sim.record("tsig", kind="other", signers=signers)
            return
        sim.record("tsig", kind="pb", sender=sender, view=view, pb=step, value=value,
                   signers=signers)
    return on_threshold


def run_once(config: ScenarioConfig, run_id: int = 0, seed: Optional[int] = None,
             audit: bool = True) -> RunResult:
    seed = derive_seed(config.seed, run_id) if seed is None else seed
    n, f = config.n, config.f
    sim = Simulation(n, config.scheduler.build(n, f, seed), config.fairness_bound,
                     config.sig_bytes)
    oracle = Oracle(n, f, seed, on_threshold=_sig_logger(sim, config.instance))
    params = ProtocolParams(n, f, config.instance, config.max_views, config.validity)
    behaviors = config.behavior_map
    byzantine = config.byzantine

    sim.record("run", n=n, f=f, seed=seed, run_id=run_id,
               byzantine={str(p): str(b) for p, b in sorted(byzantine.items())},
               validity=config.validity, max_views=config.max_views,
               fairness_bound=config.fairness_bound, scheduler=str(config.scheduler))

    parties = {}
    for pid in range(1, n + 1):
        behavior = behaviors.get(pid, ByzantineBehavior())
        cls = BEHAVIOR_CLASSES[behavior.kind]
        value = make_input(seed, pid, config.payload_bytes)
        sim.record("input", party=pid, value=value)
        kwargs = {}
        if behavior.kind == "equivocate-send":
            kwargs["alt_value"] = alternate_value(seed, pid)
            sim.record("input", party=pid, value=kwargs["alt_value"])
        party = cls(pid, params, sim, oracle, value, **kwargs)
        parties[pid] = party
        sim.attach(pid, party.on_envelope)
        if behavior.kind == "crash":
            sim.crash(pid, behavior.after_step)

    for pid, party in parties.items():
        if not sim.is_crashed(pid):
            party.start()

    quiescent = sim.run(max_steps=STEP_CAP)
    sim.record("end", injected=sim.next_seq, delivered=sim.delivered,
               pending=len(sim.pending), quiescent=quiescent, forced=sim.forced)

    honest = [p for pid, p in parties.items() if pid not in byzantine]
    decisions = [p.decision for p in honest]
    decided = all(d is not None for d in decisions)
    views = [d.view for d in decisions if d is not None]
    first = next((d for d in decisions if d is not None), None)

    send: Counter = Counter()
    ack: Counter = Counter()
    for rec in sim.events:
        if rec["ev"] == "deliver" and rec["type"] in ("SEND", "ACK"):
            (send if rec["type"] == "SEND" else ack)[f"{rec['view']}:{rec['pb']}"] += 1

    violations = [v.as_dict() for v in audit_event_log(sim.events)] if audit else []
    metrics = RunMetrics(
        run_id=run_id, seed=seed, decided=decided,
        decided_view=max(views) if decided else None,
        value_digest=value_digest(first.value if first else None),
        messages_by_type={k: sim.counts[k] for k in MESSAGE_KINDS if sim.counts[k]},
        ppb_send=dict(sorted(send.items())), ppb_ack=dict(sorted(ack.items())),
        views=max(p.view for p in parties.values()), steps=sim.now, quiescent=quiescent,
        violations=violations,
    )
    return RunResult(metrics, sim.events, parties)


@dataclass
class BatchReport:
    config: ScenarioConfig
    runs: list

    @property
    def violations(self) -> int:
        return sum(len(m.violations) for m in self.runs)

    @property
    def ok(self) -> bool:
        return self.violations == 0 and all(m.decided for m in self.runs)

    def summary(self) -> dict:
        n, f = self.config.n, self.config.f
        views = [m.decided_view for m in self.runs if m.decided]
        totals: Counter = Counter()
        for m in self.runs:
            totals.update(m.messages_by_type)
        baseline = 8 * n * n
        observed = 8 * n * (f + 1)
        out = {
            "runs": len(self.runs),
            "decided_runs": sum(m.decided for m in self.runs),
            "violations": self.violations,
            "decided_view_mean": round(statistics.fmean(views), 6) if views else None,
            "decided_view_median": statistics.median(views) if views else None,
            "decided_view_max": max(views) if views else None,
            "messages_total": sum(totals.values()),
            "messages_by_type": {k: totals[k] for k in MESSAGE_KINDS if totals[k]},
            "promotion_per_view_baseline": baseline,
            "promotion_per_view_observed": observed,
            "reduction_factor": round(baseline / observed, 6),
        }
        return out


def run_batch(config: ScenarioConfig, audit: bool = True) -> BatchReport:
    config.validate()
    results = [run_once(config, i, audit=audit).metrics for i in range(config.runs)]
    results.sort(key=lambda m: m.run_id)
    return BatchReport(config, results)


def report(batch: BatchReport, fmt: str = "json") -> str:
    if fmt not in ("json", "table"):
        raise ValueError(f"unknown report format {fmt!r}")
    if not batch.runs:
        return ""
    if fmt == "json":
        lines = [json.dumps({"config": batch.config.describe()}, sort_keys=True)]
        lines += [json.dumps(m.as_dict(), sort_keys=True) for m in batch.runs]
        lines.append(json.dumps({"summary": batch.summary()}, sort_keys=True))
        return "\n".join(lines) + "\n"
    else:
        rows = [("run", "seed", "decided", "view", "digest", "messages", "violations")]
        for m in batch.runs:
            rows.append((str(m.run_id), f"{m.seed:016x}", "yes" if m.decided else "NO",
                         str(m.decided_view), str(m.value_digest),
                         str(sum(m.messages_by_type.values())), str(len(m.violations))))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        text = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        s = batch.summary()
        text.append("")
        for key in ("runs", "decided_runs", "violations", "decided_view_mean",
                    "decided_view_median", "decided_view_max", "messages_total"):
            text.append(f"{key:<28}{s[key]}")
        for kind, count in s["messages_by_type"].items():
            text.append(f"  {kind:<26}{count}")
        text.append(f"{'promotion msgs/view (VABA)':<28}8*n^2 = {s['promotion_per_view_baseline']}")
        text.append(f"{'promotion msgs/view (here)':<28}8*n*(f+1) = "
                    f"{s['promotion_per_view_observed']}")
        text.append(f"{'reduction factor':<28}{s['reduction_factor']}")
        return "\n".join(text) + "\n"


# -- scenario files -----------------------------------------------------------

_INT_KEYS = {"n", "f", "seed", "runs", "max_views", "sig_bytes", "payload_bytes",
             "fairness_bound"}


def parse_scenario(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment.

    ``behavior`` may repeat, each as ``<pid>=<kind>``.
    """
    out: dict = {"behaviors": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        if not eq:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = key.strip().replace("-", "_"), val.strip()
        if key == "behavior":
            pid, kind = parse_behavior_arg(val)
            out["behaviors"][pid] = kind
        elif key in _INT_KEYS:
            out[key] = int(val, 0)
        elif key == "scheduler":
            out[key] = SchedulerPolicy.parse(val)
        elif key in ("validity", "instance"):
            out[key] = val
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return out


def parse_behavior_arg(text: str) -> tuple[int, ByzantineBehavior]:
    pid, eq, kind = text.partition("=")
    if not eq:
        raise ConfigError(f"behavior must be <pid>=<kind>, got {text!r}")
    try:
        return int(pid), ByzantineBehavior.parse(kind)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_config(base: Optional[dict] = None, **overrides) -> ScenarioConfig:
    values = dict(base or {})
    behaviors = dict(values.pop("behaviors", {}) or {})
    behaviors.update(overrides.pop("behaviors", None) or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    return replace(ScenarioConfig(), behaviors=tuple(sorted(behaviors.items())), **values)
