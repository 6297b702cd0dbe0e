"""Committee-restricted validated asynchronous Byzantine agreement in a deterministic simulator."""

from .audit import CHECKS, audit_event_log
from .harness import RunMetrics, ScenarioConfig, derive_seed, report, run_batch, run_once
from .sim_core import ByzantineBehavior, ConfigError, SchedulerPolicy

__all__ = [
    "CHECKS", "audit_event_log", "RunMetrics", "ScenarioConfig", "derive_seed", "report",
    "run_batch", "run_once", "ByzantineBehavior", "ConfigError", "SchedulerPolicy",
]
__version__ = "0.1.0"
