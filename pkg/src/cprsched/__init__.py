"""Online station assignment with bounded reallocation cost."""

__version__ = "0.1.0"

from .core import Client, DomainError, InfeasibleClient, NotPlaced, UnsupportedInput  # noqa: E402
from .classifier import ClassKey, Factor, bandwidth_lanes, class_key, laxity_class  # noqa: E402
from .cpr import CPR, ReallocationEvent  # noqa: E402
from .baselines import CR, PR  # noqa: E402
from .workloads import EventSchedule, WorkloadSpec, gen_random  # noqa: E402
from .engine import RunConfig, RunTrace, batch, run, write_trace  # noqa: E402
from .verifier import FeasibilityReport, verify_class_invariant, verify_schedule, ws_opt  # noqa: E402

__all__ = [
    "CPR", "CR", "PR", "ClassKey", "Client", "DomainError", "EventSchedule", "Factor",
    "FeasibilityReport", "InfeasibleClient", "NotPlaced", "ReallocationEvent", "RunConfig",
    "RunTrace", "UnsupportedInput", "WorkloadSpec", "bandwidth_lanes", "batch", "class_key",
    "gen_random", "laxity_class", "run", "verify_class_invariant", "verify_schedule",
    "write_trace", "ws_opt",
]
