"""Age-of-information scheduling with XOR coding over broadcast erasure channels."""

from .aging import AgeState, age_gain, lyapunov, queue_age, rate_gain, step_debt, step_user_age
from .bounds import (
    BoundReport,
    capacity_outer_check,
    corollary_rate_floor,
    lower_bound_arrival,
    lower_bound_rate,
    make_report,
    symmetric_capacity,
    upper_bound,
)
from .config import (
    ConfigError,
    ContractViolation,
    SystemConfig,
    erasure_all_prob,
    erasure_success_prob,
    mask_of,
    members,
    validate,
)
from .engine import RunMetrics, SweepResult, aoi_gap, run, sweep
from .policies import (
    CutReport,
    WeightedAction,
    arm_select,
    cut_feasibility_m3,
    mu_templates_m3,
    mu_uncoded_plus_pairwise,
    randomized_select,
    roundrobin_select,
    timesharing_select,
    weighted_actions,
)
from .queues import Action, QueueKey, SideInfoGraph, VirtualQueueNetwork, coding_condition_holds

__all__ = [name for name in dir() if not name.startswith("_")]
