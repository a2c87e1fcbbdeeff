"""Closed-form performance bounds and the broadcast capacity outer bound."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations
from typing import Sequence

from .config import SystemConfig, erasure_all_prob

CAPACITY_TOL = 1e-9


def upper_bound(cfg: SystemConfig) -> float:
    """Guaranteed weighted-age ceiling for the drift-minimizing scheduler run
    with age weights alpha_i / ((1-eps_i) q_i).

    Undefined (infinite) when any target rate or arrival rate is zero.
    """
    m = cfg.m
    total = 0.0
    for a, th, qi, e in zip(cfg.alpha, cfg.theta, cfg.q, cfg.epsilon):
        if qi <= 0.0 or th <= 0.0:
            return math.inf
        total += a / th + a / (qi * (1.0 - e))
    return total / m + cfg.lam


def lower_bound_rate(cfg: SystemConfig, rates: Sequence[float]) -> float:
    """Age floor implied by the achieved communication rates."""
    m = cfg.m
    s = 0.0
    for r, a in zip(rates, cfg.alpha):
        if r <= 0.0:
            return math.inf
        s += r / a
    return m / (2.0 * s) + sum(cfg.alpha) / (2.0 * m)


def lower_bound_arrival(cfg: SystemConfig) -> float:
    """Age floor when every packet is delivered the instant it arrives."""
    m = cfg.m
    s = 0.0
    for a, th in zip(cfg.alpha, cfg.theta):
        if th <= 0.0:
            return math.inf
        s += a / th
    return s / m


def symmetric_capacity(m: int, eps: float) -> float:
    """Per-user rate on the outer-bound boundary of the symmetric channel:
    1 / sum_{j=1..m} 1/(1-eps^j)."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"epsilon out of [0,1): {eps}")
    s = sum(1.0 / (1.0 - eps ** j) for j in range(1, m + 1))
    return 1.0 / s


def corollary_rate_floor(m: int, eps: float, alpha: Sequence[float]) -> float:
    """Rate-based age floor evaluated at the symmetric capacity point."""
    cap = symmetric_capacity(m, eps)
    s = sum(1.0 / a for a in alpha)
    return m / (2.0 * cap * s) + sum(alpha) / (2.0 * m)


def capacity_outer_check(
    epsilon: Sequence[float], rates: Sequence[float]
) -> tuple[bool, float, tuple[int, ...]]:
    """Check the permutation cut-set outer bound for a rate tuple.

    For each user ordering, the cumulative all-erase probabilities discount
    each user's rate; the normalized load must not exceed one.  Returns
    (ok, tightest slack, ordering attaining it).  Factorial in m; m <= 8.
    """
    m = len(epsilon)
    if m > 8:
        raise ValueError(f"permutation enumeration limited to m <= 8, got {m}")
    worst = math.inf
    worst_perm: tuple[int, ...] = tuple(range(m))
    for perm in permutations(range(m)):
        mask = 0
        load = 0.0
        for u in perm:
            mask |= 1 << u
            ehat = erasure_all_prob(epsilon, mask)
            load += rates[u] / (1.0 - ehat)
        slack = 1.0 - load
        if slack < worst:
            worst = slack
            worst_perm = perm
    return worst >= -CAPACITY_TOL, worst, worst_perm


@dataclass(frozen=True)
class BoundReport:
    ub: float
    lb_rate: float
    lb_arrival: float
    capacity_ok: bool
    symmetric_capacity: float | None


def make_report(cfg: SystemConfig, rates: Sequence[float] | None = None) -> BoundReport:
    """Bounds row for one scenario; rates default to the target rates."""
    r = tuple(rates) if rates is not None else cfg.q
    sym = None
    if len(set(cfg.epsilon)) == 1:
        sym = symmetric_capacity(cfg.m, cfg.epsilon[0])
    ok, _, _ = capacity_outer_check(cfg.epsilon, r)
    return BoundReport(
        ub=upper_bound(cfg),
        lb_rate=lower_bound_rate(cfg, r),
        lb_arrival=lower_bound_arrival(cfg),
        capacity_ok=ok,
        symmetric_capacity=sym,
    )
