"""Per-user age processes, queue freshness, throughput debts and their gains."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass
class AgeState:
    """Mutable per-run state: user ages (slots) and throughput debts."""

    h: list[int]
    x: list[float]

    @classmethod
    def initial(cls, m: int) -> "AgeState":
        return cls(h=[1] * m, x=[0.0] * m)


def queue_age(latest_gen: int | None, h: int, k: int) -> int:
    """Freshness of a queue's newest packet at slot k, capped at the user age.

    An empty queue reports the user age itself, so its age-gain is zero.
    """
    if latest_gen is None:
        return h
    return min(k - latest_gen, h)


def age_gain(h: int, w: int) -> int:
    """Age reduction achievable by delivering a packet of queue-age w."""
    return h - w


def step_user_age(h: int, delivered: bool, w_source: int | None = None) -> int:
    """Advance one user's age across a slot.

    On delivery the age restarts one slot above the transmitted queue's age
    (the packet is one slot old on arrival); otherwise it grows linearly.
    """
    if delivered:
        return w_source + 1
    return h + 1


def step_debt(x: float, q: float, d: int) -> float:
    """Advance throughput debt: accumulate the target, repay per delivery."""
    return x + q - d


def rate_gain(x: float, q: float) -> float:
    """Marginal drop in squared positive debt bought by one delivery."""
    a = x + q
    if a < 0.0:
        a = 0.0
    b = x + q - 1.0
    if b < 0.0:
        b = 0.0
    return a * a - b * b


def lyapunov(h: list[int], x: list[float], beta, lam: float) -> float:
    """Diagnostic scalar: weighted ages plus weighted squared positive debts."""
    total = 0.0
    for i, hi in enumerate(h):
        total += beta[i] * hi
    if lam:
        for xi in x:
            xp = xi if xi > 0.0 else 0.0
            total += lam * xp * xp
    return total
