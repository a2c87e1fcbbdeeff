"""Scenario configuration, validation, and user-set arithmetic.

Users are indexed 0..m-1 internally; sets of users are bitmasks (bit i =
user i).  All text-facing encodings (CLI, CSV) use 1-based user numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

POLICIES = ("arm", "timesharing", "randomized", "roundrobin")

UNCODED_ONLY = 1  # clique_cap value meaning "no coded actions"

MU_SUM_TOL = 1e-9


class ConfigError(ValueError):
    """A scenario parameter violates its invariant."""


class ContractViolation(RuntimeError):
    """Internal state contradicts a documented contract; the run aborts."""


# ---------------------------------------------------------------------------
# user-set helpers
# ---------------------------------------------------------------------------

def mask_of(users: Iterable[int]) -> int:
    m = 0
    for u in users:
        m |= 1 << u
    return m


def members(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def set_text(mask: int) -> str:
    """1-based dotted rendering of a user set, e.g. {0,2} -> "1.3"."""
    return ".".join(str(u + 1) for u in members(mask))


# Components of an action/template: (owner, cached_by_mask) pairs sorted by
# owner.  A single component with mask 0 is an uncoded transmission.
Component = tuple[int, int]
Template = tuple[Component, ...]


@dataclass(frozen=True)
class SystemConfig:
    """All scalar parameters of one scenario.

    theta/epsilon/q/alpha/beta accept a scalar (symmetric shorthand) or a
    length-m sequence; validate() expands and freezes them to tuples.
    """

    m: int
    theta: float | Sequence[float] = 0.5
    epsilon: float | Sequence[float] = 0.0
    q: float | Sequence[float] = 0.0
    alpha: float | Sequence[float] = 1.0
    beta: float | Sequence[float] = 1.0
    lam: float = 0.0
    clique_cap: int | str | None = None  # None -> m; "uncoded-only" -> 1
    horizon: int = 200_000
    seed: int = 1
    policy: str = "arm"
    mu: tuple[tuple[Template, float], ...] | None = None
    buffer_depth: int = 1

    def per_user(self, name: str) -> tuple[float, ...]:
        return getattr(self, name)


def _expand(value, m: int, name: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * m
    vals = tuple(float(v) for v in value)
    if len(vals) != m:
        raise ConfigError(f"{name} must have {m} entries, got {len(vals)}")
    return vals


def _normalize_cap(cap, m: int) -> int:
    if cap is None:
        return max(m, UNCODED_ONLY) if m >= 2 else UNCODED_ONLY
    if isinstance(cap, str):
        if cap.strip().lower() in ("uncoded-only", "uncoded", "none"):
            return UNCODED_ONLY
        try:
            cap = int(cap)
        except ValueError:
            raise ConfigError(f"clique_cap not understood: {cap!r}") from None
    cap = int(cap)
    if cap == UNCODED_ONLY:
        return cap
    if not 2 <= cap <= m:
        raise ConfigError(f"clique_cap out of [2..{m}]: clique_cap = {cap}")
    return cap


def _check_template(tpl: Template, m: int) -> None:
    if not tpl:
        raise ConfigError("mu template has no components")
    owners = [o for o, _ in tpl]
    if sorted(owners) != list(owners) or len(set(owners)) != len(owners):
        raise ConfigError(f"mu template components not canonical: {tpl}")
    group = mask_of(owners)
    for owner, cached in tpl:
        if not 0 <= owner < m:
            raise ConfigError(f"mu template owner out of range: {owner + 1}")
        if cached >> m or cached & (1 << owner):
            raise ConfigError(f"mu template cache set invalid for user {owner + 1}")
        rest = group & ~(1 << owner)
        if len(tpl) > 1 and cached & rest != rest:
            raise ConfigError(
                f"mu template violates the coding condition for user {owner + 1}"
            )


def validate(cfg: SystemConfig) -> SystemConfig:
    """Check every invariant; return the config with shorthand expanded.

    Raises ConfigError naming the first violated field and its value.
    """
    if int(cfg.m) < 1:
        raise ConfigError(f"m must be >= 1: m = {cfg.m}")
    m = int(cfg.m)
    theta = _expand(cfg.theta, m, "theta")
    epsilon = _expand(cfg.epsilon, m, "epsilon")
    q = _expand(cfg.q, m, "q")
    alpha = _expand(cfg.alpha, m, "alpha")
    beta = _expand(cfg.beta, m, "beta")
    for i, v in enumerate(theta):
        if not 0.0 <= v <= 1.0 or math.isnan(v):
            raise ConfigError(f"theta out of [0,1]: theta[{i + 1}] = {v}")
    for i, v in enumerate(epsilon):
        if not 0.0 <= v < 1.0 or math.isnan(v):
            raise ConfigError(f"epsilon out of [0,1): epsilon[{i + 1}] = {v}")
    for i, v in enumerate(q):
        if v < 0.0 or math.isnan(v):
            raise ConfigError(f"q must be >= 0: q[{i + 1}] = {v}")
    for i, v in enumerate(alpha):
        if v <= 0.0 or math.isnan(v):
            raise ConfigError(f"alpha must be > 0: alpha[{i + 1}] = {v}")
    for i, v in enumerate(beta):
        if v < 0.0 or math.isnan(v):
            raise ConfigError(f"beta must be >= 0: beta[{i + 1}] = {v}")
    if cfg.lam < 0.0 or math.isnan(cfg.lam):
        raise ConfigError(f"lambda must be >= 0: lambda = {cfg.lam}")
    if int(cfg.horizon) < 1:
        raise ConfigError(f"horizon must be >= 1: horizon = {cfg.horizon}")
    if int(cfg.buffer_depth) < 1:
        raise ConfigError(f"buffer_depth must be >= 1: buffer_depth = {cfg.buffer_depth}")
    cap = _normalize_cap(cfg.clique_cap, m)
    if cfg.policy not in POLICIES:
        raise ConfigError(f"policy unknown: policy = {cfg.policy!r}")
    mu = cfg.mu
    if cfg.policy == "randomized":
        if not mu:
            raise ConfigError("policy = randomized requires mu")
        mu = tuple((tuple(tpl), float(p)) for tpl, p in mu)
        total = 0.0
        for tpl, p in mu:
            _check_template(tpl, m)
            if p < 0.0:
                raise ConfigError(f"mu probabilities must be >= 0: {p}")
            total += p
        if abs(total - 1.0) > MU_SUM_TOL:
            raise ConfigError(f"mu must sum to 1 within {MU_SUM_TOL}: sum = {total}")
    return replace(
        cfg,
        m=m,
        theta=theta,
        epsilon=epsilon,
        q=q,
        alpha=alpha,
        beta=beta,
        lam=float(cfg.lam),
        clique_cap=cap,
        horizon=int(cfg.horizon),
        seed=int(cfg.seed),
        mu=mu,
        buffer_depth=int(cfg.buffer_depth),
    )


# ---------------------------------------------------------------------------
# erasure-event probabilities
# ---------------------------------------------------------------------------

def erasure_success_prob(epsilon: Sequence[float], subset: int | Iterable[int]) -> float:
    """Probability that exactly the users in `subset` erase and all others receive.

    Erasures are independent across users, so this is
    prod_{i in subset} eps_i * prod_{j not in subset} (1 - eps_j).
    """
    mask = subset if isinstance(subset, int) else mask_of(subset)
    if mask >> len(epsilon):
        raise IndexError(f"subset {set_text(mask)} outside 1..{len(epsilon)}")
    p = 1.0
    for i, e in enumerate(epsilon):
        p *= e if mask & (1 << i) else 1.0 - e
    return p


def erasure_all_prob(epsilon: Sequence[float], subset: int | Iterable[int]) -> float:
    """Probability that every user in `subset` erases (others unconstrained)."""
    mask = subset if isinstance(subset, int) else mask_of(subset)
    if mask >> len(epsilon):
        raise IndexError(f"subset {set_text(mask)} outside 1..{len(epsilon)}")
    p = 1.0
    for i in members(mask):
        p *= epsilon[i]
    return p
