"""Action selection policies and the 3-user rate-feasibility cut check."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .aging import AgeState, rate_gain
from .config import SystemConfig, erasure_all_prob
from .queues import Action, QueueKey, VirtualQueueNetwork


class WeightedAction(NamedTuple):
    action: Action
    weight: float


def action_weight(
    action: Action, network: VirtualQueueNetwork, age: AgeState, cfg: SystemConfig, k: int
) -> float:
    """Scheduling weight of an action: per served user, the success
    probability times (age weight * age-gain + rate weight * rate-gain)."""
    eps, beta, lam, q = cfg.epsilon, cfg.beta, cfg.lam, cfg.q
    h, x = age.h, age.x
    total = 0.0
    for owner, cached in action.components:
        gen = network.gen_of(QueueKey(owner, cached))
        gain = h[owner] + gen - k
        if gain < 0:
            gain = 0
        term = beta[owner] * gain
        if lam:
            term += lam * rate_gain(x[owner], q[owner])
        total += (1.0 - eps[owner]) * term
    return total


def weighted_actions(
    network: VirtualQueueNetwork, age: AgeState, cfg: SystemConfig, k: int
) -> list[WeightedAction]:
    return [
        WeightedAction(a, action_weight(a, network, age, cfg, k))
        for a in network.enumerate_actions(cfg.clique_cap, age.h, k)
    ]


def arm_select(
    network: VirtualQueueNetwork, age: AgeState, cfg: SystemConfig, k: int
) -> Action | None:
    """Max-weight over all coding actions; canonical-first on ties; idle only
    when no queue holds a packet."""
    h, x = age.h, age.x
    eps, beta, lam, q = cfg.epsilon, cfg.beta, cfg.lam, cfg.q
    m = network.m
    lamf = None
    if lam:
        lamf = [lam * rate_gain(x[i], q[i]) for i in range(m)]
    best_w = -1.0
    best_u = -1
    q0 = network.q0
    for i in range(m):
        lst = q0[i]
        if not lst:
            continue
        gain = h[i] + lst[-1] - k
        if gain < 0:
            gain = 0
        w = beta[i] * gain
        if lamf is not None:
            w += lamf[i]
        w *= 1.0 - eps[i]
        if w > best_w:
            best_w = w
            best_u = i
    best_group = None
    if cfg.clique_cap >= 2:
        table = network.clique_table(cfg.clique_cap)
        if table:
            sq = network.sq
            sets_of = network.sorted_cache_sets
            cached_sets = [None] * m
            for mems, cmask in table:
                w = 0.0
                for t in mems:
                    d = sq[t]
                    ht = h[t] - k
                    rest = cmask ^ (1 << t)
                    ks = cached_sets[t]
                    if ks is None:
                        ks = cached_sets[t] = sets_of(t)
                    bg = 0
                    for s in ks:
                        if s & rest == rest:
                            g2 = ht + d[s][-1]
                            if g2 > bg:
                                bg = g2
                    wt = beta[t] * bg
                    if lamf is not None:
                        wt += lamf[t]
                    w += (1.0 - eps[t]) * wt
                if w > best_w:
                    best_w = w
                    best_group = (mems, cmask)
    if best_group is not None:
        mems, cmask = best_group
        return Action(
            tuple(
                network.select_component_queue(t, cmask, h[t], k) for t in mems
            )
        )
    if best_u >= 0:
        return Action((QueueKey(best_u, 0),))
    return None


def timesharing_select(
    network: VirtualQueueNetwork, age: AgeState, cfg: SystemConfig, k: int
) -> Action | None:
    """Max-weight restricted to uncoded transmissions."""
    h, x = age.h, age.x
    eps, beta, lam, q = cfg.epsilon, cfg.beta, cfg.lam, cfg.q
    best = None
    best_w = -1.0
    q0 = network.q0
    for i in range(network.m):
        lst = q0[i]
        if not lst:
            continue
        gain = h[i] + lst[-1] - k
        if gain < 0:
            gain = 0
        w = beta[i] * gain
        if lam:
            w += lam * rate_gain(x[i], q[i])
        w *= 1.0 - eps[i]
        if w > best_w:
            best_w = w
            best = Action((QueueKey(i, 0),))
    return best


def randomized_select(mu, network: VirtualQueueNetwork, rng) -> Action | None:
    """Draw one action template; a template whose queues are not all
    populated right now wastes the slot."""
    u = rng.random()
    acc = 0.0
    chosen = None
    for tpl, p in mu:
        acc += p
        if u < acc:
            chosen = tpl
            break
    if chosen is None:  # guard against float underrun at u ~ 1
        chosen = mu[-1][0]
    comps = []
    for owner, cached in chosen:
        if cached == 0:
            if not network.q0[owner]:
                return None
        elif cached not in network.sq[owner]:
            return None
        comps.append(QueueKey(owner, cached))
    return Action(tuple(comps))


def roundrobin_select(network: VirtualQueueNetwork, k: int) -> Action | None:
    """Cycle the arrival queues by slot index, skipping empty ones."""
    m = network.m
    start = k % m
    for off in range(m):
        i = (start + off) % m
        if network.q0[i]:
            return Action((QueueKey(i, 0),))
    return None


def select_action(
    network: VirtualQueueNetwork, age: AgeState, cfg: SystemConfig, k: int, rng=None
) -> Action | None:
    if cfg.policy == "arm":
        return arm_select(network, age, cfg, k)
    if cfg.policy == "timesharing":
        return timesharing_select(network, age, cfg, k)
    if cfg.policy == "roundrobin":
        return roundrobin_select(network, k)
    return randomized_select(cfg.mu, network, rng)


# ---------------------------------------------------------------------------
# 3-user cut constraints for a stationary action distribution
# ---------------------------------------------------------------------------

CUT_TOL = 1e-9


@dataclass(frozen=True)
class CutReport:
    feasible: bool
    slacks: dict
    violated: tuple[str, ...]


def pair_template(i: int, si: int, j: int, sj: int) -> tuple:
    a, b = (i, si), (j, sj)
    return (a, b) if a <= b else (b, a)


def mu_templates_m3() -> list[tuple]:
    """The canonical 16-template family for 3 users: per-user uncoded, all
    coding-condition pairs, and the full triple."""
    full = 0b111
    out = [((i, 0),) for i in range(3)]
    for i in range(3):
        for j in range(i + 1, 3):
            kbit = full & ~(1 << i) & ~(1 << j)
            for si in (1 << j, (1 << j) | kbit):
                for sj in (1 << i, (1 << i) | kbit):
                    out.append(pair_template(i, si, j, sj))
    out.append(tuple((i, full & ~(1 << i)) for i in range(3)))
    return out


def mu_uncoded_plus_pairwise(q) -> tuple:
    """Distribution putting q_i on each uncoded template and spreading the
    remaining mass evenly over the twelve pairwise XOR templates."""
    rest = 1.0 - sum(q)
    if rest < 0:
        raise ValueError(f"sum(q) exceeds 1: {sum(q)}")
    entries = []
    pairs = [t for t in mu_templates_m3() if len(t) == 2]
    for i in range(3):
        entries.append((((i, 0),), q[i]))
    for t in pairs:
        entries.append((t, rest / len(pairs)))
    return tuple(entries)


def cut_feasibility_m3(mu, cfg: SystemConfig) -> CutReport:
    """Evaluate the five per-user cut inequalities plus normalization.

    The cut coefficients use marginal erasure probabilities (probability that
    every user in the set erases, others unconstrained).
    """
    if cfg.m != 3:
        raise ValueError(f"cut feasibility is defined for m=3, got m={cfg.m}")
    eps, q = cfg.epsilon, cfg.q
    p = dict(mu)
    full = 0b111

    def marg(mask: int) -> float:
        return erasure_all_prob(eps, mask)

    def pp(tpl) -> float:
        return p.get(tpl, 0.0)

    slacks: dict[str, float] = {}
    for i in range(3):
        others = [j for j in range(3) if j != i]
        bi = 1 << i
        succ = 1.0 - eps[i]
        u_i = pp(((i, 0),))
        oth_mask = full & ~bi

        def pair_flow(j: int) -> float:
            bj = 1 << j
            return pp(pair_template(i, bj, j, bi)) + pp(
                pair_template(i, bj, j, full & ~bj)
            )

        def deep_flow(j: int) -> float:
            bj = 1 << j
            return pp(pair_template(i, oth_mask, j, bi)) + pp(
                pair_template(i, oth_mask, j, full & ~bj)
            )

        lhs1 = u_i * (succ + sum(marg(full & ~(1 << j)) for j in others) + marg(bi))
        slacks[f"cut1[u{i + 1}]"] = lhs1 - q[i]

        for tag, (j, kk) in zip(("cut2", "cut3"), ((others[0], others[1]), (others[1], others[0]))):
            lhs = u_i * (succ + marg(full & ~(1 << j)) + marg(bi))
            lhs += pair_flow(kk) * (succ + marg(bi))
            slacks[f"{tag}[u{i + 1}]"] = lhs - q[i]

        lhs4 = u_i * (succ + marg(bi))
        lhs4 += sum(pair_flow(j) for j in others) * (succ + marg(bi))
        slacks[f"cut4[u{i + 1}]"] = lhs4 - q[i]

        lhs5 = u_i * succ
        lhs5 += sum(deep_flow(j) for j in others) * succ
        lhs5 += sum(pair_flow(j) for j in others) * succ
        slacks[f"cut5[u{i + 1}]"] = lhs5 - q[i]

    total = sum(p.values())
    slacks["normalization"] = -abs(total - 1.0)

    violated = tuple(name for name, s in slacks.items() if s < -CUT_TOL)
    return CutReport(feasible=not violated, slacks=slacks, violated=violated)
