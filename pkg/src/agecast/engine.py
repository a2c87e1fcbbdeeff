"""Slot-by-slot simulation, RNG stream management, metrics, and sweeps."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .aging import AgeState
from .config import ConfigError, SystemConfig, set_text, validate
from .policies import (
    arm_select,
    randomized_select,
    roundrobin_select,
    timesharing_select,
)
from .queues import Outcome, VirtualQueueNetwork


@dataclass(frozen=True)
class RunMetrics:
    policy: str
    m: int
    theta: tuple
    epsilon: tuple
    q: tuple
    alpha: tuple
    beta: tuple
    lam: float
    clique_cap: int
    horizon: int
    seed: int
    eaoi: float
    rates: tuple
    mean_pos_debt: tuple
    deliveries: tuple
    idle_slots: int
    debt_windows: tuple | None = None

    def config_signature(self) -> tuple:
        return (
            self.m, self.theta, self.epsilon, self.q, self.alpha, self.beta,
            self.lam, self.clique_cap, self.horizon, self.seed,
        )


class SlotRecord(NamedTuple):
    """Everything an observer needs to replay one slot transition."""

    k: int
    arrivals: int
    h_pre: tuple
    x_pre: tuple
    w_pre: dict
    action: object
    received: int
    d_mask: int
    t: tuple
    delivered_gen: dict
    moves: tuple
    h_post: tuple
    x_post: tuple
    queues_post: tuple


class _Cursor:
    """Sequential reader over a pregenerated uniform stream."""

    __slots__ = ("vals", "i")

    def __init__(self, vals):
        self.vals = vals
        self.i = 0

    def random(self) -> float:
        v = self.vals[self.i]
        self.i += 1
        return v


def _packed_masks(uniforms: np.ndarray, probs) -> list[int]:
    hits = uniforms < np.asarray(probs)
    weights = np.uint64(1) << np.arange(len(probs), dtype=np.uint64)
    return (hits.astype(np.uint64) @ weights).tolist()


_IDLE_OUTCOME = Outcome(0, (), {}, ())


def run(
    cfg: SystemConfig,
    observer: Callable[[SlotRecord], None] | None = None,
    trace=None,
    debt_windows: int = 0,
) -> RunMetrics:
    """Simulate one scenario for its full horizon.

    Bit-reproducible for a fixed config+seed: arrivals, receptions and the
    randomized policy draw from three independent substreams, so the channel
    sample path is identical across policies at the same seed.
    """
    cfg = validate(cfg)
    m, K = cfg.m, cfg.horizon
    ss = np.random.SeedSequence(cfg.seed)
    s_arr, s_rec, s_pol = ss.spawn(3)
    arrivals = _packed_masks(
        np.random.Generator(np.random.PCG64(s_arr)).random((K, m)), cfg.theta
    )
    receptions = _packed_masks(
        np.random.Generator(np.random.PCG64(s_rec)).random((K, m)),
        [1.0 - e for e in cfg.epsilon],
    )
    policy = cfg.policy
    pol_rng = None
    if policy == "randomized":
        pol_rng = _Cursor(
            np.random.Generator(np.random.PCG64(s_pol)).random(K).tolist()
        )

    net = VirtualQueueNetwork(m, cfg.buffer_depth)
    h = [1] * m
    x = [0.0] * m
    age = AgeState(h, x)
    alpha, q, mu = cfg.alpha, cfg.q, cfg.mu

    eaoi_sum = 0.0
    pos_debt = [0.0] * m
    deliveries = [0] * m
    idle = 0
    users = range(m)

    wins = None
    if debt_windows:
        wins = [[0.0] * m for _ in range(debt_windows)]

    if trace is not None:
        trace.write("slot,action_encoding,received_set,d_vector,h_vector\n")

    if policy == "arm":
        select = lambda k: arm_select(net, age, cfg, k)
    elif policy == "timesharing":
        select = lambda k: timesharing_select(net, age, cfg, k)
    elif policy == "roundrobin":
        select = lambda k: roundrobin_select(net, k)
    else:
        select = lambda k: randomized_select(mu, net, pol_rng)

    q0 = net.q0
    depth = cfg.buffer_depth
    for k in range(1, K + 1):
        amask = arrivals[k - 1]
        if amask:
            mm = amask
            i = 0
            while mm:
                if mm & 1:
                    lst = q0[i]
                    lst.append(k)
                    if len(lst) > depth:
                        del lst[0]
                mm >>= 1
                i += 1

        if observer is not None:
            h_pre = tuple(h)
            x_pre = tuple(x)
            w_pre = {
                key: min(k - gen, h[key.owner])
                for key, gen in net.nonempty_keys()
            }

        action = select(k)
        rmask = receptions[k - 1]
        if action is None:
            idle += 1
            out = _IDLE_OUTCOME
        else:
            out = net.apply_outcome(action, rmask, k)

        d_mask = out.d_mask
        dgen = out.delivered_gen
        ea = 0.0
        for i in users:
            if d_mask >> i & 1:
                w = k - dgen[i]
                hi = h[i]
                if w > hi:
                    w = hi
                h[i] = w + 1
                deliveries[i] += 1
            else:
                h[i] += 1
            # debt held in closed form so no float drift accumulates
            x[i] = k * q[i] - deliveries[i]
            xi = x[i]
            if xi > 0.0:
                pos_debt[i] += xi
                if wins is not None:
                    wins[(k - 1) * debt_windows // K][i] += xi
            ea += alpha[i] * h[i]
        eaoi_sum += ea

        if observer is not None:
            observer(
                SlotRecord(
                    k, amask, h_pre, x_pre, w_pre, action, rmask, d_mask,
                    out.t, dgen, out.moves, tuple(h), tuple(x),
                    tuple(net.packets()),
                )
            )
        if trace is not None:
            enc = action.encode() if action is not None else "idle"
            trace.write(
                f"{k},{enc},{set_text(rmask)},"
                f"{';'.join(str(d_mask >> i & 1) for i in users)},"
                f"{';'.join(str(v) for v in h)}\n"
            )

    dw = None
    if wins is not None:
        bounds = [
            -(-w * K // debt_windows) for w in range(debt_windows + 1)
        ]  # ceil(w*K/N): slot k-1 falls in window (k-1)*N//K
        counts = [bounds[w + 1] - bounds[w] for w in range(debt_windows)]
        dw = tuple(
            tuple(wins[w][i] / counts[w] for i in users)
            for w in range(debt_windows)
        )
    return RunMetrics(
        policy=policy,
        m=m,
        theta=cfg.theta,
        epsilon=cfg.epsilon,
        q=cfg.q,
        alpha=cfg.alpha,
        beta=cfg.beta,
        lam=cfg.lam,
        clique_cap=cfg.clique_cap,
        horizon=K,
        seed=cfg.seed,
        eaoi=eaoi_sum / (m * K),
        rates=tuple(d / K for d in deliveries),
        mean_pos_debt=tuple(p / K for p in pos_debt),
        deliveries=tuple(deliveries),
        idle_slots=idle,
        debt_windows=dw,
    )


def aoi_gap(metrics_ts: RunMetrics, metrics_arm: RunMetrics) -> float:
    """Timesharing EAoI minus coding-policy EAoI on matching scenarios."""
    if metrics_ts.config_signature() != metrics_arm.config_signature():
        raise ValueError("aoi_gap requires identical configs up to policy")
    return metrics_ts.eaoi - metrics_arm.eaoi


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------

_SWEEPABLE = (
    "theta", "epsilon", "q", "alpha", "beta", "lam", "clique_cap",
    "policy", "m", "horizon",
)


@dataclass(frozen=True)
class CellSummary:
    values: tuple          # (field, value) pairs for this cell
    mean_eaoi: float
    std_eaoi: float
    runs: tuple            # RunMetrics per seed, seed order


@dataclass(frozen=True)
class SweepResult:
    rows: tuple            # all RunMetrics, cell-major then seed
    cells: tuple           # CellSummary per cell


def _run_job(args):
    cfg, debt_windows = args
    return run(cfg, debt_windows=debt_windows)


def sweep(
    base: SystemConfig,
    axes: Sequence[tuple[str, Sequence]],
    seeds: Sequence[int],
    jobs: int = 1,
    debt_windows: int = 0,
) -> SweepResult:
    """Cartesian grid of one or two config fields crossed with seeds.

    Every (cell, seed) pair is an independent run; output order is the grid
    order regardless of execution order, so results are reproducible under
    any parallelism.
    """
    axes = list(axes)
    if len(axes) > 2:
        raise ConfigError(f"at most two sweep axes supported, got {len(axes)}")
    for field, _ in axes:
        if field not in _SWEEPABLE:
            raise ConfigError(f"unknown sweep field: {field}")
    grids = [vals for _, vals in axes]
    names = [f for f, _ in axes]
    cells = list(product(*grids)) if axes else [()]

    jobs_list = []
    for cell in cells:
        over = dict(zip(names, cell))
        for s in seeds:
            cfg = validate(replace(base, seed=s, **over))
            jobs_list.append((cfg, debt_windows))

    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_job, jobs_list, chunksize=1))
    else:
        rows = [_run_job(j) for j in jobs_list]

    summaries = []
    n = len(seeds)
    for ci, cell in enumerate(cells):
        runs = tuple(rows[ci * n : (ci + 1) * n])
        vals = [r.eaoi for r in runs]
        mean = sum(vals) / n
        std = math.sqrt(sum((v - mean) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
        summaries.append(
            CellSummary(
                values=tuple(zip(names, cell)),
                mean_eaoi=mean,
                std_eaoi=std,
                runs=runs,
            )
        )
    return SweepResult(rows=tuple(rows), cells=tuple(summaries))


# ---------------------------------------------------------------------------
# CSV rendering (schema shared by the CLI and tests)
# ---------------------------------------------------------------------------

def _fmt_vec(vals: tuple) -> str:
    if len(set(vals)) == 1:
        return format(vals[0], "g")
    return ";".join(format(v, "g") for v in vals)


def metrics_header(m: int) -> list[str]:
    return (
        ["policy", "M", "epsilon", "theta", "q", "lambda", "clique_cap",
         "seed", "K", "eaoi"]
        + [f"rate_{i + 1}" for i in range(m)]
        + ["mean_pos_debt_max", "idle_slots"]
    )


def metrics_row(r: RunMetrics) -> list:
    return (
        [r.policy, r.m, _fmt_vec(r.epsilon), _fmt_vec(r.theta), _fmt_vec(r.q),
         format(r.lam, "g"), r.clique_cap, r.seed, r.horizon,
         f"{r.eaoi:.6f}"]
        + [f"{v:.6f}" for v in r.rates]
        + [f"{max(r.mean_pos_debt):.6f}", r.idle_slots]
    )
