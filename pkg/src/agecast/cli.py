"""Command-line entry point: config files, experiment presets, CSV output."""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace

from .bounds import make_report
from .config import (
    ConfigError,
    ContractViolation,
    SystemConfig,
    mask_of,
    members,
    validate,
)
from .engine import metrics_header, metrics_row, run, sweep
from .policies import cut_feasibility_m3

CONFIG_KEYS = (
    "m", "theta", "epsilon", "q", "alpha", "beta", "lambda", "clique_cap",
    "horizon", "seed", "policy", "mu", "buffer_depth",
)


# ---------------------------------------------------------------------------
# config file and mu template syntax
# ---------------------------------------------------------------------------

def parse_template(text: str) -> tuple:
    """Parse an action template: "u3" (uncoded for user 3) or
    "x1|2.3+2|1.3" (XOR across users 1 and 2 with the given cache sets)."""
    text = text.strip()
    if text.startswith("u"):
        return ((int(text[1:]) - 1, 0),)
    if not text.startswith("x"):
        raise ConfigError(f"mu template not understood: {text!r}")
    comps = []
    for part in text[1:].split("+"):
        owner_s, _, cache_s = part.partition("|")
        owner = int(owner_s) - 1
        cached = mask_of(int(u) - 1 for u in cache_s.split(".") if u)
        comps.append((owner, cached))
    comps.sort()
    return tuple(comps)


def format_template(tpl: tuple) -> str:
    if len(tpl) == 1 and tpl[0][1] == 0:
        return f"u{tpl[0][0] + 1}"
    return "x" + "+".join(
        f"{o + 1}|{'.'.join(str(u + 1) for u in members(s))}" for o, s in tpl
    )


def parse_mu(text: str) -> tuple:
    entries = []
    for chunk in text.replace(",", " ").split():
        tpl_s, _, p_s = chunk.rpartition(":")
        if not tpl_s:
            raise ConfigError(f"mu entry missing probability: {chunk!r}")
        entries.append((parse_template(tpl_s), float(p_s)))
    return tuple(entries)


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment; arrays are
    comma-separated."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if not sep or not value:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {raw!r}")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in ("m", "horizon", "seed", "buffer_depth"):
            out[key] = int(value)
        elif key == "policy":
            out[key] = value
        elif key == "clique_cap":
            out[key] = value
        elif key == "mu":
            out[key] = parse_mu(value)
        elif key == "lambda":
            out["lam"] = float(value)
        else:
            vals = [float(v) for v in value.split(",") if v.strip()]
            out[key] = vals[0] if len(vals) == 1 else tuple(vals)
    if "m" not in out:
        raise ConfigError("config must set m")
    return out


def load_config(path: str) -> SystemConfig:
    with open(path) as fh:
        return validate(SystemConfig(**parse_config_text(fh.read())))


def _apply_overrides(cfg: SystemConfig, args) -> SystemConfig:
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "policy", None) is not None:
        over["policy"] = args.policy
    if getattr(args, "clique_cap", None) is not None:
        over["clique_cap"] = args.clique_cap
    if getattr(args, "horizon", None) is not None:
        over["horizon"] = args.horizon
    return validate(replace(cfg, **over)) if over else cfg


# ---------------------------------------------------------------------------
# experiment presets
# ---------------------------------------------------------------------------

def beta_stair(m: int) -> tuple:
    """Per-user age weights min(i, max(0, i-3)) for user index i in 1..m."""
    return tuple(float(min(i, max(0, i - 3))) for i in range(1, m + 1))


def sandwich_beta(q: float, epsilon: float, alpha: float = 1.0) -> float:
    """Age weight that pins the analytic ceiling: alpha / ((1-eps) q)."""
    return alpha / ((1.0 - epsilon) * q)


def _span(lo: float, hi: float, n: int) -> list[float]:
    if n == 1:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [round(lo + i * step, 10) for i in range(n)]


def preset_families(name: str, horizon: int, cap=None) -> list[tuple[SystemConfig, list]]:
    """Sweep families (base config, axes) for each named experiment.

    The coding-benefit presets (fig4..fig7) use uniform age weights: the
    per-user stair weights quoted alongside those figures zero out users
    1..3, which starves them and produces divergent ages, so they cannot be
    what generated the published curves (see beta_stair for the stair form).
    """
    pol_axis = ("policy", ["arm", "timesharing"])
    eps_axis = ("epsilon", _span(0.1, 0.9, 9))
    if name == "fig4":
        base = SystemConfig(m=6, theta=0.5, epsilon=0.6, beta=1.0, lam=0.0,
                            horizon=horizon, clique_cap=cap)
        return [(base, [eps_axis, pol_axis])]
    if name == "fig5":
        base = SystemConfig(m=6, epsilon=0.6, beta=1.0, lam=0.0,
                            horizon=horizon, clique_cap=cap)
        return [(base, [("theta", _span(0.1, 1.0, 10)), pol_axis])]
    if name == "fig6":
        base = SystemConfig(m=3, theta=0.2, beta=1.0, lam=0.0,
                            horizon=horizon, clique_cap=cap)
        return [(base, [eps_axis, pol_axis])]
    if name == "fig7":
        base = SystemConfig(m=6, epsilon=0.6, beta=1.0, lam=0.0, horizon=horizon)
        return [(base, [("theta", [0.2, 0.5, 0.8]), ("clique_cap", [2, 3, 4])])]
    if name == "fig8":
        base = SystemConfig(m=3, theta=0.14, epsilon=0.6, beta=3.0,
                            horizon=horizon, clique_cap=cap, buffer_depth=64)
        return [
            (replace(base, lam=10.0), [("q", _span(0.0, 0.1368, 10))]),
            (replace(base, q=0.1368), [("lam", _span(0.0, 10.0, 11))]),
        ]
    if name == "fig9":
        base = SystemConfig(m=3, epsilon=0.6, beta=beta_stair(3), lam=1.0,
                            horizon=horizon, clique_cap=cap, buffer_depth=64)
        fams = []
        for sum_rate in _span(0.1, 0.44, 10):
            v = round(sum_rate / 3.0, 10)
            fams.append((replace(base, theta=v, q=v), [pol_axis]))
        return fams
    if name == "sandwich":
        fams = []
        for v in (0.08, 0.10, 0.12):
            base = SystemConfig(
                m=3, theta=v, q=v, epsilon=0.6, lam=1.0,
                beta=sandwich_beta(v, 0.6), horizon=horizon, clique_cap=cap,
                buffer_depth=64,
            )
            fams.append((base, []))
        return fams
    raise ConfigError(f"unknown preset: {name!r}")


PRESETS = ("fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "sandwich")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _open_out(args):
    if args.out:
        return open(args.out, "w", newline="")
    return sys.stdout


def _emit(rows, m: int, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(metrics_header(m))
    for r in rows:
        w.writerow(metrics_row(r))


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    trace_fh = open(args.trace, "w") if args.trace else None
    try:
        metrics = run(cfg, trace=trace_fh)
    finally:
        if trace_fh:
            trace_fh.close()
    out = _open_out(args)
    try:
        _emit([metrics], cfg.m, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _parse_axis(text: str):
    field, sep, vals = text.partition("=")
    if not sep:
        raise ConfigError(f"--axis must be field=v1,v2,..., got {text!r}")
    field = field.strip()
    parsed = []
    for v in vals.split(","):
        v = v.strip()
        if field == "policy":
            parsed.append(v)
        elif field in ("m", "horizon", "clique_cap"):
            parsed.append(int(v))
        else:
            parsed.append(float(v))
    return field, parsed


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    axes = [_parse_axis(a) for a in args.axis or []]
    seeds = list(range(cfg.seed, cfg.seed + args.seeds))
    result = sweep(cfg, axes, seeds, jobs=args.jobs)
    out = _open_out(args)
    try:
        _emit(result.rows, cfg.m, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_bounds(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    rep = make_report(cfg)
    out = _open_out(args)
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["ub", "lb_rate", "lb_arrival", "capacity_ok", "symmetric_capacity"])
        w.writerow([
            format(rep.ub, "g"),
            format(rep.lb_rate, "g"),
            format(rep.lb_arrival, "g"),
            int(rep.capacity_ok),
            "" if rep.symmetric_capacity is None else f"{rep.symmetric_capacity:.6f}",
        ])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"ok: m={cfg.m} policy={cfg.policy} horizon={cfg.horizon}")
    if cfg.mu is not None and cfg.m == 3:
        rep = cut_feasibility_m3(cfg.mu, cfg)
        print(f"mu cuts: {'feasible' if rep.feasible else 'infeasible'}")
        for name, slack in rep.slacks.items():
            mark = "" if slack >= -1e-9 else "  VIOLATED"
            print(f"  {name}: slack={slack:+.6f}{mark}")
    return 0


def cmd_preset(args) -> int:
    horizon = args.horizon or 200_000
    fams = preset_families(args.name, horizon, cap=args.clique_cap)
    base_seed = args.seed if args.seed is not None else 1
    rows = []
    m = None
    for base, axes in fams:
        seeds = list(range(base_seed, base_seed + args.seeds))
        res = sweep(base, axes, seeds, jobs=args.jobs)
        rows.extend(res.rows)
        m = base.m
    out = _open_out(args)
    try:
        _emit(rows, m, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="agecast",
        description="Age-of-information scheduling simulator for broadcast "
                    "erasure channels with XOR coding",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        if config_required:
            sp.add_argument("--config", required=True, help="key=value config file")
        sp.add_argument("--out", help="output CSV path (default stdout)")
        sp.add_argument("--seed", type=int, default=None, help="base RNG seed")
        sp.add_argument("--policy", choices=("arm", "timesharing", "randomized", "roundrobin"))
        sp.add_argument("--clique-cap", dest="clique_cap",
                        help="max coded group size, or 'uncoded-only'")
        sp.add_argument("--horizon", type=int, help="slots per run")
        sp.add_argument("--jobs", type=int, default=1, help="parallel workers")

    sp = sub.add_parser("run", help="simulate one configuration")
    common(sp)
    sp.add_argument("--trace", help="write per-slot trace CSV to this path")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="sweep one or two config fields")
    common(sp)
    sp.add_argument("--axis", action="append",
                    help="field=v1,v2,... (repeat for a second axis)")
    sp.add_argument("--seeds", type=int, default=1, help="seeds per cell")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bounds", help="analytic bound report for a config")
    common(sp)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("validate", help="check a config file (and mu cuts)")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("preset", help="reproduce a published experiment")
    sp.add_argument("name", choices=PRESETS)
    common(sp, config_required=False)
    sp.add_argument("--seeds", type=int, default=20, help="seeds per cell")
    sp.set_defaults(func=cmd_preset)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    except ContractViolation as exc:
        print(f"internal contract violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
