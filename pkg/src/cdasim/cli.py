"""Configuration parsing, experiment orchestration and output emission.

Configs are INI files with four sections (fundamental, agents, market,
output); every key has a documented default and the resolved value of
every key, defaulted or not, is echoed into the run manifest so no default
is ever silent.  The manifest's config sections reparse to an identical
simulation config.

Exit codes: 0 success, 1 configuration error, 2 runtime invariant breach.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .agents import HblParams, ZiParams
from .estimator import EstimatorParams
from .fundamental import DmrParams, MegashockParams, OuParams
from .kernel import OutputOptions, SimConfig, SimResult, run


class ConfigError(Exception):
    pass


_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}

DEFAULTS: dict[str, dict[str, str]] = {
    "fundamental": {"variant": "dmr"},
    "market": {"horizon": "1000", "tick_size": "0.1", "seed": "1"},
    "agents": {
        "zi_count": "25",
        "hbl_count": "5",
        "arrival_rate": "0.01",
        "r_min": "0.0",
        "r_max": "1.0",
        "eta": "1.0",
        "sigma_n_sq": "10.0",
        "q_max": "10",
        "sigma_pv_sq": "25.0",
        "memory_length": "4",
        "grace_period": "100",
        "success_mode": "binary",
        "grid_mode": "observed",
    },
    "output": {
        "dump_fundamental": "false",
        "trace_estimator": "false",
        "trace_decisions": "false",
    },
}

VARIANT_KEYS: dict[str, dict[str, str]] = {
    "dmr": {"r_bar": "100.0", "kappa": "0.05", "sigma_s_sq": "1.0"},
    "ou": {"mu": "100.0", "gamma": "0.05", "sigma_sq": "1.0", "q0": "100.0"},
    "megashock": {
        "mu": "100.0", "gamma": "0.05", "sigma_sq": "1.0", "q0": "100.0",
        "shock_arrival_rate": "0.001", "shock_mean": "40.0", "shock_var": "50.0",
    },
    "file": {"path": "", "est_r_bar": "100.0", "est_kappa": "0.05",
             "est_sigma_s_sq": "1.0"},
}

_MANIFEST_ONLY_SECTIONS = ("meta", "private_values")


def parse_config(text: str) -> dict[str, dict[str, str]]:
    """Parse INI text into a fully-defaulted resolved mapping.

    Unknown sections or keys are errors naming the offender; sections only
    found in manifests (meta, private values) are skipped so a manifest
    reparses cleanly.
    """
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config is not valid INI: {exc}") from exc

    given = {s: dict(parser.items(s)) for s in parser.sections()
             if s not in _MANIFEST_ONLY_SECTIONS}
    unknown_sections = set(given) - set(DEFAULTS)
    if unknown_sections:
        raise ConfigError(f"unknown config section: {sorted(unknown_sections)[0]}")

    variant = given.get("fundamental", {}).get("variant", DEFAULTS["fundamental"]["variant"])
    if variant not in VARIANT_KEYS:
        raise ConfigError(f"fundamental.variant: must be one of {sorted(VARIANT_KEYS)}")

    resolved: dict[str, dict[str, str]] = {}
    for section, defaults in DEFAULTS.items():
        allowed = dict(defaults)
        if section == "fundamental":
            allowed.update(VARIANT_KEYS[variant])
        supplied = given.get(section, {})
        unknown = set(supplied) - set(allowed)
        if unknown:
            raise ConfigError(f"unknown key {section}.{sorted(unknown)[0]}")
        merged = dict(allowed)
        merged.update(supplied)
        resolved[section] = merged
    return resolved


def _as_float(resolved, section, key, constraint=None, describe=""):
    raw = resolved[section][key]
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected a number, got {raw!r}") from None
    if constraint is not None and not constraint(value):
        raise ConfigError(f"{section}.{key}: {describe}")
    return value


def _as_int(resolved, section, key, constraint=None, describe=""):
    raw = resolved[section][key]
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected an integer, got {raw!r}") from None
    if constraint is not None and not constraint(value):
        raise ConfigError(f"{section}.{key}: {describe}")
    return value


def _as_bool(resolved, section, key):
    raw = resolved[section][key].lower()
    if raw not in _BOOL:
        raise ConfigError(f"{section}.{key}: expected true/false, got {raw!r}")
    return _BOOL[raw]


def build_config(resolved: dict[str, dict[str, str]]) -> SimConfig:
    """Validate the resolved mapping and construct the simulation config."""
    variant = resolved["fundamental"]["variant"]
    horizon = _as_int(resolved, "market", "horizon", lambda v: v >= 1, "horizon >= 1")
    tick_size = _as_float(resolved, "market", "tick_size", lambda v: v > 0, "tick_size > 0")
    seed = _as_int(resolved, "market", "seed")

    fundamental_params = None
    fundamental_file = None
    file_estimator = None
    try:
        if variant == "dmr":
            fundamental_params = DmrParams(
                r_bar=_as_float(resolved, "fundamental", "r_bar",
                                lambda v: v >= 0, "r_bar >= 0"),
                kappa=_as_float(resolved, "fundamental", "kappa",
                                lambda v: 0 <= v <= 1, "kappa in [0,1]"),
                sigma_s_sq=_as_float(resolved, "fundamental", "sigma_s_sq",
                                     lambda v: v >= 0, "sigma_s_sq >= 0"),
            )
        elif variant in ("ou", "megashock"):
            ou = OuParams(
                mu=_as_float(resolved, "fundamental", "mu"),
                gamma=_as_float(resolved, "fundamental", "gamma",
                                lambda v: v > 0, "gamma > 0"),
                sigma_sq=_as_float(resolved, "fundamental", "sigma_sq",
                                   lambda v: v >= 0, "sigma_sq >= 0"),
                q0=_as_float(resolved, "fundamental", "q0"),
            )
            if variant == "megashock":
                fundamental_params = MegashockParams(
                    ou=ou,
                    arrival_rate=_as_float(resolved, "fundamental", "shock_arrival_rate",
                                           lambda v: v > 0, "shock_arrival_rate > 0"),
                    shock_mean=_as_float(resolved, "fundamental", "shock_mean",
                                         lambda v: v > 0, "shock_mean > 0"),
                    shock_var=_as_float(resolved, "fundamental", "shock_var",
                                        lambda v: v > 0, "shock_var > 0"),
                )
            else:
                fundamental_params = ou
        else:
            fundamental_file = resolved["fundamental"]["path"]
            if not fundamental_file:
                raise ConfigError("fundamental.path: required for the file variant")
            file_estimator = EstimatorParams(
                r_bar=_as_float(resolved, "fundamental", "est_r_bar"),
                kappa=_as_float(resolved, "fundamental", "est_kappa",
                                lambda v: 0 <= v <= 1, "est_kappa in [0,1]"),
                sigma_s_sq=_as_float(resolved, "fundamental", "est_sigma_s_sq",
                                     lambda v: v >= 0, "est_sigma_s_sq >= 0"),
                sigma_n_sq=0.0,  # per-agent noise comes from the agents section
                horizon_T=horizon,
            )

        zi = ZiParams(
            r_min=_as_float(resolved, "agents", "r_min", lambda v: v >= 0, "r_min >= 0"),
            r_max=_as_float(resolved, "agents", "r_max"),
            eta=_as_float(resolved, "agents", "eta", lambda v: 0 <= v <= 1, "eta in [0,1]"),
            sigma_n_sq=_as_float(resolved, "agents", "sigma_n_sq",
                                 lambda v: v >= 0, "sigma_n_sq >= 0"),
            q_max=_as_int(resolved, "agents", "q_max", lambda v: v >= 1, "q_max >= 1"),
            sigma_pv_sq=_as_float(resolved, "agents", "sigma_pv_sq",
                                  lambda v: v >= 0, "sigma_pv_sq >= 0"),
        )
        n_hbl = _as_int(resolved, "agents", "hbl_count", lambda v: v >= 0, "hbl_count >= 0")
        hbl = None
        if n_hbl > 0:
            hbl = HblParams(
                zi=zi,
                memory_length=_as_int(resolved, "agents", "memory_length",
                                      lambda v: v >= 1, "memory_length >= 1"),
                grace_period=_as_int(resolved, "agents", "grace_period",
                                     lambda v: v >= 1, "grace_period >= 1"),
                success_mode=resolved["agents"]["success_mode"],
                grid_mode=resolved["agents"]["grid_mode"],
            )
        return SimConfig(
            horizon_T=horizon,
            fundamental_variant=variant,
            fundamental_params=fundamental_params,
            n_zi=_as_int(resolved, "agents", "zi_count", lambda v: v >= 0, "zi_count >= 0"),
            n_hbl=n_hbl,
            zi_params=zi,
            hbl_params=hbl,
            arrival_rate=_as_float(resolved, "agents", "arrival_rate",
                                   lambda v: v > 0, "arrival_rate > 0"),
            master_seed=seed,
            tick_size=tick_size,
            fundamental_file=fundamental_file,
            file_estimator=file_estimator,
            output=OutputOptions(
                trace_estimator=_as_bool(resolved, "output", "trace_estimator"),
                trace_decisions=_as_bool(resolved, "output", "trace_decisions"),
                dump_fundamental=_as_bool(resolved, "output", "dump_fundamental"),
            ),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def emit_outputs(result: SimResult, resolved: dict[str, dict[str, str]], outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    grid = result.grid

    def path(name: str) -> str:
        return os.path.join(outdir, name)

    with open(path("events.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("time,kind,order_id,agent_id,side,price,qty,counterparty\n")
        for e in result.events:
            cp = "" if e.counterparty is None else str(e.counterparty)
            fh.write(f"{e.time},{e.kind.value},{e.order_id},{e.agent_id},"
                     f"{e.side.value},{grid.format(e.price)},{e.quantity},{cp}\n")

    with open(path("trades.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("time,price,qty,buy_order,sell_order\n")
        for t in result.trades:
            fh.write(f"{t.time},{grid.format(t.price)},{t.quantity},"
                     f"{t.buy_order_id},{t.sell_order_id}\n")

    with open(path("fundamental.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,value\n")
        for t, ticks in result.fundamental_trace:
            fh.write(f"{t},{grid.format(ticks)}\n")

    with open(path("agents.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("agent_id,strategy,cash,q_held,payoff\n")
        for a in result.agents:
            fh.write(f"{a.agent_id},{a.strategy},{a.cash!r},{a.q_held},{a.payoff!r}\n")

    if result.estimator_trace:
        with open(path("estimator_trace.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("time,agent_id,delta,observation,r_tilde,sigma_tilde_sq,r_hat\n")
            for row in result.estimator_trace:
                fh.write(",".join(str(x) for x in row) + "\n")

    if result.decision_trace:
        with open(path("decisions.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("time,agent_id,strategy,action,side,limit_price\n")
            for row in result.decision_trace:
                fh.write(",".join(str(x) for x in row) + "\n")

    if _BOOL[resolved["output"]["dump_fundamental"].lower()]:
        with open(path("fundamental_dump.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("timestamp,value\n")
            for t, ticks in result.fundamental_trace:
                fh.write(f"{t},{grid.format(ticks)}\n")

    with open(path("manifest.ini"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("[meta]\n")
        fh.write(f"version = {__version__}\n")
        fh.write(f"master_seed = {resolved['market']['seed']}\n")
        fh.write(f"invariants_ok = {str(result.invariants_ok).lower()}\n")
        for key, value in sorted(result.invariant_summary.items()):
            fh.write(f"{key} = {value}\n")
        fh.write("\n")
        for section, keys in resolved.items():
            fh.write(f"[{section}]\n")
            for key, value in keys.items():
                fh.write(f"{key} = {value}\n")
            fh.write("\n")
        fh.write("[private_values]\n")
        for agent_id, theta in sorted(result.private_values.items()):
            fh.write(f"agent-{agent_id} = {' '.join(repr(v) for v in theta)}\n")


def run_one(resolved: dict[str, dict[str, str]], outdir: str) -> bool:
    """Run a single simulation and write all outputs; True if invariants held."""
    result = run(build_config(resolved))
    emit_outputs(result, resolved, outdir)
    return result.invariants_ok


def _parse_sweep(spec: str) -> list[int]:
    try:
        lo, hi = spec.split("..")
        lo_i, hi_i = int(lo), int(hi)
    except ValueError:
        raise ConfigError(f"--sweep-seeds expects 'a..b', got {spec!r}") from None
    if hi_i < lo_i:
        raise ConfigError("--sweep-seeds range is empty")
    return list(range(lo_i, hi_i + 1))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cdasim",
        description="Seed-reproducible continuous double auction simulator",
    )
    parser.add_argument("--config", help="INI config file (defaults used if omitted)")
    parser.add_argument("--seed", type=int, help="override market.seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--sweep-seeds", metavar="A..B",
                        help="run one simulation per seed in [A, B]")
    parser.add_argument("--trace-estimator", action="store_true",
                        help="write per-wake belief rows to estimator_trace.csv")
    parser.add_argument("--trace-decisions", action="store_true",
                        help="write per-wake decision rows to decisions.csv")
    parser.add_argument("--fundamental-dump", action="store_true",
                        help="also write the fundamental series in loadable form")
    args = parser.parse_args(argv)

    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        resolved = parse_config(text)
        if args.seed is not None:
            resolved["market"]["seed"] = str(args.seed)
        if args.trace_estimator:
            resolved["output"]["trace_estimator"] = "true"
        if args.trace_decisions:
            resolved["output"]["trace_decisions"] = "true"
        if args.fundamental_dump:
            resolved["output"]["dump_fundamental"] = "true"
        build_config(resolved)  # fail fast before any run starts

        if args.sweep_seeds:
            seeds = _parse_sweep(args.sweep_seeds)
            jobs = []
            for seed in seeds:
                per_seed = {s: dict(k) for s, k in resolved.items()}
                per_seed["market"]["seed"] = str(seed)
                jobs.append((per_seed, os.path.join(args.out, f"seed-{seed}")))
            with ProcessPoolExecutor() as pool:
                oks = list(pool.map(_run_one_star, jobs))
            return 0 if all(oks) else 2
        ok = run_one(resolved, args.out)
        return 0 if ok else 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


def _run_one_star(job: tuple) -> bool:
    return run_one(*job)


if __name__ == "__main__":
    sys.exit(main())
