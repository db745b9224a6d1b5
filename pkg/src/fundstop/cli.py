"""Command-line front end: solve, validate and converge on a JSON config.

Outputs are plot-ready CSV tables plus a JSON summary; nothing is rendered.
Exit codes: 0 ok, 2 config error, 3 fee-model domain error, 4 Monte-Carlo
validation failure, 5 convergence bound failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import fees
from .engine import (
    BarrierField,
    GridSpec,
    StateTensor,
    build_current_level_reward,
    build_reward_tensor,
    build_running_max_reward,
    full_chain_oracle,
    solve,
)
from .montecarlo import (
    McConfig,
    PolicyValidationError,
    convergence_study,
    simulate_policy,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_VALIDATION = 4
EXIT_CONVERGENCE = 5

OUTPUT_SELECTORS = (
    "value_tensor",
    "barriers",
    "continuation",
    "reward_slices",
    "convergence",
)
DEFAULT_OUTPUTS = ("value_tensor", "barriers", "continuation", "reward_slices")
REWARD_KINDS = ("fees", "identity", "max")


class ConfigError(ValueError):
    """Invalid run configuration; message carries the field path."""


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _reject_unknown(mapping, allowed, path):
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(unknown)}")


def _number(mapping, field, path, default=None, required=True):
    if field not in mapping:
        if required:
            raise ConfigError(f"{path}.{field}: missing required field")
        return default
    value = mapping[field]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{field}: expected a number, got {value!r}")
    return float(value)


def _integer(mapping, field, path, default=None, required=True):
    if field not in mapping:
        if required:
            raise ConfigError(f"{path}.{field}: missing required field")
        return default
    value = mapping[field]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}.{field}: expected an integer, got {value!r}")
    return value


def _parse_profile(raw) -> fees.ProfileSpec:
    path = "fee.profile"
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    _reject_unknown(raw, ("family", "K", "gamma", "normalize_at_w0", "scale"), path)
    family = raw.get("family", "sqrt_capped")
    if family not in fees.PROFILE_FAMILIES:
        raise ConfigError(f"{path}.family: must be one of {fees.PROFILE_FAMILIES}")
    normalize = raw.get("normalize_at_w0", False)
    if not isinstance(normalize, bool):
        raise ConfigError(f"{path}.normalize_at_w0: expected true/false")
    kwargs = {"family": family, "normalize_at_w0": normalize}
    if "K" in raw:
        kwargs["cap"] = _number(raw, "K", path)
    if "gamma" in raw:
        kwargs["exponent"] = _number(raw, "gamma", path)
    if "scale" in raw:
        kwargs["scale"] = _number(raw, "scale", path)
    try:
        return fees.ProfileSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_fee(raw) -> fees.FeeParams:
    path = "fee"
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    _reject_unknown(
        raw, ("alpha", "beta", "p", "w0", "profile", "utility", "eta"), path
    )
    utility = raw.get("utility", "log")
    if utility not in fees.UTILITIES:
        raise ConfigError(f"{path}.utility: must be one of {fees.UTILITIES}")
    eta = _number(raw, "eta", path, required=False)
    profile = _parse_profile(raw.get("profile", {}))
    try:
        return fees.FeeParams(
            alpha=_number(raw, "alpha", path),
            beta=_number(raw, "beta", path),
            p=_number(raw, "p", path),
            w0=_number(raw, "w0", path),
            profile=profile,
            utility=utility,
            eta=eta,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_grid(raw, w0: float) -> GridSpec:
    path = "grid"
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    _reject_unknown(raw, ("h", "m", "n", "w0", "w_min", "w_max"), path)
    h = _number(raw, "h", path)
    if h is None or h <= 0:
        raise ConfigError(f"{path}.h: must be a positive step")
    grid_w0 = _number(raw, "w0", path, required=False)
    if grid_w0 is not None and grid_w0 != w0:
        raise ConfigError(f"{path}.w0: must equal fee.w0 ({w0})")

    def snap(field, value, sign):
        steps = (w0 - value) / h if sign < 0 else (value - w0) / h
        rounded = round(steps)
        if abs(steps - rounded) > 1e-9 or rounded < 1:
            base = max(1, round(steps))
            hint = ", ".join(_fmt(abs(value - w0) / c) for c in (base, base + 1))
            raise ConfigError(
                f"{path}.{field}: {value} is not a whole number of steps h={h} "
                f"from w0={w0}; nearby valid h: {hint}"
            )
        return int(rounded)

    has_mn = "m" in raw or "n" in raw
    has_box = "w_min" in raw or "w_max" in raw
    if has_mn and has_box:
        raise ConfigError(f"{path}: give either m/n or w_min/w_max, not both")
    if has_box:
        m = snap("w_min", _number(raw, "w_min", path), -1)
        n = snap("w_max", _number(raw, "w_max", path), +1)
    else:
        m = _integer(raw, "m", path)
        n = _integer(raw, "n", path)
    try:
        return GridSpec(h=h, m=m, n=n, w0=w0)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_mc(raw, required: bool) -> McConfig | None:
    path = "mc"
    if raw is None:
        if required:
            raise ConfigError(f"{path}: missing section (or pass --paths/--seed)")
        return None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    _reject_unknown(raw, ("n_paths", "seed", "max_steps"), path)
    try:
        return McConfig(
            n_paths=_integer(raw, "n_paths", path),
            seed=_integer(raw, "seed", path),
            max_steps=_integer(raw, "max_steps", path, required=False),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


class RunConfig:
    """Validated run configuration (fee, grid, mc, reward kind, outputs)."""

    def __init__(self, fee, grid, mc, reward_kind, outputs, echo):
        self.fee = fee
        self.grid = grid
        self.mc = mc
        self.reward_kind = reward_kind
        self.outputs = outputs
        self.echo = echo

    def reward_tensor(self) -> StateTensor:
        if self.reward_kind == "identity":
            return build_current_level_reward(self.grid)
        if self.reward_kind == "max":
            return build_running_max_reward(self.grid)
        return build_reward_tensor(self.fee, self.grid)

    def reward_builder(self):
        if self.reward_kind == "identity":
            return build_current_level_reward
        if self.reward_kind == "max":
            return build_running_max_reward
        return None


def load_config(path: str, mc_required: bool = False) -> RunConfig:
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, ("fee", "grid", "mc", "reward", "outputs"), "config")
    if "fee" not in raw or "grid" not in raw:
        raise ConfigError("config: fee and grid sections are required")
    fee = _parse_fee(raw["fee"])
    grid = _parse_grid(raw["grid"], fee.w0)
    mc = _parse_mc(raw.get("mc"), required=mc_required)
    reward_kind = raw.get("reward", "fees")
    if reward_kind not in REWARD_KINDS:
        raise ConfigError(f"reward: must be one of {REWARD_KINDS}")
    outputs = raw.get("outputs", list(DEFAULT_OUTPUTS))
    if not isinstance(outputs, list) or any(o not in OUTPUT_SELECTORS for o in outputs):
        raise ConfigError(f"outputs: must be a list drawn from {OUTPUT_SELECTORS}")
    return RunConfig(fee, grid, mc, reward_kind, outputs, raw)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_json(path: Path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _tensor_rows(grid: GridSpec, values: StateTensor, rewards: StateTensor):
    for j in range(grid.m + 1):
        for k in range(grid.n + 1):
            vc, fc = values.cell(j, k), rewards.cell(j, k)
            for t in range(j + k + 1):
                i = t - j
                yield (
                    j,
                    k,
                    i,
                    grid.level(-j),
                    grid.level(i),
                    grid.level(k),
                    fc[t],
                    vc[t],
                )


def _barrier_rows(grid: GridSpec, barriers: BarrierField):
    for j in range(grid.m + 1):
        for k in range(grid.n + 1):
            yield (
                j,
                k,
                grid.level(-j),
                grid.level(k),
                barriers.stop_lo[j, k],
                barriers.stop_hi[j, k],
                barriers.continuation[j, k],
            )


def _slice_rows(cfg: RunConfig):
    """Reward profiles over the current level for pinned (w_min, w_max) pairs."""
    grid, fee = cfg.grid, cfg.fee
    w0 = grid.w0
    lo_edge, hi_edge = grid.level(-grid.m), grid.level(grid.n)
    lows = np.linspace(lo_edge, w0, 5)
    highs = np.linspace(w0, hi_edge, 5)
    pairs = [(lo, hi_edge) for lo in lows] + [(lo_edge, hi) for hi in highs]
    for w_min, w_max in pairs:
        w = np.linspace(w_min, w_max, 201)
        if cfg.reward_kind == "identity":
            vals = w
        elif cfg.reward_kind == "max":
            vals = np.full_like(w, w_max)
        else:
            vals = fees.reward_many(fee, w_min, w, w_max)
        for x, v in zip(w, vals):
            yield (w_min, w_max, x, v)


def _summary(cfg: RunConfig, extra):
    payload = {"config": cfg.echo}
    payload.update(extra)
    return payload


def cmd_solve(config_path: str, out_dir: str) -> int:
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rewards = cfg.reward_tensor()
    values, barriers = solve(rewards, cfg.grid)
    elapsed = time.perf_counter() - t0
    if "value_tensor" in cfg.outputs:
        _write_csv(
            out / "value_tensor.csv",
            ("j", "k", "i", "w_min", "w", "w_max", "reward", "value"),
            _tensor_rows(cfg.grid, values, rewards),
        )
    if "barriers" in cfg.outputs:
        _write_csv(
            out / "barriers.csv",
            ("j", "k", "w_min", "w_max", "stop_lo", "stop_hi", "continuation"),
            _barrier_rows(cfg.grid, barriers),
        )
    if "continuation" in cfg.outputs:
        cells = np.argwhere(barriers.continuation)
        _write_csv(
            out / "continuation.csv",
            ("j", "k", "w_min", "w_max"),
            (
                (j, k, cfg.grid.level(-int(j)), cfg.grid.level(int(k)))
                for j, k in cells
            ),
        )
    if "reward_slices" in cfg.outputs:
        _write_csv(
            out / "reward_slices.csv",
            ("w_min", "w_max", "w", "reward"),
            _slice_rows(cfg),
        )
    _write_json(
        out / "summary.json",
        _summary(
            cfg,
            {
                "initial_value": values.initial_value(),
                "states": int(values.data.size),
                "continuation_cells": int(barriers.continuation.sum()),
            },
        ),
    )
    print(f"solved {values.data.size} states in {elapsed:.2f}s", file=sys.stderr)
    print(f"initial value: {values.initial_value():.12g}")
    return EXIT_OK


def cmd_validate(config_path: str, out_dir: str, paths=None, seed=None) -> int:
    cfg = load_config(config_path, mc_required=(paths is None or seed is None))
    mc = cfg.mc
    if paths is not None or seed is not None:
        try:
            mc = McConfig(
                n_paths=paths if paths is not None else mc.n_paths,
                seed=seed if seed is not None else mc.seed,
                max_steps=mc.max_steps if mc is not None else None,
            )
        except ValueError as exc:
            raise ConfigError(f"mc: {exc}") from exc
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rewards = cfg.reward_tensor()
    values, _ = solve(rewards, cfg.grid)
    v0 = values.initial_value()
    try:
        stats = simulate_policy(values, rewards, cfg.grid, mc)
    except PolicyValidationError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if stats.std_error > 0:
        z = (stats.mean - v0) / stats.std_error
    else:
        z = 0.0 if stats.mean == v0 else float("inf")
    report = {
        "initial_value": v0,
        "mc_mean": stats.mean,
        "std_error": stats.std_error,
        "z_score": z,
        "n_paths": stats.n_paths,
        "seed": mc.seed,
        "n_exceeded": stats.n_exceeded,
        "n_reexpanded": stats.n_reexpanded,
    }
    if cfg.grid.m <= 6 and cfg.grid.n <= 6:
        oracle = full_chain_oracle(rewards, cfg.grid, tol=1e-12)
        report["oracle_value"] = oracle.initial_value()
    _write_json(out / "validation.json", _summary(cfg, report))
    print(
        f"value {v0:.10g}  mc {stats.mean:.10g} +/- {stats.std_error:.3g}  z={z:.3f}"
    )
    if abs(z) > 4.0:
        print("validation failed: |z| > 4", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_converge(config_path: str, out_dir: str, refinements: int) -> int:
    if refinements < 1:
        raise ConfigError(f"refinements must be >= 1, got {refinements}")
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = convergence_study(
        cfg.fee, cfg.grid, refinements, reward_builder=cfg.reward_builder()
    )
    rows = []
    for r, (h, v) in enumerate(zip(report.steps, report.values)):
        diff = report.differences[r - 1] if r > 0 else ""
        ok = report.bound_check[r - 1] if r > 0 else ""
        bound = (
            report.lipschitz_estimate * np.sqrt(3.0) * (report.steps[r - 1] + h)
            if r > 0
            else ""
        )
        rows.append((h, v, diff, bound, ok))
    _write_csv(
        out / "convergence.csv",
        ("h", "value", "difference", "bound", "within_bound"),
        rows,
    )
    _write_json(
        out / "convergence.json",
        _summary(
            cfg,
            {
                "steps": report.steps,
                "values": report.values,
                "lipschitz_estimate": report.lipschitz_estimate,
                "bound_check": report.bound_check,
            },
        ),
    )
    for r, ok in enumerate(report.bound_check):
        print(
            f"h={report.steps[r]:g} -> h={report.steps[r + 1]:g}: "
            f"|dV|={report.differences[r]:.3e} "
            f"bound={report.lipschitz_estimate * np.sqrt(3.0) * (report.steps[r] + report.steps[r + 1]):.3e} "
            f"{'ok' if ok else 'VIOLATED'}"
        )
    return EXIT_OK if all(report.bound_check) else EXIT_CONVERGENCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fundstop",
        description="Optimal stopping of a fee-reward random walk: solve, "
        "validate by Monte Carlo, check grid convergence.",
    )
    parser.add_argument(
        "--out",
        dest="out_global",
        default=None,
        help="output directory (default: $FUNDSTOP_OUT or ./out)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_solve = sub.add_parser("solve", help="solve and write tensors/barriers/slices")
    p_val = sub.add_parser("validate", help="solve then Monte-Carlo check the policy")
    p_val.add_argument("--paths", type=int, default=None)
    p_val.add_argument("--seed", type=int, default=None)
    p_conv = sub.add_parser("converge", help="halve h repeatedly and check bounds")
    p_conv.add_argument("--refinements", type=int, required=True)
    for p in (p_solve, p_val, p_conv):
        p.add_argument("config")
        p.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = (
        args.out or args.out_global or os.environ.get("FUNDSTOP_OUT", "out")
    )
    try:
        if args.command == "solve":
            return cmd_solve(args.config, out_dir)
        if args.command == "validate":
            return cmd_validate(args.config, out_dir, paths=args.paths, seed=args.seed)
        return cmd_converge(args.config, out_dir, args.refinements)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except fees.FeeModelError as exc:
        print(f"fee-model domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
