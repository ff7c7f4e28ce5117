"""Configuration-driven command line for MC/SG/TT campaigns.

Two subcommands: `run` executes the estimators described by a JSON config
and writes a manifest CSV plus per-run JSON records; `report` renders a
manifest as an aligned text table.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure (partial results are flushed first).

Config keys can be overridden by flags or by environment variables with
the ETUQ_ prefix (ETUQ_METHOD, ETUQ_OUT, ETUQ_SEED, ETUQ_THREADS);
precedence is flags, then environment, then the config file.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
from dataclasses import dataclass, field

from .fit_model import desk_model, load_model
from .fit_solver import SolverError
from .uq import (
    MomentEstimate,
    QoIOracle,
    RandomVector,
    mc_estimate,
    relative_errors,
    sg_estimate,
    tt_estimate,
)

__all__ = ["CampaignConfig", "run_campaign", "report", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

MANIFEST_COLUMNS = [
    "method",
    "level",
    "sweeps",
    "solver_calls",
    "mean_K",
    "std_K",
    "rel_err_mean_pct",
    "rel_err_std_pct",
]

ENV_PREFIX = "ETUQ_"


class ConfigError(ValueError):
    """Invalid campaign configuration."""


@dataclass
class CampaignConfig:
    method: str = "compare"
    model_path: str | None = None  # None selects the shipped desk model
    mc_samples: int = 20000
    mc_seed: int = 2024
    sg_levels: list[int] = field(default_factory=lambda: [1, 2])
    sg_growth: str = "smolyak"
    tt_levels: list[int] = field(default_factory=lambda: [1])
    tt_sweeps: list[int] = field(default_factory=lambda: [6])
    tt_tolerance: float = 1e-10
    tt_rank_cap: int = 64
    tt_seed: int = 0
    out: str = "results"
    threads: int = 1

    def validate(self) -> None:
        if self.method not in ("mc", "sg", "tt", "compare"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.model_path is not None and not os.path.exists(self.model_path):
            raise ConfigError(f"model file not found: {self.model_path}")
        if self.mc_samples < 2:
            raise ConfigError("mc samples must be >= 2")
        if not self.sg_levels or any(l < 0 for l in self.sg_levels):
            raise ConfigError("sg levels must be a nonempty list of levels >= 0")
        if self.sg_growth not in ("smolyak", "total_degree"):
            raise ConfigError(f"unknown growth rule {self.sg_growth!r}")
        if not self.tt_levels or any(l < 1 for l in self.tt_levels):
            raise ConfigError("tt levels must be a nonempty list of levels >= 1")
        if not self.tt_sweeps or any(s < 1 for s in self.tt_sweeps):
            raise ConfigError("tt sweep budgets must be a nonempty list of budgets >= 1")
        if self.tt_tolerance <= 0 or self.tt_rank_cap < 1:
            raise ConfigError("tt tolerance must be > 0 and rank cap >= 1")
        if self.threads < 1:
            raise ConfigError("thread budget must be >= 1")


def load_config(path: str) -> CampaignConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    cfg = CampaignConfig()
    cfg.method = raw.get("method", cfg.method)
    cfg.model_path = raw.get("model", cfg.model_path)
    mc = raw.get("mc", {})
    cfg.mc_samples = int(mc.get("samples", cfg.mc_samples))
    cfg.mc_seed = int(mc.get("seed", cfg.mc_seed))
    sg = raw.get("sg", {})
    cfg.sg_levels = [int(l) for l in sg.get("levels", cfg.sg_levels)]
    cfg.sg_growth = sg.get("growth", cfg.sg_growth)
    tt = raw.get("tt", {})
    cfg.tt_levels = [int(l) for l in tt.get("levels", cfg.tt_levels)]
    cfg.tt_sweeps = [int(s) for s in tt.get("sweeps", cfg.tt_sweeps)]
    cfg.tt_tolerance = float(tt.get("tolerance", cfg.tt_tolerance))
    cfg.tt_rank_cap = int(tt.get("rank_cap", cfg.tt_rank_cap))
    cfg.tt_seed = int(tt.get("seed", cfg.tt_seed))
    cfg.out = raw.get("out", cfg.out)
    cfg.threads = int(raw.get("threads", cfg.threads))
    return cfg


def _apply_overrides(cfg: CampaignConfig, args) -> None:
    env = os.environ
    method = args.method or env.get(ENV_PREFIX + "METHOD")
    if method:
        cfg.method = method
    out = args.out or env.get(ENV_PREFIX + "OUT")
    if out:
        cfg.out = out
    seed = args.seed if args.seed is not None else env.get(ENV_PREFIX + "SEED")
    if seed is not None:
        try:
            cfg.mc_seed = int(seed)
        except ValueError as err:
            raise ConfigError(f"seed must be an integer, got {seed!r}") from err
    threads = args.threads if args.threads is not None else env.get(ENV_PREFIX + "THREADS")
    if threads is not None:
        try:
            cfg.threads = int(threads)
        except ValueError as err:
            raise ConfigError(f"threads must be an integer, got {threads!r}") from err


class _Manifest:
    """Progressively flushed manifest CSV; rows hit disk as they complete."""

    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(MANIFEST_COLUMNS)
        self._fh.flush()

    def add(self, est: MomentEstimate, errors: tuple[float, float] | None) -> None:
        row = [
            est.method,
            "" if est.level is None else est.level,
            "" if est.sweeps is None else est.sweeps,
            est.solver_calls,
            repr(est.mean),
            repr(est.std),
            "" if errors is None else repr(errors[0]),
            "" if errors is None else repr(errors[1]),
        ]
        self._writer.writerow(row)
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def _record_path(out: str, est: MomentEstimate) -> str:
    parts = [est.method]
    if est.level is not None:
        parts.append(f"l{est.level}")
    if est.sweeps is not None:
        parts.append(f"s{est.sweeps}")
    return os.path.join(out, "_".join(parts) + ".json")


def _write_record(out: str, est: MomentEstimate, errors) -> None:
    payload = json.loads(est.to_json())
    payload["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    if errors is not None:
        payload["rel_err_mean_pct"], payload["rel_err_std_pct"] = errors
    with open(_record_path(out, est), "w") as fh:
        json.dump(payload, fh, indent=2)


def run_campaign(cfg: CampaignConfig) -> int:
    cfg.validate()
    model = desk_model() if cfg.model_path is None else load_model(cfg.model_path)
    oracle = QoIOracle(model, n_jobs=cfg.threads)
    rv = RandomVector(len(model.wires))
    os.makedirs(cfg.out, exist_ok=True)
    manifest = _Manifest(os.path.join(cfg.out, "manifest.csv"))

    jobs = []
    if cfg.method in ("mc", "compare"):
        jobs.append(("mc", None, None))
    if cfg.method in ("sg", "compare"):
        jobs.extend(("sg", l, None) for l in sorted(cfg.sg_levels))
    if cfg.method in ("tt", "compare"):
        jobs.extend(
            ("tt", l, s) for l in sorted(cfg.tt_levels) for s in sorted(cfg.tt_sweeps)
        )

    reference = None
    try:
        for kind, level, sweeps in jobs:
            if kind == "mc":
                est = mc_estimate(oracle, rv, cfg.mc_samples, cfg.mc_seed)
                reference = est
            elif kind == "sg":
                est = sg_estimate(oracle, rv, level, cfg.sg_growth)
            else:
                est = tt_estimate(
                    oracle,
                    rv,
                    level,
                    sweeps,
                    tol=cfg.tt_tolerance,
                    rank_cap=cfg.tt_rank_cap,
                    seed=cfg.tt_seed,
                )
            errors = None
            if reference is not None and est is not reference:
                errors = relative_errors(est, reference)
            manifest.add(est, errors)
            _write_record(cfg.out, est, errors)
    except (SolverError, FloatingPointError, ZeroDivisionError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    finally:
        manifest.close()
    return EXIT_OK


def _render_errors(raw: str) -> str:
    if raw == "":
        return "-"
    value = float(raw)
    if value < 1.0:
        return "<1.0"
    return f"{value:.2f}"


def report(manifest_path: str) -> int:
    try:
        with open(manifest_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != MANIFEST_COLUMNS:
                raise ConfigError(f"unexpected manifest header: {header}")
            rows = [row for row in reader if row]
    except OSError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, csv.Error) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    for row in rows:
        if len(row) != len(MANIFEST_COLUMNS):
            print(f"config error: malformed manifest row {row}", file=sys.stderr)
            return EXIT_CONFIG

    def sort_key(row):
        level = int(row[1]) if row[1] else -1
        sweeps = int(row[2]) if row[2] else -1
        return (row[0], level, sweeps)

    rows.sort(key=sort_key)
    table = [["method", "level", "sweeps", "calls", "mean [K]", "std [K]", "eps_mu [%]", "eps_sigma [%]"]]
    for row in rows:
        try:
            table.append(
                [
                    row[0],
                    row[1] or "-",
                    row[2] or "-",
                    row[3],
                    f"{float(row[4]):.4f}",
                    f"{float(row[5]):.4f}",
                    _render_errors(row[6]),
                    _render_errors(row[7]),
                ]
            )
        except ValueError as err:
            print(f"config error: malformed manifest row {row}: {err}", file=sys.stderr)
            return EXIT_CONFIG
    widths = [max(len(r[c]) for r in table) for c in range(len(table[0]))]
    for r in table:
        print("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="etuq",
        description="UQ campaigns for the maximum bondwire temperature",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a campaign described by a JSON config")
    p_run.add_argument("--config", required=True, help="campaign config (JSON)")
    p_run.add_argument("--method", choices=["mc", "sg", "tt", "compare"])
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--seed", type=int, help="Monte Carlo seed override")
    p_run.add_argument("--threads", type=int, help="worker process budget")

    p_rep = sub.add_parser("report", help="render a manifest CSV as a table")
    p_rep.add_argument("manifest", help="path to manifest.csv")

    args = parser.parse_args(argv)
    if args.command == "run":
        try:
            cfg = load_config(args.config)
            _apply_overrides(cfg, args)
            return run_campaign(cfg)
        except ConfigError as err:
            print(f"config error: {err}", file=sys.stderr)
            return EXIT_CONFIG
    return report(args.manifest)


if __name__ == "__main__":
    sys.exit(main())
