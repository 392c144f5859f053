"""Command-line entry point: YAML scenario in, long-format SE table out.

Example::

    otfs-mimo --config configs/scheme_comparison.yaml --out comparison.csv
    otfs-mimo --config configs/group_size_sweep.yaml --sweep-kh 1..5 --out sweep.csv

Exit codes: 0 success, 1 configuration error, 2 runtime/numerical error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from .experiments import ConfigError, Scenario, ScenarioResult, run_scenario, sweep_kh

CSV_FIELDS = (
    "scheme", "grouping", "user_id", "mobility", "group_role", "snr_db",
    "se_sim", "se_closed", "se_approx", "ci95", "realizations", "seed",
)
THREADS_ENV = "OTFS_MIMO_THREADS"

# config section -> {key: Scenario field}
_SECTIONS = {
    "dims": {"M": "M", "N": "N", "Nt": "Nt", "cp_fraction": "cp_fraction"},
    "users": {"K_h": "K_h", "K_l": "K_l", "P": "P", "l_max": "l_max", "k_max_high": "k_max_high",
              "k_max_low": "k_max_low", "aoa_prior": "aoa_prior"},
    "grouping": {"criterion": "criterion", "K_s": "K_s"},
    "monte_carlo": {"R": "R", "R_norm": "R_norm", "moment_samples": "moment_samples", "ridge": "ridge"},
}
_SCALARS = {"scheme": "scheme", "snr_db": "snr_grid_db", "seed": "seed"}
_REQUIRED = (("users", "K_h"), ("users", "K_l"), ("scheme",))
_INT_FIELDS = {"M", "N", "Nt", "K_h", "K_l", "P", "l_max", "K_s", "R", "R_norm", "moment_samples", "seed"}
_FLOAT_FIELDS = {"cp_fraction", "k_max_high", "k_max_low"}


def _coerce(name: str, value):
    if name in _INT_FIELDS:
        if value is None and name == "K_s":
            return None
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return int(value)
    if name in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        return float(value)
    if name == "ridge":
        if not isinstance(value, bool):
            raise ConfigError(f"monte_carlo.ridge must be true/false, got {value!r}")
        return value
    if name == "snr_grid_db":
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError("snr_db must be a non-empty list of numbers")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"snr_db entries must be numbers, got {value!r}")
        return tuple(float(v) for v in value)
    if not isinstance(value, str):
        raise ConfigError(f"{name} must be a string, got {value!r}")
    return value


def scenario_from_config(doc) -> Scenario:
    """Build and validate a :class:`Scenario` from a parsed config mapping."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping at the top level")
    unknown = set(doc) - set(_SECTIONS) - set(_SCALARS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    for path in _REQUIRED:
        node = doc
        for part in path:
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"missing required key {'.'.join(path)}")
            node = node[part]
    kwargs = {}
    for section, keys in _SECTIONS.items():
        body = doc.get(section) or {}
        if not isinstance(body, dict):
            raise ConfigError(f"section {section} must be a mapping")
        extra = set(body) - set(keys)
        if extra:
            raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(extra))}")
        for key, value in body.items():
            kwargs[keys[key]] = _coerce(keys[key], value)
    for key, name in _SCALARS.items():
        if key in doc:
            kwargs[name] = _coerce(name, doc[key])
    try:
        scenario = Scenario(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return scenario.validate()


def parse_config(path) -> Scenario:
    """Read a YAML scenario file; omitted optional keys take the default setup."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return scenario_from_config(doc if doc is not None else {})


def config_dict(s: Scenario) -> dict:
    """Config-shaped echo of a scenario; ``scenario_from_config`` inverts it."""
    fields = dataclasses.asdict(s)
    out = {}
    for section, keys in _SECTIONS.items():
        out[section] = {key: fields[name] for key, name in keys.items()}
    out["scheme"] = s.scheme
    out["snr_db"] = list(s.snr_grid_db)
    out["seed"] = s.seed
    return out


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (str, bool)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return ""
    return "%.6g" % x


def result_rows(result: ScenarioResult) -> list:
    """One record per (user, SNR), users outermost."""
    s = result.scenario
    rows = []
    for k in range(s.K):
        for j, snr in enumerate(s.snr_grid_db):
            rows.append({
                "scheme": s.scheme,
                "grouping": s.grouping,
                "user_id": k,
                "mobility": result.mobility[k],
                "group_role": result.roles[k],
                "snr_db": snr,
                "se_sim": result.se_sim[k, j],
                "se_closed": result.se_closed[k, j],
                "se_approx": result.se_approx[k, j],
                "ci95": result.ci95[k, j],
                "realizations": s.R,
                "seed": s.seed,
            })
    return rows


def format_results(result: ScenarioResult, fmt: str = "csv") -> str:
    rows = [{f: _fmt(v) for f, v in row.items()} for row in result_rows(result)]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "json":
        # numbers keep the CSV's 6-significant-digit text; empty cells become null
        def value(f, v):
            if v == "":
                return None
            if f in ("user_id", "realizations", "seed"):
                return int(v)
            if f in ("snr_db", "se_sim", "se_closed", "se_approx", "ci95"):
                return float(v)
            return v

        doc = {
            "scenario": config_dict(result.scenario),
            "fields": list(CSV_FIELDS),
            "rows": [{f: value(f, r[f]) for f in CSV_FIELDS} for r in rows],
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    raise ValueError(f"format must be csv or json, got {fmt!r}")


def emit_results(result: ScenarioResult, fmt: str, path) -> None:
    Path(path).write_text(format_results(result, fmt))


def summary_lines(result: ScenarioResult) -> list:
    s = result.scenario
    lines = []
    for j, snr in enumerate(s.snr_grid_db):
        parts = [f"scheme={s.scheme}", f"snr_db={snr:g}"]
        for group in ("high", "low"):
            if result.users_in(group):
                mean, hw = result.group_mean(group, j)
                parts.append(f"{group}={mean:.4f}±{hw:.4f}")
        lines.append(" ".join(parts))
    return lines


def parse_kh_range(text: str) -> list:
    """``"1..5"`` -> [1, 2, 3, 4, 5]; a comma list such as ``"1,3"`` is also accepted."""
    try:
        if ".." in text:
            lo, hi = (int(p) for p in text.split("..", 1))
            values = list(range(lo, hi + 1))
        else:
            values = [int(p) for p in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--sweep-kh expects 'a..b' or a comma list, got {text!r}") from exc
    if not values:
        raise ConfigError(f"--sweep-kh range {text!r} is empty")
    return values


def _sweep_path(out: Path, kh: int) -> Path:
    return out.with_name(f"{out.stem}_kh{kh}{out.suffix}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="otfs-mimo", description="Per-user SE of hybrid OTFS/OFDM downlink precoding schemes.")
    p.add_argument("--config", required=True, help="YAML scenario file")
    p.add_argument("--out", default=None, help="output file (default: se_results.<format>)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--threads", type=int, default=None,
                   help=f"realization workers (default: ${THREADS_ENV} or 1)")
    p.add_argument("--scheme", default=None, help="override the config scheme")
    p.add_argument("--sweep-kh", default=None, metavar="A..B",
                   help="run PZF_HL for each K_h in the range at fixed K; one output file per K_h")
    return p


def _threads(arg) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get(THREADS_ENV, "")
        try:
            n = int(env) if env else 1
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    if n < 1:
        raise ConfigError(f"thread count must be >= 1, got {n}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = parse_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.scheme is not None:
            overrides["scheme"] = args.scheme
        if overrides:
            scenario = dataclasses.replace(scenario, **overrides).validate()
        threads = _threads(args.threads)
        kh_values = parse_kh_range(args.sweep_kh) if args.sweep_kh else None
        if kh_values is not None:
            for kh in kh_values:
                if not 1 <= kh <= scenario.K - 1:
                    raise ConfigError(f"--sweep-kh value {kh} outside 1..{scenario.K - 1} (K={scenario.K})")
                dataclasses.replace(scenario, scheme="PZF_HL", K_h=kh, K_l=scenario.K - kh).validate()
    except ConfigError as exc:
        print(f"otfs-mimo: config error: {exc}", file=sys.stderr)
        return 1

    out = Path(args.out) if args.out else Path(f"se_results.{args.format}")
    try:
        if kh_values is None:
            results = [(run_scenario(scenario, threads=threads), out)]
        else:
            runs = sweep_kh(scenario, kh_values, threads=threads)
            results = [(r, _sweep_path(out, kh)) for r, kh in zip(runs, kh_values)]
        for result, path in results:
            if kh_values is not None:
                print(f"# K_h={result.scenario.K_h} K_l={result.scenario.K_l}")
            for line in summary_lines(result):
                print(line)
            emit_results(result, args.format, path)
    except (np.linalg.LinAlgError, ArithmeticError, ValueError, OSError) as exc:
        print(f"otfs-mimo: runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
