"""Command-line entry point: ``replay``, ``sweep``, ``synth`` and ``report``.

Every flag has a config-file twin: ``--batch-size 32`` and a ``batch_size = 32``
line in the file given to ``--config`` mean the same thing. Values on the
command line win over the file.

Exit codes: 0 ok, 2 usage or configuration error, 3 data error, 4 training failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import typing
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

from .agent import AgentConfig, TrainingError
from .dataset import (
    SCENARIOS, DatasetError, ScenarioSpec, dump_dataset, filter_cycles, generate_synthetic, load_dataset,
    write_dataset,
)
from .harness import (
    POLICIES, ReplayConfig, budget_sweep, json_safe, load_checkpoint, run_replay, save_checkpoint,
)
from .kvconfig import ConfigError, coerce, parse_bool, parse_kv_file
from .rewards import REWARDS

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAINING = 0, 2, 3, 4

PIPELINE_ALIASES = {"pre": "pre_submit", "post": "post_submit",
                    "pre_submit": "pre_submit", "post_submit": "post_submit"}

# key, type, help; the flag is --key with underscores turned into dashes
REPLAY_OPTIONS = [
    ("dataset", str, "CSV execution log to replay"),
    ("pipeline", str, "pre (fail-fast) or post (transitions)"),
    ("policy", str, "one of: " + ", ".join(POLICIES)),
    ("reward", str, "one of: " + ", ".join(REWARDS) + " (default depends on pipeline)"),
    ("budget", float, "fraction of the full suite's time, in (0, 1]"),
    ("seed", int, "master seed"),
    ("warm_start", int, "leading cycles executed in full before evaluation"),
    ("k", int, "verdict history length"),
    ("pca_dim", int, "name-embedding dimension"),
    ("horizon", float, "cycles after which recency features saturate"),
    ("flaky_window", int, "executions that must agree for a transition to count as relevant"),
    ("random_repetitions", int, "repetitions averaged for the random policy"),
    ("alpha", float, "rank discount of the fail-fast reward"),
    ("force", bool, "allow a reward that does not fit the pipeline"),
    ("also_full_rank", bool, "also report ranking metrics at budget 1.0"),
    ("frozen", bool, "evaluate a resumed agent without training or exploration"),
    ("instrument", bool, "add per-cycle history hashes and selections to the report"),
    ("min_targets", int, "drop cycles with fewer executed targets"),
    ("require_failure", bool, "drop cycles without any failure"),
    ("checkpoint", str, "write the trained agent here"),
    ("resume", str, "start from an agent checkpoint"),
    ("out", str, "report path (default: stdout)"),
]
AGENT_OPTIONS = [
    ("hidden", tuple[int, ...], "hidden layer widths, e.g. 64,32,16"),
    ("dropout", float, "dropout rate"),
    ("l2", float, "L2 weight penalty"),
    ("lr", float, "Adam learning rate"),
    ("beta1", float, "Adam beta1"),
    ("beta2", float, "Adam beta2"),
    ("eps", float, "Adam epsilon"),
    ("batch_size", int, "training batch size"),
    ("buffer_capacity", int, "replay buffer capacity"),
    ("sigma", float, "initial exploration noise"),
    ("sigma_decay", float, "per-cycle exploration decay"),
    ("sigma_min", float, "exploration floor"),
]
SWEEP_OPTIONS = [
    ("budgets", tuple[float, ...], "comma-separated budget fractions"),
    ("workers", int, "parallel replays (default: CPU count)"),
]
REPORT_OPTIONS = [
    ("in", str, "report JSON written by replay or sweep"),
    ("csv", str, "output CSV path (default: stdout)"),
]
_SKIP_SPEC = {"scenario"}


def _synth_options() -> list[tuple[str, Any, str]]:
    hints = typing.get_type_hints(ScenarioSpec)
    out = [("scenario", str, "one of: " + ", ".join(SCENARIOS))]
    out += [(f.name, hints[f.name], "scenario parameter") for f in fields(ScenarioSpec) if f.name not in _SKIP_SPEC]
    out.append(("out", str, "CSV path (default: stdout)"))
    return out


SYNTH_OPTIONS = _synth_options()
COMMANDS = {
    "replay": REPLAY_OPTIONS + AGENT_OPTIONS,
    "sweep": REPLAY_OPTIONS + AGENT_OPTIONS + SWEEP_OPTIONS,
    "synth": SYNTH_OPTIONS,
    "report": REPORT_OPTIONS,
}


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _type_name(kind) -> str:
    return getattr(kind, "__name__", None) or str(kind).replace("typing.", "")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pipeline-rto", description="Replay CI logs under test-selection policies.")
    parser.add_argument("--log-level", default="WARNING", help="logging level")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, options in COMMANDS.items():
        p = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="key=value file; command-line flags override it")
        for key, kind, text in options:
            if kind is bool:
                p.add_argument(_flag(key), dest=key, action=argparse.BooleanOptionalAction, help=text)
            else:
                p.add_argument(_flag(key), dest=key, metavar=key.upper(), help=f"{text} [{_type_name(kind)}]")
    return parser


def merged_options(command: str, args: argparse.Namespace) -> dict[str, Any]:
    """Config-file values overlaid by command-line values, coerced to their types."""
    kinds = {key: kind for key, kind, _ in COMMANDS[command]}
    raw: dict[str, Any] = {}
    path = getattr(args, "config", None)
    if path:
        for key, value in parse_kv_file(path).items():
            if key not in kinds:
                raise ConfigError(f"{path}: unknown key {key!r} for {command}")
            raw[key] = value
    for key in kinds:
        if hasattr(args, key):
            raw[key] = getattr(args, key)
    out = {}
    for key, value in raw.items():
        kind = kinds[key]
        out[key] = parse_bool(value) if kind is bool else coerce(value, kind)
    return out


def replay_config(opts: dict[str, Any]) -> ReplayConfig:
    """Build a :class:`ReplayConfig` from merged options (unknown keys are ignored)."""
    agent_keys = {k for k, _, _ in AGENT_OPTIONS}
    replay_keys = {f.name for f in fields(ReplayConfig)} - {"agent"}
    kwargs = {k: v for k, v in opts.items() if k in replay_keys}
    if "pipeline" in kwargs:
        try:
            kwargs["pipeline"] = PIPELINE_ALIASES[str(kwargs["pipeline"])]
        except KeyError:
            raise ConfigError(f"unknown pipeline {kwargs['pipeline']!r}; expected pre or post") from None
    try:
        kwargs["agent"] = AgentConfig(**{k: v for k, v in opts.items() if k in agent_keys})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ReplayConfig(**kwargs).validate()


def _load_series(opts: dict[str, Any], pipeline: str):
    if "dataset" not in opts:
        raise ConfigError("--dataset is required")
    series = load_dataset(opts["dataset"], pipeline)
    series = filter_cycles(series, opts.get("min_targets", 6), opts.get("require_failure", True))
    if not len(series):
        raise DatasetError(f"{opts['dataset']}: no cycles left after filtering")
    return series


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_replay(opts: dict[str, Any]) -> int:
    config = replay_config(opts)
    if opts.get("checkpoint") and config.policy != "dqn":
        raise ConfigError("--checkpoint needs the dqn policy")
    series = _load_series(opts, config.pipeline)
    resume = load_checkpoint(opts["resume"]) if opts.get("resume") else None
    report = run_replay(config, series, resume)
    _emit(report.to_json(), opts.get("out"))
    if opts.get("checkpoint"):
        save_checkpoint(report, opts["checkpoint"])
    return EXIT_OK


def cmd_sweep(opts: dict[str, Any]) -> int:
    config = replay_config(opts)
    if not opts.get("budgets"):
        raise ConfigError("--budgets is required")
    series = _load_series(opts, config.pipeline)
    resume = load_checkpoint(opts["resume"]) if opts.get("resume") else None
    reports = budget_sweep(config, series, opts["budgets"], opts.get("workers", 0), resume)
    text = json.dumps(json_safe({"budgets": list(opts["budgets"]), "reports": reports}), sort_keys=True, indent=1)
    _emit(text + "\n", opts.get("out"))
    return EXIT_OK


def cmd_synth(opts: dict[str, Any]) -> int:
    values = {k: v for k, v in opts.items() if k != "out"}
    if "pipeline" in values:
        values["pipeline"] = PIPELINE_ALIASES.get(str(values["pipeline"]), values["pipeline"])
    spec = ScenarioSpec(**values)
    series = generate_synthetic(spec)
    if opts.get("out"):
        write_dataset(series, opts["out"])
    else:
        sys.stdout.write(dump_dataset(series))
    return EXIT_OK


def flatten_report(data: dict) -> tuple[list[str], list[list]]:
    """Long-format rows for plotting: one row per (cycle, metric)."""
    if "reports" in data:
        header = ["budget", "cycle_id", "metric", "value"]
        rows = []
        for budget, rep in zip(data["budgets"], data["reports"]):
            rows += [[budget] + r for r in flatten_report(rep)[1]]
        return header, rows
    rows = []
    for row in data.get("per_cycle", []):
        for key, value in row.items():
            if key != "cycle_id":
                rows.append([row["cycle_id"], key, "" if value is None else value])
    return ["cycle_id", "metric", "value"], rows


def cmd_report(opts: dict[str, Any]) -> int:
    if not opts.get("in"):
        raise ConfigError("--in is required")
    try:
        data = json.loads(Path(opts["in"]).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{opts['in']}: not a JSON report ({exc})") from exc
    header, rows = flatten_report(data)
    out = open(opts["csv"], "w", newline="", encoding="utf-8") if opts.get("csv") else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


HANDLERS = {"replay": cmd_replay, "sweep": cmd_sweep, "synth": cmd_synth, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = merged_options(args.command, args)
        return HANDLERS[args.command](opts)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
