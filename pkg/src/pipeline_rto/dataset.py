"""CI execution logs: data model, CSV loading, cycle filtering, transition labels
and synthetic scenario generation."""

from __future__ import annotations

import csv
import enum
import io
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .kvconfig import ConfigError, dataclass_from_mapping, parse_kv_file

CSV_HEADER = ("cycle_id", "target", "status", "duration_ms")
PIPELINES = ("pre_submit", "post_submit")


class DatasetError(ValueError):
    """Malformed or inconsistent execution log."""


class RawStatus(str, enum.Enum):
    PASSED = "PASSED"
    FAILED = "FAILED"
    FLAKY = "FLAKY"
    TIMEOUT = "TIMEOUT"
    NO_STATUS = "NO_STATUS"
    FAILED_TO_BUILD = "FAILED_TO_BUILD"


class EffectiveVerdict(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    IGNORED = "IGNORED"


class TransitionKind(str, enum.Enum):
    NONE = "NONE"
    RELEVANT_TRANSITION = "RELEVANT_TRANSITION"
    FLAKY_TRANSITION = "FLAKY_TRANSITION"


_VERDICTS = {
    RawStatus.PASSED: EffectiveVerdict.PASS,
    RawStatus.FLAKY: EffectiveVerdict.PASS,
    RawStatus.FAILED: EffectiveVerdict.FAIL,
    RawStatus.TIMEOUT: EffectiveVerdict.IGNORED,
    RawStatus.NO_STATUS: EffectiveVerdict.IGNORED,
    RawStatus.FAILED_TO_BUILD: EffectiveVerdict.IGNORED,
}


def effective_verdict(status: RawStatus) -> EffectiveVerdict:
    """FLAKY counts as a pass (it passed on rerun); statuses without an outcome are ignored."""
    return _VERDICTS[RawStatus(status)]


@dataclass(frozen=True)
class ExecutionRecord:
    cycle_id: int
    target: str
    status: RawStatus
    duration: int  # ms

    @property
    def verdict(self) -> EffectiveVerdict:
        return _VERDICTS[self.status]


@dataclass(frozen=True)
class Cycle:
    cycle_id: int
    records: tuple[ExecutionRecord, ...]

    def executed(self) -> tuple[ExecutionRecord, ...]:
        """Records with a PASS/FAIL verdict, in recorded order."""
        return tuple(r for r in self.records if r.verdict is not EffectiveVerdict.IGNORED)


@dataclass(frozen=True)
class CycleSeries:
    cycles: tuple[Cycle, ...]
    pipeline: str = "pre_submit"

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise DatasetError(f"unknown pipeline {self.pipeline!r}")
        ids = [c.cycle_id for c in self.cycles]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise DatasetError("cycle ids must be strictly increasing")
        if any(not c.records for c in self.cycles):
            raise DatasetError("empty cycle")

    def __len__(self) -> int:
        return len(self.cycles)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return CycleSeries(self.cycles[item], self.pipeline)
        return self.cycles[item]

    def __iter__(self):
        return iter(self.cycles)

    def records(self) -> Iterable[ExecutionRecord]:
        for cycle in self.cycles:
            yield from cycle.records

    def target_names(self) -> list[str]:
        """Distinct targets in first-seen order."""
        return list(dict.fromkeys(r.target for r in self.records()))


@dataclass(frozen=True)
class TransitionLabel:
    kind: TransitionKind
    # set when fewer than flaky_window later executions existed to confirm the label
    tail: bool = False


# ---------------------------------------------------------------------------
# CSV I/O


def _parse_status(text: str) -> RawStatus:
    return RawStatus(text.strip().upper().replace(" ", "_"))


def load_dataset(path: str | Path, pipeline: str = "pre_submit") -> CycleSeries:
    """Load a ``cycle_id,target,status,duration_ms`` CSV into a validated CycleSeries."""
    with open(path, newline="", encoding="utf-8") as fh:
        return _read_rows(fh, pipeline, str(path))


def loads_dataset(text: str, pipeline: str = "pre_submit") -> CycleSeries:
    return _read_rows(io.StringIO(text), pipeline, "<string>")


def _read_rows(fh, pipeline: str, source: str) -> CycleSeries:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise DatasetError(f"{source}:1: expected header {','.join(CSV_HEADER)}")
    by_cycle: dict[int, list[ExecutionRecord]] = defaultdict(list)
    seen: set[tuple[int, str]] = set()
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise DatasetError(f"{source}:{line}: expected 4 fields, got {len(row)}")
        cycle_s, target, status_s, duration_s = (c.strip() for c in row)
        try:
            cycle_id = int(cycle_s)
            duration = int(duration_s)
        except ValueError:
            raise DatasetError(f"{source}:{line}: cycle_id and duration_ms must be integers") from None
        if cycle_id < 0 or duration < 0:
            raise DatasetError(f"{source}:{line}: negative cycle_id or duration_ms")
        if not target:
            raise DatasetError(f"{source}:{line}: empty target name")
        try:
            status = _parse_status(status_s)
        except ValueError:
            raise DatasetError(f"{source}:{line}: unknown status {status_s!r}") from None
        key = (cycle_id, target)
        if key in seen:
            raise DatasetError(f"{source}:{line}: duplicate record for cycle {cycle_id}, target {target}")
        seen.add(key)
        by_cycle[cycle_id].append(ExecutionRecord(cycle_id, target, status, duration))
    cycles = tuple(Cycle(cid, tuple(recs)) for cid, recs in sorted(by_cycle.items()))
    return CycleSeries(cycles, pipeline)


def dump_dataset(series: CycleSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in series.records():
        writer.writerow((rec.cycle_id, rec.target, rec.status.value, rec.duration))
    return buf.getvalue()


def write_dataset(series: CycleSeries, path: str | Path) -> None:
    Path(path).write_text(dump_dataset(series), encoding="utf-8")


# ---------------------------------------------------------------------------
# filtering and labelling


def filter_cycles(series: CycleSeries, min_targets: int = 6, require_failure: bool = True) -> CycleSeries:
    kept = []
    for cycle in series:
        executed = cycle.executed()
        if len(executed) < min_targets:
            continue
        if require_failure and not any(r.verdict is EffectiveVerdict.FAIL for r in executed):
            continue
        kept.append(cycle)
    return CycleSeries(tuple(kept), series.pipeline)


def label_sequence(verdicts: list[EffectiveVerdict], flaky_window: int = 3) -> list[TransitionLabel]:
    """Label one target's chronological PASS/FAIL sequence.

    A verdict change is flaky when any of the next ``flaky_window`` executions
    switches back; otherwise it is relevant (tail-flagged when the window is cut
    short by the end of the data).
    """
    labels = []
    for i, v in enumerate(verdicts):
        if i == 0 or v == verdicts[i - 1]:
            labels.append(TransitionLabel(TransitionKind.NONE))
            continue
        window = verdicts[i + 1 : i + 1 + flaky_window]
        if any(w != v for w in window):
            labels.append(TransitionLabel(TransitionKind.FLAKY_TRANSITION))
        else:
            labels.append(TransitionLabel(TransitionKind.RELEVANT_TRANSITION, tail=len(window) < flaky_window))
    return labels


def label_transitions(series: CycleSeries, flaky_window: int = 3) -> dict[tuple[int, str], TransitionLabel]:
    """Map every non-ignored (cycle_id, target) record to its transition label."""
    per_target: dict[str, list[ExecutionRecord]] = defaultdict(list)
    for rec in series.records():
        if rec.verdict is not EffectiveVerdict.IGNORED:
            per_target[rec.target].append(rec)
    out: dict[tuple[int, str], TransitionLabel] = {}
    for target, recs in per_target.items():
        for rec, label in zip(recs, label_sequence([r.verdict for r in recs], flaky_window)):
            out[(rec.cycle_id, target)] = label
    return out


# ---------------------------------------------------------------------------
# synthetic scenarios

SCENARIOS = ("deterministic_failures", "random_noise", "flaky_mix", "transition_churn")
_KINDS = ("unit", "integration", "system")


@dataclass
class ScenarioSpec:
    scenario: str = "deterministic_failures"
    cycles: int = 100
    targets: int = 20
    seed: int = 0
    pipeline: str = "pre_submit"
    # deterministic_failures
    always_fail: int = 2
    warmup_cycles: int = 0
    # random_noise / flaky_mix
    failure_prob: float = 0.05
    flaky_fraction: float = 0.2
    flaky_fail_prob: float = 0.3
    flaky_status_prob: float = 0.1
    # transition_churn
    transition_rate: float = 0.1
    churn_fraction: float = 0.3
    blip_rate: float | None = None
    hold: int = 4
    initial_fail_prob: float = 0.5
    # all scenarios
    ignored_prob: float = 0.0
    duration_mu: float = 9.0
    duration_sigma: float = 1.0
    jitter_sigma: float = 0.1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {', '.join(SCENARIOS)}")
        if self.cycles <= 0 or self.targets <= 0:
            raise ConfigError("cycles and targets must be positive")
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"unknown pipeline {self.pipeline!r}")
        if self.scenario == "deterministic_failures" and not 0 <= self.always_fail <= self.targets:
            raise ConfigError("always_fail must lie in [0, targets]")
        for name in ("failure_prob", "flaky_fraction", "flaky_fail_prob", "transition_rate",
                     "churn_fraction", "initial_fail_prob", "ignored_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "ScenarioSpec":
        return dataclass_from_mapping(cls, values)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ScenarioSpec":
        values: dict[str, object] = dict(parse_kv_file(path))
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)


def target_name(index: int) -> str:
    component = "component" + chr(ord("A") + (index // 5) % 26)
    return f"//app/{component}/feature{index}:{_KINDS[index % 3]}_tests"


def always_fail_indices(targets: int, count: int) -> list[int]:
    """Evenly spread, seed-independent indices of the always-failing targets."""
    return sorted({(2 * j + 1) * targets // (2 * count) for j in range(count)}) if count else []


def churn_indices(targets: int, fraction: float) -> list[int]:
    return list(range(int(round(fraction * targets))))


def generate_synthetic(spec: ScenarioSpec) -> CycleSeries:
    """Generate a reproducible CycleSeries for ``spec`` (all randomness from ``spec.seed``)."""
    rng = np.random.default_rng(spec.seed)
    n = spec.targets
    names = [target_name(i) for i in range(n)]
    base = np.exp(spec.duration_mu + spec.duration_sigma * rng.standard_normal(n))

    fail_set = set(always_fail_indices(n, spec.always_fail))
    churn = set(churn_indices(n, spec.churn_fraction))
    flaky = set(range(n - int(round(spec.flaky_fraction * n)), n))
    blip_rate = spec.transition_rate / 4 if spec.blip_rate is None else spec.blip_rate
    state = rng.random(n) < spec.initial_fail_prob  # True = failing (transition_churn only)
    run_len = np.zeros(n, dtype=int)

    cycles = []
    for t in range(spec.cycles):
        u = rng.random((n, 4))
        jitter = np.exp(spec.jitter_sigma * rng.standard_normal(n))
        records = []
        for i in range(n):
            if spec.scenario == "deterministic_failures":
                status = RawStatus.FAILED if (i in fail_set and t >= spec.warmup_cycles) else RawStatus.PASSED
            elif spec.scenario == "random_noise":
                status = RawStatus.FAILED if u[i, 0] < spec.failure_prob else RawStatus.PASSED
            elif spec.scenario == "flaky_mix":
                if i in flaky:
                    if u[i, 0] < spec.flaky_fail_prob:
                        status = RawStatus.FAILED
                    elif u[i, 0] < spec.flaky_fail_prob + spec.flaky_status_prob:
                        status = RawStatus.FLAKY
                    else:
                        status = RawStatus.PASSED
                else:
                    status = RawStatus.FAILED if u[i, 0] < spec.failure_prob else RawStatus.PASSED
            else:
                if t > 0 and i in churn and run_len[i] >= spec.hold and u[i, 0] < spec.transition_rate:
                    state[i] = not state[i]
                    run_len[i] = 0
                failing = bool(state[i])
                if t > 0 and u[i, 1] < blip_rate:
                    failing = not failing
                run_len[i] += 1
                status = RawStatus.FAILED if failing else RawStatus.PASSED
            duration = int(round(base[i] * jitter[i]))
            if u[i, 2] < spec.ignored_prob:
                status = RawStatus.TIMEOUT if u[i, 3] < 0.5 else (
                    RawStatus.NO_STATUS if spec.pipeline == "post_submit" else RawStatus.FAILED_TO_BUILD)
                if status is not RawStatus.TIMEOUT:
                    duration = 0
            records.append(ExecutionRecord(t, names[i], status, max(duration, 0)))
        cycles.append(Cycle(t, tuple(records)))
    return CycleSeries(tuple(cycles), spec.pipeline)


def verdict_changes(series: CycleSeries) -> int:
    """Count executions whose verdict differs from the target's previous executed verdict."""
    last: dict[str, EffectiveVerdict] = {}
    changes = 0
    for rec in series.records():
        v = rec.verdict
        if v is EffectiveVerdict.IGNORED:
            continue
        if rec.target in last and last[rec.target] != v:
            changes += 1
        last[rec.target] = v
    return changes


__all__ = [
    "CSV_HEADER", "Cycle", "CycleSeries", "DatasetError", "EffectiveVerdict", "ExecutionRecord",
    "RawStatus", "ScenarioSpec", "TransitionKind", "TransitionLabel", "always_fail_indices",
    "churn_indices", "dump_dataset", "effective_verdict", "filter_cycles", "generate_synthetic",
    "label_sequence", "label_transitions", "load_dataset", "loads_dataset", "target_name",
    "verdict_changes", "write_dataset",
]
