"""Fault-detection and transition-selection metrics.

The scalar functions take one ordered selection. The ``*_batch`` helpers and
:class:`TransitionTracker` evaluate many repetitions of the same cycle at once
and must agree with the scalar versions.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import CycleSeries, EffectiveVerdict, TransitionKind, TransitionLabel


def _is_fail(v) -> bool:
    if isinstance(v, EffectiveVerdict):
        return v is EffectiveVerdict.FAIL
    return bool(v)


def napfd(selected: Sequence, total_faults: int) -> float:
    """Normalized APFD of an ordered selection.

    ``selected`` holds verdicts (or fail flags) in execution order; ``total_faults``
    counts failures in the full suite, so unselected failures lower the score.
    """
    n = len(selected)
    if n == 0:
        raise ValueError("napfd of an empty selection")
    if total_faults < 1:
        raise ValueError("napfd needs at least one fault in the full suite")
    ranks = [i for i, v in enumerate(selected, start=1) if _is_fail(v)]
    if not ranks:
        return 0.0
    p = len(ranks) / total_faults
    return p - sum(ranks) / (len(ranks) * n) + p / (2 * n)


def _first_fail(selected: Sequence) -> int | None:
    for i, v in enumerate(selected):
        if _is_fail(v):
            return i
    return None


def nfr(selected: Sequence) -> float:
    """Share of the selection executed before the first failure; 1.0 when none fails."""
    if not selected:
        raise ValueError("nfr of an empty selection")
    first = _first_fail(selected)
    return 1.0 if first is None else first / len(selected)


def nttf(selected: Sequence[tuple], time_budget: float) -> float:
    """Execution time before the first failure over the allotted time budget, clamped to [0, 1]."""
    if time_budget <= 0:
        raise ValueError("time budget must be positive")
    first = _first_fail([v for v, _ in selected])
    if first is None:
        return 1.0
    spent = sum(d for _, d in selected[:first])
    return min(1.0, max(0.0, spent / time_budget))


@dataclass
class CycleEvaluation:
    cycle_id: int
    total_faults: int
    detected: int
    selected_count: int
    napfd: float | None
    nfr: float | None
    nttf: float | None
    miss: bool


def evaluate_cycle(cycle_id: int, selected: Sequence[tuple], total_faults: int, time_budget: float) -> CycleEvaluation:
    """``selected``: (verdict, duration) pairs in execution order."""
    verdicts = [v for v, _ in selected]
    detected = sum(_is_fail(v) for v in verdicts)
    if total_faults < 1:
        return CycleEvaluation(cycle_id, 0, 0, len(selected), None, None, None, False)
    return CycleEvaluation(
        cycle_id, total_faults, detected, len(selected),
        napfd(verdicts, total_faults), nfr(verdicts),
        # zero-length suites take no time to reach their first failure
        nttf(selected, time_budget) if time_budget > 0 else float(detected == 0),
        detected == 0,
    )


def evaluate_batch(fail_ranked: np.ndarray, dur_ranked: np.ndarray, take: np.ndarray,
                   total_faults: int, time_budget: float) -> dict[str, np.ndarray]:
    """Vectorized :func:`evaluate_cycle` over repetitions (rows).

    ``fail_ranked``/``dur_ranked``/``take`` are (R, n) in ranked order; ``take``
    marks the tests kept by budget selection.
    """
    R = take.shape[0]
    count = take.sum(axis=1)
    if total_faults < 1:
        nan = np.full(R, np.nan)
        return {"napfd": nan, "nfr": nan, "nttf": nan, "miss": np.zeros(R, bool), "selected_count": count}
    sel_rank = np.cumsum(take, axis=1)
    hits = fail_ranked & take
    detected = hits.sum(axis=1)
    has = detected > 0
    safe_det = np.where(has, detected, 1)
    p = detected / total_faults
    rank_sum = (sel_rank * hits).sum(axis=1)
    napfd_v = np.where(has, p - rank_sum / (safe_det * count) + p / (2 * count), 0.0)

    first = np.argmax(hits, axis=1)
    rows = np.arange(R)
    before = sel_rank[rows, first] - 1
    nfr_v = np.where(has, before / count, 1.0)
    spent = np.cumsum(np.where(take, dur_ranked, 0.0), axis=1)[rows, first] - dur_ranked[rows, first]
    if time_budget > 0:
        nttf_v = np.where(has, np.clip(spent / time_budget, 0.0, 1.0), 1.0)
    else:
        nttf_v = np.where(has, 0.0, 1.0)
    return {"napfd": napfd_v, "nfr": nfr_v, "nttf": nttf_v, "miss": ~has, "selected_count": count}


def mean_std(values: Iterable[float | None]) -> dict[str, float | None]:
    """Mean and sample standard deviation, skipping undefined entries."""
    arr = np.array([v for v in values if v is not None], dtype=float)
    if arr.size == 0:
        return {"mean": None, "std": None}
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(np.mean(arr)), "std": std}


# ---------------------------------------------------------------------------
# transitions


def transition_recall(decisions: Mapping[int, Iterable[str]],
                      labels: Mapping[tuple[int, str], TransitionLabel],
                      cycles: Iterable[int] | None = None) -> float | None:
    """Percentage of relevant transitions whose target was selected in that cycle.

    ``decisions`` maps cycle_id to the selected targets; ``cycles`` restricts
    which cycles' transitions are counted (default: all labelled cycles).
    Returns None when there is no relevant transition to find.
    """
    allowed = None if cycles is None else set(cycles)
    chosen = {cid: set(targets) for cid, targets in decisions.items()}
    total = hit = 0
    for (cid, target), label in labels.items():
        if label.kind is not TransitionKind.RELEVANT_TRANSITION:
            continue
        if allowed is not None and cid not in allowed:
            continue
        total += 1
        hit += target in chosen.get(cid, ())
    return None if total == 0 else 100.0 * hit / total


@dataclass
class DelayReport:
    histogram: dict[int, float] = field(default_factory=dict)
    undetected: float = 0.0
    total: int = 0

    def within(self, cycles: int) -> float:
        """Share of transitions detected with delay <= ``cycles``."""
        if not self.total:
            return 0.0
        return sum(c for d, c in self.histogram.items() if d <= cycles) / self.total


def detection_delays(decisions: Mapping[int, Iterable[str]],
                     labels: Mapping[tuple[int, str], TransitionLabel],
                     series: CycleSeries,
                     cycles: Iterable[int] | None = None) -> DelayReport:
    """Cycles until each relevant transition is observed.

    A transition of target g at cycle position t is detected at the first
    position t+d where g is selected and its verdict differs from g's last
    executed verdict (a first-ever execution also counts). Cycles missing from
    ``decisions`` are treated as selecting nothing.
    """
    allowed = None if cycles is None else set(cycles)
    chosen = {cid: set(targets) for cid, targets in decisions.items()}
    last: dict[str, EffectiveVerdict] = {}
    open_: dict[str, list[int]] = defaultdict(list)
    report = DelayReport()
    for pos, cycle in enumerate(series):
        selected = chosen.get(cycle.cycle_id, set())
        for rec in cycle.executed():
            label = labels.get((cycle.cycle_id, rec.target))
            if (label is not None and label.kind is TransitionKind.RELEVANT_TRANSITION
                    and (allowed is None or cycle.cycle_id in allowed)):
                open_[rec.target].append(pos)
                report.total += 1
            if rec.target not in selected:
                continue
            if last.get(rec.target) != rec.verdict:
                for start in open_.pop(rec.target, []):
                    report.histogram[pos - start] = report.histogram.get(pos - start, 0) + 1
            last[rec.target] = rec.verdict
    report.undetected = sum(len(v) for v in open_.values())
    report.histogram = dict(sorted(report.histogram.items()))
    return report


class TransitionTracker:
    """Batched transition recall and detection delays over R repetitions.

    ``starts`` maps a target id to the sorted cycle positions of its relevant
    transitions that should be counted.
    """

    def __init__(self, repetitions: int, starts: Mapping[int, Sequence[int]]):
        self.R = repetitions
        self.starts = {g: np.asarray(sorted(s), dtype=int) for g, s in starts.items() if len(s)}
        self.ptr = {g: np.zeros(repetitions, dtype=int) for g in self.starts}
        self.total = int(sum(s.size for s in self.starts.values()))
        self.hit = np.zeros(repetitions)
        self.hist: dict[int, float] = defaultdict(float)

    def observe(self, pos: int, gids: np.ndarray, selected: np.ndarray, verdicts: np.ndarray,
                last: np.ndarray) -> None:
        """``selected``/``last`` are (R, n) for the cycle's suite; ``last`` uses -1 for never executed."""
        for j, g in enumerate(gids):
            st = self.starts.get(int(g))
            if st is None:
                continue
            upto = int(np.searchsorted(st, pos, side="right"))
            if upto == 0:
                continue
            sel = selected[:, j]
            if st[upto - 1] == pos:
                self.hit += sel
            p = self.ptr[int(g)]
            active = sel & (last[:, j] != verdicts[j]) & (p < upto)
            if not active.any():
                continue
            for idx in range(int(p[active].min()), upto):
                c = int(np.count_nonzero(active & (p <= idx)))
                if c:
                    self.hist[pos - int(st[idx])] += c
            p[active] = upto

    def merge(self, other: "TransitionTracker") -> None:
        self.hit = np.concatenate([self.hit, other.hit])
        for d, c in other.hist.items():
            self.hist[d] += c
        for g in self.ptr:
            self.ptr[g] = np.concatenate([self.ptr[g], other.ptr[g]])
        self.R += other.R

    def recall_pct(self) -> float | None:
        return None if self.total == 0 else 100.0 * float(self.hit.mean()) / self.total

    def delays(self) -> DelayReport:
        resolved = sum(p.astype(float) for p in self.ptr.values()) if self.ptr else np.zeros(self.R)
        undetected = self.total - float(np.mean(resolved))
        hist = {d: c / self.R for d, c in sorted(self.hist.items())}
        return DelayReport(hist, undetected, self.total)
