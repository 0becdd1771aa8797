"""Per-test reward functions for pre-submit (fail-fast) and post-submit (transition) pipelines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .dataset import EffectiveVerdict, TransitionKind


class UnresolvedLabel(RuntimeError):
    """A transition-based reward was requested before the label could be resolved."""


@dataclass(frozen=True)
class ScheduledOutcome:
    target: str
    rank: int  # 1-based, among executed tests
    verdict: EffectiveVerdict
    duration: float  # ms
    prefix_cost: float  # ms spent on earlier-ranked executed tests
    suite_cost: float  # ms for the whole scheduled suite
    transition: TransitionKind | None = None  # None until resolved
    normalized_duration: float = 0.0  # duration / max duration in the suite

    def __post_init__(self):
        if self.prefix_cost > self.suite_cost + 1e-9:
            raise ValueError("prefix_cost exceeds suite_cost")
        if not 0.0 <= self.normalized_duration <= 1.0:
            raise ValueError("normalized_duration must lie in [0, 1]")


def _require_executed(o: ScheduledOutcome) -> None:
    if o.verdict is EffectiveVerdict.IGNORED:
        raise ValueError(f"{o.target}: ignored executions carry no reward")


def cost_rank(o: ScheduledOutcome, alpha: float = 0.9) -> float:
    """Failing tests earn 1 minus the alpha-weighted share of suite time spent before them;
    passing tests get the mirror-image penalty."""
    _require_executed(o)
    ratio = o.prefix_cost / o.suite_cost if o.suite_cost > 0 else 0.0
    if o.verdict is EffectiveVerdict.FAIL:
        return 1.0 - alpha * ratio
    return -1.0 + alpha * ratio


def rn_fail(o: ScheduledOutcome) -> float:
    _require_executed(o)
    return 1.0 if o.verdict is EffectiveVerdict.FAIL else 0.0


def _label(o: ScheduledOutcome) -> TransitionKind:
    if o.transition is None:
        raise UnresolvedLabel(f"{o.target}: transition label not resolved yet")
    return o.transition


def cost_change_rank(o: ScheduledOutcome) -> float:
    label = _label(o)
    if label is TransitionKind.FLAKY_TRANSITION:
        return -1.0
    if label is TransitionKind.RELEVANT_TRANSITION:
        return 1.0
    return -o.normalized_duration


def rn_change(o: ScheduledOutcome) -> float:
    label = _label(o)
    if label is TransitionKind.FLAKY_TRANSITION:
        return -1.0
    if label is TransitionKind.RELEVANT_TRANSITION:
        return 1.0
    return 0.0


REWARDS: dict[str, Callable[[ScheduledOutcome], float]] = {
    "costrank": cost_rank,
    "rnfail": rn_fail,
    "costchangerank": cost_change_rank,
    "rnchange": rn_change,
}
# rewards that need the transition label (and therefore deferred resolution)
TRANSITION_REWARDS = frozenset({"costchangerank", "rnchange"})
PIPELINE_REWARDS = {
    "pre_submit": frozenset({"costrank", "rnfail"}),
    "post_submit": frozenset({"costchangerank", "rnchange"}),
}
DEFAULT_REWARD = {"pre_submit": "costrank", "post_submit": "costchangerank"}


def get_reward(name: str) -> Callable[[ScheduledOutcome], float]:
    try:
        return REWARDS[name]
    except KeyError:
        raise ValueError(f"unknown reward {name!r}; expected one of {', '.join(REWARDS)}") from None
