"""Non-learning comparison policies."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .dataset import EffectiveVerdict

ROCKET_WEIGHTS = (0.7, 0.2, 0.1)  # newest first


def random_prioritize(targets: Sequence[str], rng: np.random.Generator) -> list[str]:
    """Uniformly random order (numpy's Fisher-Yates shuffle)."""
    return [targets[i] for i in rng.permutation(len(targets))]


def rocket_priority(verdicts: Sequence[EffectiveVerdict], weights: Sequence[float] = ROCKET_WEIGHTS) -> float:
    """Recency-weighted failure count over the last ``len(weights)`` executions.

    ``verdicts`` is oldest-first; missing executions count as passes.
    """
    recent = list(verdicts)[::-1][: len(weights)]
    return math.fsum(w for w, v in zip(weights, recent) if v is EffectiveVerdict.FAIL)


def rocket_prioritize(histories: Mapping[str, Sequence[EffectiveVerdict]]) -> list[str]:
    """Highest priority first; ties go to the lexicographically smaller name."""
    scored = [(-rocket_priority(v), name) for name, v in histories.items()]
    return [name for _, name in sorted(scored)]
