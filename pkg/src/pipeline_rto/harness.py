"""Chronological CI replay: features, policy ranking, budgeted selection, reward
routing, agent training and metric collection.

One replay is strictly sequential. Policies that are evaluated over many
repetitions (RANDOM) run all repetitions side by side as rows of numpy arrays;
the learning agent and ROCKET use a single repetition.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .agent import AgentConfig, DQNAgent, Experience, forward_batch
from .baselines import ROCKET_WEIGHTS
from .dataset import (
    PIPELINES, CycleSeries, EffectiveVerdict, TransitionKind, label_transitions,
)
from .features import FeaturePipeline, TestHistory, duration_percentile
from .kvconfig import ConfigError
from .metrics import TransitionTracker, evaluate_batch, mean_std
from .rewards import (
    DEFAULT_REWARD, PIPELINE_REWARDS, REWARDS, TRANSITION_REWARDS, ScheduledOutcome, cost_rank,
)
from .seeding import rng_for

log = logging.getLogger(__name__)

POLICIES = ("dqn", "random", "rocket")
REPORT_VERSION = 1
_CHUNK = 2000  # repetitions evaluated together
_FIT_TOL = 1e-9


@dataclass
class ReplayConfig:
    pipeline: str = "pre_submit"
    policy: str = "dqn"
    reward: str | None = None  # None -> pipeline default
    budget: float = 1.0
    seed: int = 0
    warm_start: int | None = None  # None -> enough cycles to fill the replay buffer
    k: int = 25
    pca_dim: int = 16
    horizon: float = 100.0
    flaky_window: int = 3
    random_repetitions: int = 10000
    alpha: float = 0.9
    force: bool = False
    also_full_rank: bool = False
    frozen: bool = False
    instrument: bool = False
    agent: AgentConfig = field(default_factory=AgentConfig)

    @property
    def reward_name(self) -> str:
        return self.reward or DEFAULT_REWARD[self.pipeline]

    def validate(self) -> "ReplayConfig":
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"unknown pipeline {self.pipeline!r}")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; expected one of {', '.join(POLICIES)}")
        if self.reward_name not in REWARDS:
            raise ConfigError(f"unknown reward {self.reward_name!r}; expected one of {', '.join(REWARDS)}")
        if not 0.0 < self.budget <= 1.0:
            raise ConfigError("budget must lie in (0, 1]")
        if self.reward_name not in PIPELINE_REWARDS[self.pipeline] and not self.force:
            raise ConfigError(f"reward {self.reward_name!r} does not fit the {self.pipeline} pipeline "
                              "(pass force to override)")
        if self.random_repetitions < 1 or self.flaky_window < 1 or self.k < 0 or self.pca_dim < 0:
            raise ConfigError("random_repetitions and flaky_window must be >= 1; k and pca_dim >= 0")
        if self.warm_start is not None and self.warm_start < 0:
            raise ConfigError("warm_start must be >= 0")
        if self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        return self

    def echo(self) -> dict:
        out = asdict(self)
        out["reward"] = self.reward_name
        out["agent"]["hidden"] = list(self.agent.hidden)
        return out


@dataclass(frozen=True)
class Selection:
    targets: tuple[str, ...]
    estimated_cost: float
    cap: float


def _estimates(ranked: Sequence[str], est_durations: Mapping[str, float]) -> list[float]:
    known = [est_durations[t] for t in ranked if t in est_durations]
    fallback = float(np.median(known)) if known else 1.0
    return [float(est_durations.get(t, fallback)) for t in ranked]


def select_under_budget(ranked: Sequence[str], est_durations: Mapping[str, float], budget_fraction: float,
                        full_suite_est: float | None = None) -> Selection:
    """Walk the ranking, keeping each target whose estimate still fits under the cap.

    Targets that would overflow are skipped and the walk continues. The top-ranked
    target is always kept. Unseen targets are estimated by the suite median.
    """
    if not ranked:
        raise ValueError("cannot select from an empty ranking")
    est = _estimates(ranked, est_durations)
    total = sum(est) if full_suite_est is None else full_suite_est
    cap = budget_fraction * total
    slack = _FIT_TOL * max(cap, 1.0)
    chosen, used = [ranked[0]], est[0]
    for target, cost in zip(ranked[1:], est[1:]):
        if used + cost <= cap + slack:
            chosen.append(target)
            used += cost
    return Selection(tuple(chosen), used, cap)


def _select_batch(est_ranked: np.ndarray, cap: np.ndarray) -> np.ndarray:
    """Row-wise :func:`select_under_budget` on ranked estimate rows."""
    R, n = est_ranked.shape
    take = np.zeros((R, n), dtype=bool)
    take[:, 0] = True
    used = est_ranked[:, 0].copy()
    limit = cap + _FIT_TOL * np.maximum(cap, 1.0)
    for j in range(1, n):
        fits = used + est_ranked[:, j] <= limit
        take[:, j] = fits
        used += np.where(fits, est_ranked[:, j], 0.0)
    return take


# ---------------------------------------------------------------------------
# replay data


@dataclass
class _Suite:
    pos: int
    cycle_id: int
    names: list[str]
    gids: np.ndarray
    fail: np.ndarray  # bool
    durations: np.ndarray  # actual ms
    relevant: np.ndarray  # ground-truth relevant transition at this record
    kinds: list[TransitionKind]  # logged transition label per record
    due: np.ndarray  # position at which each record's label is settled
    capped: np.ndarray  # label settled by the expiry or end-of-log rule

    @property
    def verdicts(self) -> np.ndarray:
        return self.fail.astype(np.int8)


def _label_due(series: CycleSeries, flaky_window: int) -> dict[tuple[int, str], tuple[int, bool]]:
    """When each record's transition label becomes known during replay.

    A label needs the target's next ``flaky_window`` executions; it is settled at
    the position of the last of those, or after ``3 * flaky_window`` cycles (or
    at the end of the log) if they do not arrive in time.
    """
    positions: dict[str, list[int]] = {}
    keys = []
    for pos, cycle in enumerate(series):
        for r in cycle.executed():
            positions.setdefault(r.target, []).append(pos)
            keys.append((pos, cycle.cycle_id, r.target, len(positions[r.target]) - 1))
    last = len(series) - 1
    limit = 3 * flaky_window
    out = {}
    for pos, cid, target, idx in keys:
        runs = positions[target]
        ahead = idx + flaky_window
        if ahead < len(runs) and runs[ahead] - pos <= limit:
            out[(cid, target)] = (runs[ahead], False)
        else:
            out[(cid, target)] = (min(pos + limit, last), True)
    return out


def _prepare(series: CycleSeries, flaky_window: int):
    names = sorted({r.target for r in series.records() if r.verdict is not EffectiveVerdict.IGNORED})
    gid = {n: i for i, n in enumerate(names)}
    labels = label_transitions(series, flaky_window)
    due = _label_due(series, flaky_window)
    suites = []
    for pos, cycle in enumerate(series):
        recs = cycle.executed()
        kinds = [labels[(cycle.cycle_id, r.target)].kind for r in recs]
        # a record with no verdict change needs no lookahead
        settle = [(pos, False) if k is TransitionKind.NONE else due[(cycle.cycle_id, r.target)]
                  for k, r in zip(kinds, recs)]
        suites.append(_Suite(
            pos, cycle.cycle_id, [r.target for r in recs],
            np.array([gid[r.target] for r in recs], dtype=int),
            np.array([r.verdict is EffectiveVerdict.FAIL for r in recs], dtype=bool),
            np.array([r.duration for r in recs], dtype=float),
            np.array([k is TransitionKind.RELEVANT_TRANSITION for k in kinds], dtype=bool),
            kinds,
            np.array([d for d, _ in settle], dtype=int),
            np.array([c for _, c in settle], dtype=bool),
        ))
    return names, labels, suites


class _Trajectories:
    """What each repetition has observed so far: last verdict and duration totals per target."""

    def __init__(self, R: int, G: int):
        self.last = np.full((R, G), -1, dtype=np.int8)
        self.dsum = np.zeros((R, G))
        self.dcnt = np.zeros((R, G), dtype=np.int64)

    def estimates(self, gids: np.ndarray) -> np.ndarray:
        cnt = self.dcnt[:, gids]
        est = np.where(cnt > 0, self.dsum[:, gids] / np.maximum(cnt, 1), np.nan)
        known = cnt > 0
        if known.all():
            return est
        med = np.ones(est.shape[0])
        some = known.any(axis=1)
        if some.any():
            med[some] = np.nanmedian(est[some], axis=1)
        return np.where(known, est, med[:, None])

    def reveal(self, s: _Suite, selected: np.ndarray) -> None:
        rows, cols = np.nonzero(selected)
        g = s.gids[cols]
        self.last[rows, g] = s.verdicts[cols]
        self.dsum[rows, g] += s.durations[cols]
        self.dcnt[rows, g] += 1


# ---------------------------------------------------------------------------
# policies


def _outcomes(s: _Suite, executed: Sequence[int]) -> list[ScheduledOutcome]:
    """Outcomes for suite-local indices ``executed`` in execution order."""
    durs = s.durations[list(executed)]
    total = float(durs.sum())
    top = float(durs.max()) if len(durs) else 0.0
    out, prefix = [], 0.0
    for rank, (j, d) in enumerate(zip(executed, durs), start=1):
        out.append(ScheduledOutcome(
            s.names[j], rank, EffectiveVerdict.FAIL if s.fail[j] else EffectiveVerdict.PASS,
            float(d), prefix, total, None, float(d) / top if top > 0 else 0.0))
        prefix += float(d)
    return out


class RandomPolicy:
    def __init__(self, repetitions: int, rng: np.random.Generator):
        self.repetitions = repetitions
        self.rng = rng

    def warm(self, s: _Suite) -> None:
        pass

    def order(self, s: _Suite) -> np.ndarray:
        base = np.tile(np.arange(len(s.names)), (self.repetitions, 1))
        return self.rng.permuted(base, axis=1)

    def observe(self, s: _Suite, order: np.ndarray, take: np.ndarray) -> None:
        pass

    def digest(self) -> str:
        return ""


class RocketPolicy:
    repetitions = 1

    def __init__(self, name_rank: np.ndarray):
        self.name_rank = name_rank
        self.recent: dict[int, list[bool]] = {}

    def _reveal(self, s: _Suite, idx) -> None:
        for j in idx:
            hist = self.recent.setdefault(int(s.gids[j]), [])
            hist.insert(0, bool(s.fail[j]))
            del hist[len(ROCKET_WEIGHTS):]

    def warm(self, s: _Suite) -> None:
        self._reveal(s, range(len(s.names)))

    def order(self, s: _Suite) -> np.ndarray:
        prio = np.array([math.fsum(w for w, f in zip(ROCKET_WEIGHTS, self.recent.get(int(g), ())) if f)
                         for g in s.gids])
        return np.lexsort((self.name_rank[s.gids], -prio))[None, :]

    def observe(self, s: _Suite, order: np.ndarray, take: np.ndarray) -> None:
        self._reveal(s, order[0][take[0]])

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(sorted(self.recent.items())).encode()).hexdigest()


@dataclass
class PendingReward:
    state: np.ndarray
    score: float
    outcome: ScheduledOutcome
    due: int
    capped: bool = False


class DQNPolicy:
    repetitions = 1

    def __init__(self, config: ReplayConfig, name_rank: np.ndarray, features: FeaturePipeline, agent: DQNAgent):
        self.config = config
        self.name_rank = name_rank
        self.features = features
        self.agent = agent
        self.reward_fn = REWARDS[config.reward_name]
        if config.reward_name == "costrank":
            self.reward_fn = lambda o: cost_rank(o, config.alpha)
        self.deferred = config.reward_name in TRANSITION_REWARDS
        self.histories: dict[str, TestHistory] = {}
        self.pending: list[PendingReward] = []
        self.losses: list[float] = []
        self.tail_resolved = 0
        self._X = None
        self._scores = None

    def _history(self, name: str) -> TestHistory:
        h = self.histories.get(name)
        if h is None:
            h = self.histories[name] = TestHistory(name)
        return h

    def _features(self, s: _Suite) -> np.ndarray:
        scale = duration_percentile(self.histories.values())
        return np.stack([self.features.build(self._history(n), s.pos, scale) for n in s.names])

    def _push(self, state, score, outcome) -> None:
        self.agent.push(Experience(state, float(score), float(self.reward_fn(outcome))))

    def _flush(self, pos: int) -> None:
        keep = []
        for p in self.pending:
            if p.due <= pos:
                self.tail_resolved += p.capped
                self._push(p.state, p.score, p.outcome)
            else:
                keep.append(p)
        self.pending = keep

    def _execute(self, s: _Suite, executed: Sequence[int], X: np.ndarray, scores: np.ndarray) -> None:
        for j, outcome in zip(executed, _outcomes(s, executed)):
            if not self.config.frozen:
                if not self.deferred:
                    self._push(X[j], scores[j], outcome)
                else:
                    outcome = replace(outcome, transition=s.kinds[j])
                    self.pending.append(PendingReward(X[j], float(scores[j]), outcome,
                                                      int(s.due[j]), bool(s.capped[j])))
            self._history(s.names[j]).record(s.pos, outcome.verdict, s.durations[j])
        if self.deferred:
            self._flush(s.pos)

    def warm(self, s: _Suite) -> None:
        X = self._features(s)
        scores = forward_batch(self.agent.params, X)
        self._execute(s, list(range(len(s.names))), X, scores)

    def order(self, s: _Suite) -> np.ndarray:
        self._X = self._features(s)
        self._scores = self.agent.score_suite(self._X, explore=not self.config.frozen)
        return np.lexsort((self.name_rank[s.gids], -self._scores))[None, :]

    def observe(self, s: _Suite, order: np.ndarray, take: np.ndarray) -> None:
        executed = [int(j) for j in order[0][take[0]]]
        self._execute(s, executed, self._X, self._scores)
        if self.config.frozen:
            return
        if self.agent.buffer.is_full:
            self.losses.extend(self.agent.train_from_buffer(len(executed)))
        self.agent.exploration.step()

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.histories):
            hist = self.histories[name]
            h.update(name.encode())
            h.update(json.dumps([(c, v.value, d) for c, v, d in hist.runs]).encode())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# report


@dataclass
class ReplayReport:
    config: dict
    per_cycle: list[dict]
    aggregates: dict
    transitions: dict
    misses: dict
    trace: dict
    instrumentation: list[dict] | None = None
    agent: DQNAgent | None = field(default=None, repr=False, compare=False)
    features: FeaturePipeline | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        out = {
            "version": REPORT_VERSION,
            "config": self.config,
            "per_cycle": self.per_cycle,
            "aggregates": self.aggregates,
            "transitions": self.transitions,
            "misses": self.misses,
            "trace": self.trace,
        }
        if self.instrumentation is not None:
            out["instrumentation"] = self.instrumentation
        return out

    def to_json(self) -> str:
        return json.dumps(json_safe(self.to_dict()), sort_keys=True, indent=1) + "\n"


def json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) else v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _num(x: float, integral: bool = False):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return int(round(x)) if integral else float(x)


# ---------------------------------------------------------------------------
# replay


def warm_start_cycles(config: ReplayConfig, series: CycleSeries) -> int:
    """Leading cycles executed in full before the policy decides anything."""
    if config.warm_start is not None:
        return min(config.warm_start, len(series))
    if not len(series):
        return 0
    mean_suite = max(1.0, np.mean([len(c.executed()) for c in series]))
    need = math.ceil(config.agent.buffer_capacity / mean_suite)
    return min(max(10, need), len(series) // 2)


def save_checkpoint(report: ReplayReport, path: str | Path) -> None:
    if report.agent is None or report.features is None:
        raise ValueError("only learning-agent replays produce a checkpoint")
    data = report.agent.to_checkpoint()
    data["features"] = report.features.to_dict()
    Path(path).write_text(json.dumps(data, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[DQNAgent, FeaturePipeline]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return DQNAgent.from_checkpoint(data), FeaturePipeline.from_dict(data["features"])


def _make_policy(config, name_rank, warm_names, resume, repetitions, chunk):
    if config.policy == "random":
        return RandomPolicy(repetitions, rng_for(config.seed, "random-policy", chunk))
    if config.policy == "rocket":
        return RocketPolicy(name_rank)
    if resume is not None:
        agent, features = resume
    else:
        features = FeaturePipeline.fit(warm_names, config.k, config.pca_dim, config.horizon)
        agent = DQNAgent(features.dim, config.agent, config.seed)
    return DQNPolicy(config, name_rank, features, agent)


def run_replay(config: ReplayConfig, series: CycleSeries,
               resume: tuple[DQNAgent, FeaturePipeline] | None = None) -> ReplayReport:
    """Replay ``series`` under ``config`` and return per-cycle and aggregate metrics.

    The policy sees only verdicts of targets it selected; the evaluator reads the
    full ground truth of each cycle. ``resume`` continues from a saved agent.
    """
    config.validate()
    names, labels, suites = _prepare(series, config.flaky_window)
    name_rank = np.arange(len(names))  # names are sorted, so id order is name order
    warm = warm_start_cycles(config, series)
    eval_suites = suites[warm:]
    warm_names = [n for s in suites[:warm] for n in s.names]
    starts: dict[int, list[int]] = {}
    for s in eval_suites:
        for g in s.gids[s.relevant]:
            starts.setdefault(int(g), []).append(s.pos)

    total_reps = config.random_repetitions if config.policy == "random" else 1
    n_chunks = math.ceil(total_reps / _CHUNK)
    sums = None
    tracker = None
    schedule_hash = hashlib.sha256()
    instrumentation = [] if config.instrument else None
    policy = None
    for chunk in range(n_chunks):
        reps = min(_CHUNK, total_reps - chunk * _CHUNK)
        policy = _make_policy(config, name_rank, warm_names, resume, reps, chunk)
        traj = _Trajectories(reps, len(names))
        for s in suites[:warm]:
            policy.warm(s)
            traj.reveal(s, np.ones((reps, len(s.names)), dtype=bool))
        chunk_tracker = TransitionTracker(reps, starts)
        chunk_sums = _run_cycles(config, eval_suites, policy, traj, chunk_tracker, schedule_hash,
                                 instrumentation if chunk == 0 else None)
        sums = chunk_sums if sums is None else {k: sums[k] + chunk_sums[k] for k in sums}
        if tracker is None:
            tracker = chunk_tracker
        else:
            tracker.merge(chunk_tracker)

    per_cycle = []
    metric_keys = ["napfd", "nfr", "nttf"] + (["napfd_full", "nfr_full", "nttf_full"] if config.also_full_rank else [])
    for i, s in enumerate(eval_suites):
        row = {"cycle_id": s.cycle_id}
        for key in metric_keys:
            row[key] = _num(sums[key][i] / total_reps)
        row["selected_count"] = _num(sums["selected_count"][i] / total_reps, integral=total_reps == 1)
        row["budget_ms"] = float(config.budget * s.durations.sum())
        row["miss"] = _num(sums["miss"][i] / total_reps)
        per_cycle.append(row)

    aggregates = {key: mean_std(r[key] for r in per_cycle) for key in metric_keys + ["selected_count"]}
    delays = tracker.delays() if tracker is not None else None
    integral = total_reps == 1
    eval_ids = {s.cycle_id for s in eval_suites}
    transitions = {
        "relevant_count": tracker.total if tracker else 0,
        "recall_pct": tracker.recall_pct() if tracker else None,
        "delay_histogram": {str(d): _num(c, integral) for d, c in delays.histogram.items()} if delays else {},
        "undetected_count": _num(delays.undetected, integral) if delays else 0,
        "tail_labeled": sum(1 for (cid, _), lab in labels.items()
                            if lab.tail and lab.kind is TransitionKind.RELEVANT_TRANSITION and cid in eval_ids),
    }
    faulty = [r for r in per_cycle if r["napfd"] is not None]
    misses = {
        "no_fail_selected_cycles": _num(sum(r["miss"] for r in faulty), integral),
        "miss_rate": _num(sum(r["miss"] for r in faulty) / len(faulty)) if faulty else None,
    }
    trace = {"schedule_sha256": schedule_hash.hexdigest(), "warm_start_cycles": warm,
             "evaluated_cycles": len(eval_suites), "repetitions": total_reps}
    agent = features = None
    if isinstance(policy, DQNPolicy):
        losses = np.asarray(policy.losses)
        trace.update({
            "train_steps": policy.agent.train_steps,
            "loss_sha256": hashlib.sha256(losses.tobytes()).hexdigest(),
            "final_loss": float(losses[-50:].mean()) if losses.size else None,
            "final_sigma": policy.agent.exploration.sigma,
            "buffer_size": len(policy.agent.buffer),
            "pending_rewards": len(policy.pending),
            "expired_rewards": policy.tail_resolved,
        })
        agent, features = policy.agent, policy.features
    return ReplayReport(config.echo(), per_cycle, aggregates, transitions, misses, trace,
                        instrumentation, agent, features)


def _run_cycles(config, suites, policy, traj, tracker, schedule_hash, instrumentation):
    E = len(suites)
    keys = ["napfd", "nfr", "nttf", "selected_count", "miss"]
    if config.also_full_rank:
        keys += ["napfd_full", "nfr_full", "nttf_full"]
    sums = {k: np.zeros(E) for k in keys}
    for i, s in enumerate(suites):
        if instrumentation is not None:
            instrumentation.append({"cycle_id": s.cycle_id, "history_sha256": policy.digest()})
        order = policy.order(s)
        R, n = order.shape
        est = traj.estimates(s.gids)
        rows = np.arange(R)[:, None]
        est_ranked = est[rows, order]
        cap = config.budget * est.sum(axis=1)
        take = _select_batch(est_ranked, cap)

        fail_ranked = s.fail[order]
        dur_ranked = s.durations[order]
        total_faults = int(s.fail.sum())
        time_budget = config.budget * float(s.durations.sum())
        ev = evaluate_batch(fail_ranked, dur_ranked, take, total_faults, time_budget)
        for k in ("napfd", "nfr", "nttf", "selected_count", "miss"):
            sums[k][i] += np.sum(ev[k])
        if config.also_full_rank:
            full = evaluate_batch(fail_ranked, dur_ranked, np.ones_like(take), total_faults,
                                  float(s.durations.sum()))
            for k in ("napfd", "nfr", "nttf"):
                sums[k + "_full"][i] += np.sum(full[k])

        selected = np.zeros((R, n), dtype=bool)
        selected[rows, order] = take
        tracker.observe(s.pos, s.gids, selected, s.verdicts, traj.last[:, s.gids])
        traj.reveal(s, selected)
        policy.observe(s, order, take)
        schedule_hash.update(order.astype(np.int32).tobytes())
        schedule_hash.update(np.packbits(take).tobytes())
        if instrumentation is not None:
            instrumentation[-1]["selected"] = sorted(s.names[j] for j in order[0][take[0]])
    return sums


def _sweep_one(args):
    config, series, resume = args
    return run_replay(config, series, copy.deepcopy(resume)).to_dict()


def budget_sweep(config: ReplayConfig, series: CycleSeries, budgets: Sequence[float], workers: int = 1,
                 resume: tuple[DQNAgent, FeaturePipeline] | None = None) -> list[dict]:
    """Independent replays per budget; budget i runs with seed ``config.seed + i``."""
    for b in budgets:
        if not 0.0 < b <= 1.0:
            raise ConfigError(f"budget {b} outside (0, 1]")
    jobs = [(replace(config, budget=float(b), seed=config.seed + i), series, resume)
            for i, b in enumerate(budgets)]
    for cfg, _, _ in jobs:
        cfg.validate()
    workers = max(1, min(workers or os.cpu_count() or 1, len(jobs)))
    if workers == 1:
        return [_sweep_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_one, jobs))
