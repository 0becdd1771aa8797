import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pipeline_rto.dataset import EffectiveVerdict, TransitionKind, label_transitions, loads_dataset
from pipeline_rto.metrics import (
    TransitionTracker, detection_delays, evaluate_batch, evaluate_cycle, mean_std, napfd, nfr, nttf,
    transition_recall,
)

P, F = EffectiveVerdict.PASS, EffectiveVerdict.FAIL


def napfd_oracle(selected, total_faults):
    """Literal evaluation: p - (sum of fault ranks)/(detected * n) + p/(2n)."""
    n = len(selected)
    fault_ranks = []
    for position in range(1, n + 1):
        if selected[position - 1]:
            fault_ranks.append(position)
    if not fault_ranks:
        return 0.0
    p = len(fault_ranks) / total_faults
    return p - sum(fault_ranks) / (len(fault_ranks) * n) + p / (2 * n)


def test_napfd_examples():
    assert napfd([F, P, P, P], 1) == 0.875
    assert napfd([P, P, P, F], 1) == 0.125
    assert napfd([F, P], 2) == 0.125
    assert napfd([P, P], 2) == 0.0


def test_napfd_rejects_degenerate_input():
    with pytest.raises(ValueError):
        napfd([], 1)
    with pytest.raises(ValueError):
        napfd([P], 0)


def test_napfd_matches_oracle_on_random_suites():
    rng = np.random.default_rng(7)
    for _ in range(2000):
        n_full = int(rng.integers(1, 11))
        fails = rng.random(n_full) < rng.random()
        if not fails.any():
            fails[rng.integers(n_full)] = True
        order = rng.permutation(n_full)
        take = int(rng.integers(1, n_full + 1))
        selected = [bool(fails[i]) for i in order[:take]]
        assert abs(napfd(selected, int(fails.sum())) - napfd_oracle(selected, int(fails.sum()))) <= 1e-12


def test_front_loading_is_optimal():
    for n in range(1, 8):
        for k in range(1, n + 1):
            best = napfd([True] * k + [False] * (n - k), k)
            for perm in set(itertools.permutations([True] * k + [False] * (n - k))):
                assert napfd(list(perm), k) <= best + 1e-15


def test_nfr_examples():
    assert nfr([F, P]) == 0.0
    assert nfr([P, P, F, P, P]) == 0.4
    assert nfr([P, P]) == 1.0


def test_nttf_examples():
    assert nttf([(F, 10), (P, 20)], 60) == 0.0
    assert nttf([(P, 10), (P, 20), (F, 30)], 60) == 0.5
    assert nttf([(P, 10)], 60) == 1.0
    assert nttf([(P, 100), (F, 1)], 60) == 1.0
    with pytest.raises(ValueError):
        nttf([(F, 1)], 0)


def test_evaluate_cycle_miss_and_no_fault():
    ev = evaluate_cycle(3, [(P, 5.0), (P, 5.0)], total_faults=1, time_budget=10.0)
    assert (ev.napfd, ev.nfr, ev.nttf, ev.miss) == (0.0, 1.0, 1.0, True)
    ev = evaluate_cycle(4, [(P, 5.0)], total_faults=0, time_budget=10.0)
    assert ev.napfd is None and not ev.miss


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 50)), min_size=1, max_size=9),
       st.integers(0, 4), st.floats(0.0, 200.0))
def test_batch_matches_scalar(rows, extra_faults, budget):
    fails = np.array([f for f, _ in rows])
    durs = np.array([float(d) for _, d in rows])
    rng = np.random.default_rng(len(rows) + extra_faults)
    take = rng.random((3, len(rows))) < 0.7
    take[:, 0] = True
    total = int(fails.sum()) + extra_faults
    out = evaluate_batch(np.tile(fails, (3, 1)), np.tile(durs, (3, 1)), take, total, budget)
    for r in range(3):
        sel = [(F if fails[j] else P, durs[j]) for j in range(len(rows)) if take[r, j]]
        ev = evaluate_cycle(0, sel, total, budget)
        if total == 0:
            assert np.isnan(out["napfd"][r])
            continue
        assert out["napfd"][r] == pytest.approx(ev.napfd, abs=1e-12)
        assert out["nfr"][r] == pytest.approx(ev.nfr, abs=1e-12)
        assert out["nttf"][r] == pytest.approx(ev.nttf, abs=1e-12)
        assert bool(out["miss"][r]) == ev.miss


@given(st.lists(st.booleans(), min_size=1, max_size=10))
def test_zero_iff_first_fails(verdicts):
    sel = [F if v else P for v in verdicts]
    assert (nfr(sel) == 0.0) == verdicts[0]
    assert (nttf([(v, 1.0) for v in sel], 5.0) == 0.0) == verdicts[0]


def test_mean_std():
    assert mean_std([1.0, 2.0, 3.0, None]) == {"mean": 2.0, "std": 1.0}
    assert mean_std([4.0]) == {"mean": 4.0, "std": 0.0}
    assert mean_std([None]) == {"mean": None, "std": None}


# --- transitions ------------------------------------------------------------

DELAY_LOG = """cycle_id,target,status,duration_ms
0,a,PASSED,1
0,b,PASSED,1
0,c,FAILED,1
0,d,PASSED,1
1,a,FAILED,1
1,b,PASSED,1
1,c,FAILED,1
1,d,PASSED,1
2,a,FAILED,1
2,b,FAILED,1
2,c,PASSED,1
2,d,PASSED,1
3,a,FAILED,1
3,b,FAILED,1
3,c,PASSED,1
3,d,FAILED,1
4,a,FAILED,1
4,b,FAILED,1
4,c,PASSED,1
4,d,FAILED,1
"""
# a flips at 1, b at 2, c at 2, d at 3; skips chosen so that the delays differ
DELAY_DECISIONS = {0: {"a", "b", "c", "d"}, 1: {"b"}, 2: {"c"}, 3: {"b"}, 4: {"a"}}


def delay_fixture():
    series = loads_dataset(DELAY_LOG, "post_submit")
    return series, label_transitions(series)


def test_fixture_labels():
    _, labels = delay_fixture()
    relevant = sorted(k for k, v in labels.items() if v.kind is TransitionKind.RELEVANT_TRANSITION)
    assert relevant == [(1, "a"), (2, "b"), (2, "c"), (3, "d")]


def test_detection_delays_by_hand():
    series, labels = delay_fixture()
    report = detection_delays(DELAY_DECISIONS, labels, series)
    # c is selected in its own cycle, b one cycle late, a three cycles late, d never
    assert report.histogram == {0: 1, 1: 1, 3: 1}
    assert report.undetected == 1 and report.total == 4
    assert report.within(1) == 0.5


def test_transition_recall_by_hand():
    series, labels = delay_fixture()
    assert transition_recall(DELAY_DECISIONS, labels) == 25.0
    everything = {c.cycle_id: {r.target for r in c.records} for c in series}
    assert transition_recall(everything, labels) == 100.0
    assert transition_recall({}, labels) == 0.0
    assert transition_recall(DELAY_DECISIONS, labels, cycles=[2]) == 50.0
    assert transition_recall({}, {}) is None


def test_detection_on_first_execution():
    series, labels = delay_fixture()
    # a is first executed in cycle 2, which counts as observing its new verdict
    report = detection_delays({2: {"a"}}, labels, series, cycles=[1])
    assert report.histogram == {1: 1}


def test_tracker_matches_scalar_delays():
    series, labels = delay_fixture()
    names = sorted({r.target for r in series.records()})
    gid = {n: i for i, n in enumerate(names)}
    starts = {}
    for pos, cycle in enumerate(series):
        for r in cycle.records:
            if labels[(cycle.cycle_id, r.target)].kind is TransitionKind.RELEVANT_TRANSITION:
                starts.setdefault(gid[r.target], []).append(pos)
    rng = np.random.default_rng(0)
    R = 40
    picks = rng.random((R, len(series), len(names))) < 0.5
    tracker = TransitionTracker(R, starts)
    last = np.full((R, len(names)), -1, dtype=np.int8)
    for pos, cycle in enumerate(series):
        gids = np.array([gid[r.target] for r in cycle.records])
        verdicts = np.array([r.verdict is F for r in cycle.records], dtype=np.int8)
        selected = picks[:, pos, gids]
        tracker.observe(pos, gids, selected, verdicts, last[:, gids])
        rows, cols = np.nonzero(selected)
        last[rows, gids[cols]] = verdicts[cols]
    hist, undetected, recalls = {}, 0.0, []
    for r in range(R):
        decisions = {c.cycle_id: {names[g] for g in np.flatnonzero(picks[r, pos])} for pos, c in enumerate(series)}
        rep = detection_delays(decisions, labels, series)
        for d, c in rep.histogram.items():
            hist[d] = hist.get(d, 0) + c / R
        undetected += rep.undetected / R
        recalls.append(transition_recall(decisions, labels))
    report = tracker.delays()
    assert report.histogram.keys() == hist.keys()
    for d in hist:
        assert report.histogram[d] == pytest.approx(hist[d])
    assert report.undetected == pytest.approx(undetected)
    assert tracker.recall_pct() == pytest.approx(np.mean(recalls))
