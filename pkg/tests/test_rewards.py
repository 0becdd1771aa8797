import pytest
from hypothesis import given
from hypothesis import strategies as st

from pipeline_rto.dataset import EffectiveVerdict, TransitionKind
from pipeline_rto.rewards import (
    REWARDS, ScheduledOutcome, UnresolvedLabel, cost_change_rank, cost_rank, get_reward, rn_change, rn_fail,
)

P, F = EffectiveVerdict.PASS, EffectiveVerdict.FAIL
NONE, REL, FLAKY = TransitionKind.NONE, TransitionKind.RELEVANT_TRANSITION, TransitionKind.FLAKY_TRANSITION


def outcome(verdict=F, rank=1, prefix=0.0, suite=40.0, transition=None, nd=0.5, duration=10.0):
    return ScheduledOutcome("//t", rank, verdict, duration, prefix, suite, transition, nd)


def test_cost_rank_examples():
    assert cost_rank(outcome(F)) == 1.0
    assert cost_rank(outcome(P)) == -1.0
    assert cost_rank(outcome(F, rank=2, prefix=10.0)) == pytest.approx(0.775, abs=1e-15)


def test_cost_rank_last_position_follows_prefix_sum():
    # the last of four 10 ms tests has 30 ms before it, not the whole 40 ms suite
    assert cost_rank(outcome(F, rank=4, prefix=30.0)) == pytest.approx(1 - 0.9 * 0.75)


def test_cost_rank_zero_cost_suite():
    assert cost_rank(outcome(F, suite=0.0, duration=0.0)) == 1.0


def test_rn_fail():
    assert rn_fail(outcome(F)) == 1.0
    assert rn_fail(outcome(P)) == 0.0
    assert rn_fail(outcome(F, rank=7, prefix=39.0)) == 1.0


def test_transition_rewards():
    assert cost_change_rank(outcome(transition=FLAKY)) == -1.0
    assert cost_change_rank(outcome(transition=REL)) == 1.0
    assert cost_change_rank(outcome(transition=NONE, nd=0.3)) == -0.3
    assert rn_change(outcome(transition=FLAKY)) == -1.0
    assert rn_change(outcome(transition=REL)) == 1.0
    assert rn_change(outcome(transition=NONE)) == 0.0


@pytest.mark.parametrize("fn", [cost_change_rank, rn_change])
def test_unresolved_label_raises(fn):
    with pytest.raises(UnresolvedLabel):
        fn(outcome(transition=None))


def test_outcome_validation():
    with pytest.raises(ValueError):
        outcome(prefix=50.0, suite=40.0)
    with pytest.raises(ValueError):
        outcome(nd=1.5)
    with pytest.raises(ValueError):
        cost_rank(outcome(EffectiveVerdict.IGNORED))


def test_registry():
    assert set(REWARDS) == {"costrank", "rnfail", "costchangerank", "rnchange"}
    assert get_reward("rnfail") is rn_fail
    with pytest.raises(ValueError):
        get_reward("bogus")


costs = st.floats(0.0, 1e6, allow_nan=False)
alphas = st.floats(0.0, 1.0)


@given(costs, costs, alphas)
def test_cost_rank_bounds_and_antisymmetry(a, b, alpha):
    prefix, suite = min(a, b), max(a, b)
    fail = cost_rank(outcome(F, prefix=prefix, suite=suite), alpha)
    ok = cost_rank(outcome(P, prefix=prefix, suite=suite), alpha)
    assert 1 - alpha - 1e-12 <= fail <= 1.0
    assert -1.0 <= ok <= -1 + alpha + 1e-12
    assert fail + ok == pytest.approx(0.0, abs=1e-12)


@given(costs, costs, costs)
def test_earlier_failure_never_earns_less(a, b, c):
    suite = a + b + c
    p1, p2 = sorted([a, a + b])
    assert cost_rank(outcome(F, prefix=p1, suite=suite)) >= cost_rank(outcome(F, prefix=p2, suite=suite))


@given(st.sampled_from([NONE, REL, FLAKY]), st.floats(0.0, 1.0))
def test_change_rewards_agree_on_transitions(label, nd):
    o = outcome(transition=label, nd=nd)
    if label is NONE:
        assert -1.0 <= cost_change_rank(o) <= 0.0
    else:
        assert cost_change_rank(o) == rn_change(o)
    for fn in REWARDS.values():
        assert -1.0 <= fn(o) <= 1.0
