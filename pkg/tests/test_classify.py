import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scorebounds.bounds import BoundInterval
from scorebounds.classify import (
    CostTriple,
    NoClassificationError,
    Outcome,
    classify_abstain,
    classify_random,
    classify_sample_frequency,
    max_regret,
    minimax_action,
    minimax_regret_prob,
    misclassification_bound,
    worst_case_loss,
)
from scorebounds.data import ValidationError
from scorebounds.lp import LPStatus

POINTS = [-2, -1, -0.5, 0, 0.5, 1, 2]
INTERVALS = [(a, b) for a in POINTS for b in POINTS if a <= b]
COST_GRID = [c for c in itertools.product([0, 0.5, 1, 2], [0.25, 1, 1.5, 3], [1, 2, 4, 8])
             if c[0] < c[1] < c[2]]


def test_abstain_examples():
    assert classify_abstain((0.3, 1.2)).outcome is Outcome.ONE
    assert classify_abstain((-2, -0.1)).outcome is Outcome.ZERO
    assert classify_abstain((-1, 1)).outcome is Outcome.ABSTAIN
    assert classify_abstain((0.0, 1.0)).outcome is Outcome.ABSTAIN
    assert classify_abstain((-1.0, 0.0)).outcome is Outcome.ABSTAIN


def test_random_examples():
    d = classify_random((0.3, 1.2), 0)
    assert d.outcome is Outcome.ONE and d.draw_used is None
    d = classify_random((-1, 1), 1)
    assert d.outcome is Outcome.ONE and d.draw_used == 1
    d = classify_random((-1, 1), 0)
    assert d.outcome is Outcome.ZERO and d.draw_used == 0
    with pytest.raises(ValidationError):
        classify_random((-1, 1), 2)


@given(lo=st.floats(-5, 5), width=st.floats(0, 5), bit=st.integers(0, 1))
def test_random_never_abstains(lo, width, bit):
    assert classify_random((lo, lo + width), bit).outcome is not Outcome.ABSTAIN


def test_infeasible_interval():
    iv = BoundInterval(float("nan"), float("nan"), LPStatus.INFEASIBLE, LPStatus.INFEASIBLE)
    with pytest.raises(NoClassificationError, match="empty feasible set"):
        classify_abstain(iv)
    with pytest.raises(NoClassificationError):
        classify_random(iv, 1)


def test_tolerance_treats_noise_as_zero():
    assert classify_abstain((1e-16, 0.2)).outcome is Outcome.ONE
    assert classify_abstain((1e-16, 0.2), tol=1e-9).outcome is Outcome.ABSTAIN


def test_worst_case_loss_examples():
    c = CostTriple(0, 1, 2)
    assert worst_case_loss(Outcome.ABSTAIN, (0.2, 0.5), c) == 1
    assert worst_case_loss(Outcome.ONE, (0.2, 0.5), c) == 0
    assert worst_case_loss(Outcome.ONE, (-1, 1), c) == 2
    assert worst_case_loss(Outcome.ZERO, (-1, -0.5), c) == 0


def test_minimax_examples():
    c = CostTriple(0, 1, 2)
    assert minimax_action((0.1, 2), c) is Outcome.ONE
    assert minimax_action((-1, 1), c) is Outcome.ABSTAIN
    with pytest.raises(ValidationError):
        minimax_action((-1, 1), CostTriple(0, 3, 2))


def test_abstain_rule_is_minimax_on_grid():
    checked = 0
    for iv in INTERVALS:
        for c in COST_GRID:
            assert minimax_action(iv, CostTriple(*c)) is classify_abstain(iv).outcome
            checked += 1
    assert checked >= 500


def test_regret_examples():
    c = CostTriple(0, None, 2)
    assert max_regret(0.5, c) == 1.0
    assert max_regret(0.9, c) == pytest.approx(1.8)
    assert minimax_regret_prob(c) == 0.5


def test_half_is_minimax_regret_on_grid():
    for cb, cw in itertools.product([0, 0.1, 1, 3], [0.5, 2, 5, 100]):
        if cb < cw:
            assert minimax_regret_prob(CostTriple(cb, None, cw)) == 0.5


def test_cost_validation():
    with pytest.raises(ValidationError):
        max_regret(0.5, CostTriple(2, None, 1))
    with pytest.raises(ValidationError):
        CostTriple(0, None, 2).check_abstention()


def test_bound_formula_examples():
    assert misclassification_bound(0.05, 0, 0) == pytest.approx(0.05)
    assert misclassification_bound(0.05, 0.02, 0.04) == pytest.approx(0.11)
    assert misclassification_bound(0.05, 0.02, 0.04, randomized=True) == pytest.approx(0.08)
    assert misclassification_bound(0.05, 0, 0, 1, 1, 0.01, randomized=True,
                                   random_design=True) == pytest.approx(0.06)
    assert misclassification_bound(0.05, 0, 0, randomized=True, independent_device=True,
                                   straddle=1.0) == pytest.approx(0.55)
    with pytest.raises(ValidationError):
        misclassification_bound(0.05, -0.1, 0)
    with pytest.raises(ValidationError):
        misclassification_bound(1.5, 0, 0)


@given(a=st.floats(0.001, 0.999), p1=st.floats(0, 1), p2=st.floats(0, 1), m1=st.floats(0, 10),
       m2=st.floats(0, 10), eps=st.floats(0, 1), rd=st.booleans())
def test_randomized_bound_not_larger(a, p1, p2, m1, m2, eps, rd):
    kw = dict(m_l=m1, m_u=m2, eps=eps, random_design=rd)
    assert (misclassification_bound(a, p1, p2, randomized=True, **kw)
            <= misclassification_bound(a, p1, p2, randomized=False, **kw))


@given(lo1=st.floats(-3, 0), hi1=st.floats(0, 3), lo2=st.floats(-3, 0), hi2=st.floats(0, 3),
       bit=st.integers(0, 1))
def test_shared_device_agreement(lo1, hi1, lo2, hi2, bit):
    # both intervals straddle zero, so the shared bit decides both
    assert classify_random((lo1, hi1), bit).outcome is classify_random((lo2, hi2), bit).outcome


def test_sample_frequency_rule():
    assert classify_sample_frequency(0.1, 0).outcome is Outcome.ONE
    assert classify_sample_frequency(-0.1, 1).outcome is Outcome.ZERO
    d = classify_sample_frequency(0.0, 1)
    assert d.outcome is Outcome.ONE and d.draw_used == 1


def test_decision_label():
    assert classify_abstain((1, 2)).label == 1
    assert classify_abstain((-1, 1)).label is None
