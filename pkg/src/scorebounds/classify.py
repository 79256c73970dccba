"""Abstention and random-classification rules on bound intervals.

Besides the closed-form rules this module carries brute-force versions
(worst-case loss over admissible signs, maximum regret over a probability
grid) so the rules can be checked against their decision-theoretic
definitions, and the misclassification-probability bound formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bounds import BoundInterval
from .data import ValidationError

__all__ = [
    "Outcome",
    "Decision",
    "CostTriple",
    "NoClassificationError",
    "classify_abstain",
    "classify_random",
    "classify_sample_frequency",
    "worst_case_loss",
    "minimax_action",
    "max_regret",
    "minimax_regret_prob",
    "misclassification_bound",
]


class Outcome(str, Enum):
    ONE = "one"
    ZERO = "zero"
    ABSTAIN = "abstain"


@dataclass(frozen=True)
class Decision:
    outcome: Outcome
    draw_used: int | None = None

    @property
    def label(self) -> int | None:
        return {Outcome.ONE: 1, Outcome.ZERO: 0}.get(self.outcome)


@dataclass(frozen=True)
class CostTriple:
    """Costs of a correct decision, of abstaining, and of a wrong decision."""

    c_base: float
    c_abstain: float | None
    c_wrong: float

    def check_abstention(self) -> None:
        if self.c_abstain is None or not (0 <= self.c_base < self.c_abstain < self.c_wrong):
            raise ValidationError(
                "abstention rule needs 0 <= C_b < C_abstain < C; "
                f"got ({self.c_base}, {self.c_abstain}, {self.c_wrong})"
            )

    def check_randomized(self) -> None:
        if not 0 <= self.c_base < self.c_wrong:
            raise ValidationError(f"randomized rule needs 0 <= C_b < C; got ({self.c_base}, {self.c_wrong})")


class NoClassificationError(ValueError):
    pass


def _endpoints(interval) -> tuple[float, float]:
    if isinstance(interval, BoundInterval):
        if not interval.feasible:
            raise NoClassificationError("no classification possible: empty feasible set")
        return interval.lower, interval.upper
    lo, hi = interval
    return float(lo), float(hi)


def classify_abstain(interval, tol: float = 0.0) -> Decision:
    """1 if the whole interval is above zero, 0 if below, abstain otherwise.

    Endpoints within ``tol`` of zero count as zero; with the default an exact
    zero endpoint already abstains.
    """
    lo, hi = _endpoints(interval)
    if lo > tol:
        return Decision(Outcome.ONE)
    if hi < -tol:
        return Decision(Outcome.ZERO)
    return Decision(Outcome.ABSTAIN)


def classify_random(interval, r_bit: int, tol: float = 0.0) -> Decision:
    """Like :func:`classify_abstain` but an interval straddling zero yields ``r_bit``.

    The caller draws ``r_bit``; sharing one draw between two classifiers is
    what makes their decisions comparable.
    """
    if r_bit not in (0, 1):
        raise ValidationError(f"r_bit must be 0 or 1, got {r_bit!r}")
    base = classify_abstain(interval, tol)
    if base.outcome is not Outcome.ABSTAIN:
        return base
    return Decision(Outcome.ONE if r_bit else Outcome.ZERO, draw_used=int(r_bit))


def classify_sample_frequency(f_hat: float, r_bit: int) -> Decision:
    """Classify by the sign of ``P_hat(Y=1|x) - tau``; an exact tie uses ``r_bit``."""
    if f_hat > 0:
        return Decision(Outcome.ONE)
    if f_hat < 0:
        return Decision(Outcome.ZERO)
    return Decision(Outcome.ONE if r_bit else Outcome.ZERO, draw_used=int(r_bit))


def _admissible_signs(lo: float, hi: float) -> set[int]:
    # a closed interval touching zero admits both signs
    if lo > 0:
        return {1}
    if hi < 0:
        return {-1}
    return {1, -1}


def worst_case_loss(action: Outcome | str, interval, costs: CostTriple) -> float:
    """Largest loss of ``action`` over the signs of ``b'x`` the interval admits.

    An interval that touches zero admits both signs.
    """
    action = Outcome(action)
    lo, hi = _endpoints(interval)
    if action is Outcome.ABSTAIN:
        if costs.c_abstain is None:
            raise ValidationError("abstention cost is undefined for this cost triple")
        return float(costs.c_abstain)
    want = 1 if action is Outcome.ONE else -1
    losses = [costs.c_base if s == want else costs.c_wrong for s in _admissible_signs(lo, hi)]
    return float(max(losses))


def minimax_action(interval, costs: CostTriple) -> Outcome:
    """Brute-force minimiser of :func:`worst_case_loss`; ties go to abstention."""
    costs.check_abstention()
    order = (Outcome.ABSTAIN, Outcome.ONE, Outcome.ZERO)
    losses = [worst_case_loss(a, interval, costs) for a in order]
    return order[int(np.argmin(losses))]


def max_regret(p: float, costs: CostTriple) -> float:
    """Maximum regret of classifying as 1 with probability ``p``."""
    costs.check_randomized()
    gap = costs.c_wrong - costs.c_base
    return max((1.0 - p) * gap, p * gap)


def minimax_regret_prob(costs: CostTriple, step: float = 1e-4) -> float:
    """Grid minimiser of :func:`max_regret` over ``p`` in [0, 1]."""
    costs.check_randomized()
    k = int(round(1.0 / step))
    grid = np.arange(k + 1) / k
    gap = costs.c_wrong - costs.c_base
    regret = np.maximum((1.0 - grid) * gap, grid * gap)
    return float(grid[int(np.argmin(regret))])


def misclassification_bound(
    alpha: float,
    p_lo_err: float,
    p_up_err: float,
    m_l: float = 0.0,
    m_u: float = 0.0,
    eps: float = 0.0,
    randomized: bool = False,
    random_design: bool = False,
    independent_device: bool = False,
    straddle: float = 0.0,
) -> float:
    """Upper bound on the probability of disagreeing with the oracle classifier.

    ``p_lo_err`` and ``p_up_err`` are ``P(c_L_hat - c_L <= -eps)`` and
    ``P(c_U_hat - c_U >= eps)``. The random design adds the margin term
    ``(m_l + m_u) eps``. Random classification halves the error terms; with
    independent randomization devices it adds ``0.5 * straddle``, where
    ``straddle`` is the indicator (fixed design) or probability (random
    design) that the oracle interval contains zero.
    """
    values = (p_lo_err, p_up_err, m_l, m_u, eps, straddle)
    if any(v < 0 for v in values):
        raise ValidationError("all bound inputs must be nonnegative")
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    k = 0.5 if randomized else 1.0
    out = alpha + k * p_lo_err + k * p_up_err
    if random_design:
        out += k * (m_l + m_u) * eps
    if randomized and independent_device:
        out += 0.5 * straddle
    return out
