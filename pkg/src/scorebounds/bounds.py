"""Sign screening and the two linear programs bounding a linear functional.

A group contributes a one-sided constraint only when its confidence band
excludes zero; the bounds on ``r'b`` are then the minimum and maximum of
``r'b`` over the box intersected with those half-spaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .confidence import HalfWidths
from .data import GroupedData, ValidationError
from .lp import LinearProgram, LPStatus, Sense, solve

__all__ = [
    "Direction",
    "BoundsSpec",
    "BoundInterval",
    "screen",
    "build_constraints",
    "build_constraints_interval",
    "interval_from_constraints",
    "bound_interval",
    "bound_intervals",
]


class Direction(IntEnum):
    NEGATIVE = -1
    SKIPPED = 0
    POSITIVE = 1


@dataclass
class BoundsSpec:
    """Target functional, parameter box and normalization.

    ``box`` is either a single ``(lo, hi)`` pair applied to every free
    coefficient or one pair per coefficient. The coefficient at
    ``normalized_index`` is pinned to +1; negate its covariate column if the
    sign is believed negative.
    """

    r: np.ndarray
    box: tuple[float, float] | np.ndarray = (-10.0, 10.0)
    normalized_index: int = 0
    epsilon: float = 0.0

    def __post_init__(self) -> None:
        self.r = np.asarray(self.r, dtype=float).reshape(-1)
        if not np.any(self.r != 0):
            raise ValidationError("target vector r must not be all zero")
        if not 0 <= self.normalized_index < self.r.size:
            raise ValidationError(
                f"normalized_index {self.normalized_index} out of range for q={self.r.size}"
            )
        if self.epsilon < 0:
            raise ValidationError("epsilon must be nonnegative")

    @property
    def q(self) -> int:
        return self.r.size

    def boxes(self) -> np.ndarray:
        box = np.asarray(self.box, dtype=float)
        if box.shape == (2,):
            box = np.tile(box, (self.q, 1))
        if box.shape != (self.q, 2):
            raise ValidationError(f"box must be a (lo, hi) pair or have shape ({self.q}, 2)")
        if np.any(box[:, 0] > box[:, 1]):
            raise ValidationError("box lower bound exceeds upper bound")
        return box


@dataclass
class BoundInterval:
    lower: float
    upper: float
    lower_status: LPStatus
    upper_status: LPStatus
    lower_binding: bool = False
    upper_binding: bool = False
    lower_witness: np.ndarray | None = field(default=None, repr=False)
    upper_witness: np.ndarray | None = field(default=None, repr=False)

    @property
    def feasible(self) -> bool:
        return self.lower_status is LPStatus.OPTIMAL and self.upper_status is LPStatus.OPTIMAL

    def contains(self, other: "BoundInterval", tol: float = 1e-9) -> bool:
        return self.lower <= other.lower + tol and other.upper <= self.upper + tol

    def to_dict(self) -> dict:
        # JSON has no NaN; an infeasible endpoint serializes as null
        return {
            "lower": self.lower if np.isfinite(self.lower) else None,
            "upper": self.upper if np.isfinite(self.upper) else None,
            "statuses": [self.lower_status.value, self.upper_status.value],
            "binding": [self.lower_binding, self.upper_binding],
        }


def screen(g_hat, s) -> np.ndarray:
    """Direction of each group: +1 if ``g - s > 0``, -1 if ``g + s < 0``, else 0."""
    g = np.asarray(g_hat, dtype=float)
    s = s.s if isinstance(s, HalfWidths) else np.asarray(s, dtype=float)
    if g.shape != s.shape:
        raise ValidationError(f"g_hat has {g.size} entries but half-widths have {s.size}")
    d = np.zeros(g.shape, dtype=int)
    d[g - s > 0] = Direction.POSITIVE
    d[g + s < 0] = Direction.NEGATIVE
    return d


def build_constraints(support, screening, spec: BoundsSpec):
    """Rows ``x_j'b >= eps`` (positive) or ``x_j'b <= -eps`` (negative).

    Returns ``(A, senses, rhs)``; skipped groups contribute nothing.
    """
    support = np.asarray(support, dtype=float)
    if support.ndim != 2 or support.shape[1] != spec.q:
        raise ValidationError(f"support must have {spec.q} columns")
    d = np.asarray(screening)
    rows = np.flatnonzero(d != 0)
    A = support[rows]
    senses = tuple(">=" if d[j] > 0 else "<=" for j in rows)
    rhs = np.array([spec.epsilon if d[j] > 0 else -spec.epsilon for j in rows])
    return A, senses, rhs


def build_constraints_interval(support, v_lo, v_hi, screening, spec: BoundsSpec):
    """Rows for interval-observed covariates; coefficients are ``(beta, delta)``.

    A positive group uses the upper endpoints ``v_hi`` and a negative group the
    lower endpoints ``v_lo``. Because the interval coefficients are
    nonnegative, the caller should clip their box below at zero (see
    :func:`interval_boxes`).
    """
    support = np.asarray(support, dtype=float)
    v_lo = np.asarray(v_lo, dtype=float).reshape(support.shape[0], -1)
    v_hi = np.asarray(v_hi, dtype=float).reshape(support.shape[0], -1)
    if np.any(v_lo > v_hi):
        j = int(np.flatnonzero(np.any(v_lo > v_hi, axis=1))[0])
        raise ValidationError(f"group {j}: interval lower endpoint exceeds upper endpoint")
    d = np.asarray(screening)
    endpoint = np.where((d > 0)[:, None], v_hi, v_lo)
    return build_constraints(np.hstack([support, endpoint]), d, spec)


def interval_boxes(spec: BoundsSpec, q_x: int) -> np.ndarray:
    box = spec.boxes().copy()
    box[q_x:, 0] = np.maximum(box[q_x:, 0], 0.0)
    if np.any(box[:, 0] > box[:, 1]):
        raise ValidationError("interval coefficients need a box that admits nonnegative values")
    return box


def interval_from_constraints(A, senses, rhs, spec: BoundsSpec, boxes=None) -> BoundInterval:
    """Minimise and maximise ``r'b`` over the constraint rows and the box."""
    lp = LinearProgram(
        num_vars=spec.q,
        objective=spec.r,
        boxes=spec.boxes() if boxes is None else boxes,
        A=A,
        senses=senses,
        rhs=rhs,
        fixed={spec.normalized_index: 1.0},
        sense=Sense.MINIMIZE,
    )
    lo = solve(lp)
    hi = solve(lp.with_objective(spec.r, Sense.MAXIMIZE))
    return BoundInterval(
        lower=lo.value,
        upper=hi.value,
        lower_status=lo.status,
        upper_status=hi.status,
        lower_binding=lo.box_binding,
        upper_binding=hi.box_binding,
        lower_witness=lo.witness,
        upper_witness=hi.witness,
    )


def _rows_for(grouped: GroupedData, d, spec: BoundsSpec):
    if grouped.has_intervals:
        q_x = grouped.support.shape[1]
        A, senses, rhs = build_constraints_interval(grouped.support, grouped.v_lo,
                                                    grouped.v_hi, d, spec)
        return A, senses, rhs, interval_boxes(spec, q_x)
    A, senses, rhs = build_constraints(grouped.support, d, spec)
    return A, senses, rhs, None


def bound_interval(grouped: GroupedData, halfwidths: HalfWidths, spec: BoundsSpec,
                   g_hat=None) -> BoundInterval:
    """Estimated bounds ``[c_L, c_U]`` on ``r'b`` from screened group estimates.

    ``g_hat`` defaults to the estimates stored on ``grouped``. Infeasibility
    of either program is reported through the statuses, not raised.
    """
    g = grouped.g_hat if g_hat is None else g_hat
    d = screen(g, halfwidths)
    A, senses, rhs, boxes = _rows_for(grouped, d, spec)
    return interval_from_constraints(A, senses, rhs, spec, boxes)


def bound_intervals(grouped: GroupedData, halfwidths: HalfWidths, specs, g_hat=None):
    """:func:`bound_interval` for several targets sharing one screening."""
    g = grouped.g_hat if g_hat is None else g_hat
    d = screen(g, halfwidths)
    out = []
    for spec in specs:
        A, senses, rhs, boxes = _rows_for(grouped, d, spec)
        out.append(interval_from_constraints(A, senses, rhs, spec, boxes))
    return out
