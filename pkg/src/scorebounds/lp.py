"""Dense linear programs with box-bounded variables.

The solver is a primal simplex in inequality form: a vertex is described by
``k`` linearly independent active rows (general constraints or box faces) in
``k`` free variables, so each pivot costs one ``k x k`` solve plus an
``O(m k)`` ratio test. That suits these problems, which have few variables and
possibly many constraints. Dantzig pricing is used until the pivot budget of
``10 (k + m)`` is exhausted, then Bland's rule takes over to rule out cycling.
Feasibility comes from a phase-one problem that minimises the largest
constraint violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

__all__ = ["Sense", "LPStatus", "LinearProgram", "LPResult", "LPError", "solve"]

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11
OPT_TOL = 1e-10


class Sense(str, Enum):
    MAXIMIZE = "max"
    MINIMIZE = "min"


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


class LPError(RuntimeError):
    """Numerical breakdown: pivot budget exhausted, singular basis, or an unbounded ray."""


@dataclass(eq=False)
class LinearProgram:
    """``optimize r'b`` subject to ``a_i'b (>= | <=) rhs_i`` and ``lo <= b <= hi``.

    ``fixed`` pins variables to constants (e.g. a scale normalization); their
    box entries are ignored.
    """

    num_vars: int
    objective: np.ndarray
    boxes: np.ndarray
    A: np.ndarray = None
    senses: Sequence[str] = ()
    rhs: np.ndarray = None
    fixed: Mapping[int, float] = field(default_factory=dict)
    sense: Sense = Sense.MINIMIZE

    def __post_init__(self) -> None:
        q = int(self.num_vars)
        self.objective = np.asarray(self.objective, dtype=float).reshape(q)
        boxes = np.asarray(self.boxes, dtype=float)
        if boxes.shape == (2,):
            boxes = np.tile(boxes, (q, 1))
        if boxes.shape != (q, 2):
            raise ValueError(f"boxes must have shape ({q}, 2)")
        self.boxes = boxes
        if self.A is None:
            self.A = np.zeros((0, q))
        self.A = np.asarray(self.A, dtype=float).reshape(-1, q)
        m = self.A.shape[0]
        self.rhs = np.zeros(m) if self.rhs is None else np.asarray(self.rhs, dtype=float).reshape(m)
        self.senses = tuple(self.senses) if len(self.senses) else (">=",) * m
        if len(self.senses) != m or any(s not in (">=", "<=") for s in self.senses):
            raise ValueError("senses must be '>=' or '<=' for each constraint row")
        self.sense = Sense(self.sense)
        self.fixed = {int(k): float(v) for k, v in dict(self.fixed).items()}
        for k in self.fixed:
            if not 0 <= k < q:
                raise ValueError(f"fixed index {k} out of range")
        for k in range(q):
            if k in self.fixed:
                continue
            lo, hi = self.boxes[k]
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ValueError(f"variable {k} needs a finite box with lo <= hi, got [{lo}, {hi}]")

    def with_objective(self, objective, sense: Sense | str) -> "LinearProgram":
        return LinearProgram(self.num_vars, objective, self.boxes, self.A, self.senses,
                             self.rhs, self.fixed, sense)


@dataclass
class LPResult:
    status: LPStatus
    value: float = float("nan")
    witness: np.ndarray | None = None
    iterations: int = 0
    box_binding: bool = False
    duals: np.ndarray | None = None


def _simplex(c, G, h, x, W, max_pivots, bland_after):
    """Minimise ``c'x`` over ``Gx >= h`` starting from the vertex with active rows ``W``.

    Returns ``(x, W, lam, pivots)`` where ``lam`` are the multipliers of the
    active rows at the optimum.
    """
    W = list(W)
    k = len(W)
    in_W = np.zeros(G.shape[0], dtype=bool)
    in_W[W] = True
    pivots = 0
    while True:
        M = G[W]
        try:
            lam = np.linalg.solve(M.T, c)
        except np.linalg.LinAlgError as exc:
            raise LPError("singular basis") from exc
        bland = pivots >= bland_after
        neg = np.flatnonzero(lam < -OPT_TOL)
        if neg.size == 0:
            return x, W, lam, pivots
        if bland:
            p = min(neg, key=lambda i: W[i])
        else:
            p = int(neg[np.argmin(lam[neg])])
        e = np.zeros(k)
        e[p] = 1.0
        d = np.linalg.solve(M, e)
        Gd = G @ d
        cand = np.flatnonzero((Gd < -PIVOT_TOL) & ~in_W)
        if cand.size == 0:
            raise LPError("unbounded direction; boxes should prevent this")
        slack = np.maximum(G[cand] @ x - h[cand], 0.0)
        steps = slack / -Gd[cand]
        best = steps.min()
        ties = cand[steps <= best + FEAS_TOL * max(1.0, abs(best))]
        if bland:
            enter = int(ties.min())
        else:
            enter = int(ties[np.argmax(-Gd[ties])])
        in_W[W[p]] = False
        W[p] = enter
        in_W[enter] = True
        pivots += 1
        if pivots > max_pivots:
            raise LPError(f"pivot limit {max_pivots} exceeded")
        try:
            x = np.linalg.solve(G[W], h[W])
        except np.linalg.LinAlgError as exc:
            raise LPError("singular basis after pivot") from exc


def solve(lp: LinearProgram) -> LPResult:
    """Globally optimise ``lp``; deterministic for identical inputs."""
    q = lp.num_vars
    free = [k for k in range(q) if k not in lp.fixed]
    # variables with a degenerate box are fixed too
    pinned = dict(lp.fixed)
    for k in list(free):
        lo, hi = lp.boxes[k]
        if lo == hi:
            pinned[k] = lo
            free.remove(k)
    fixed_idx = sorted(pinned)
    fixed_val = np.array([pinned[k] for k in fixed_idx])

    sign = np.where(np.array(lp.senses) == ">=", 1.0, -1.0) if lp.A.shape[0] else np.zeros(0)
    offset = lp.A[:, fixed_idx] @ fixed_val if fixed_idx else np.zeros(lp.A.shape[0])
    G_gen = sign[:, None] * lp.A[:, free]
    h_gen = sign * (lp.rhs - offset)
    c_full = lp.objective if lp.sense is Sense.MINIMIZE else -lp.objective
    c = c_full[free]
    const = float(lp.objective[fixed_idx] @ fixed_val) if fixed_idx else 0.0
    k = len(free)
    m = G_gen.shape[0]

    # rows with no free coefficient are checked once and dropped
    zero_rows = np.all(G_gen == 0.0, axis=1) if k else np.ones(m, dtype=bool)
    if np.any(h_gen[zero_rows] > FEAS_TOL):
        return LPResult(LPStatus.INFEASIBLE)
    keep = np.flatnonzero(~zero_rows)
    G_gen, h_gen = G_gen[keep], h_gen[keep]
    m = G_gen.shape[0]

    if k == 0:
        return LPResult(LPStatus.OPTIMAL, value=const, witness=_assemble(q, free, fixed_idx,
                                                                         fixed_val, np.zeros(0)))

    lo = lp.boxes[free, 0]
    hi = lp.boxes[free, 1]
    # box rows: x >= lo (index m + i), -x >= -hi (index m + k + i)
    G_box = np.vstack([np.eye(k), -np.eye(k)])
    h_box = np.concatenate([lo, -hi])

    # start at the box corner that is optimal when general rows are ignored
    at_hi = c < 0
    x0 = np.where(at_hi, hi, lo)
    W_box = [m + k + i if at_hi[i] else m + i for i in range(k)]
    viol = h_gen - G_gen @ x0 if m else np.zeros(0)
    budget = 10 * (k + m)
    max_pivots = 50 * (k + m) + 1000
    pivots = 0

    if m and viol.max() > FEAS_TOL:
        # phase one in (x, t): G x + t >= h, box rows, t >= 0; minimise t
        G1 = np.zeros((m + 2 * k + 2, k + 1))
        G1[:m, :k] = G_gen
        G1[:m, k] = 1.0
        G1[m:m + 2 * k, :k] = G_box
        G1[m + 2 * k, k] = 1.0       # t >= 0
        G1[m + 2 * k + 1, k] = -1.0  # t <= 0, appended for phase two
        h1 = np.concatenate([h_gen, h_box, [0.0, 0.0]])
        worst = int(np.argmax(viol))
        W = W_box + [worst]
        x = np.concatenate([x0, [viol[worst]]])
        c1 = np.zeros(k + 1)
        c1[k] = 1.0
        active = np.ones(G1.shape[0], dtype=bool)
        active[-1] = False
        x, W, _, n1 = _simplex(c1, G1[active], h1[active], x, W, max_pivots, budget)
        pivots += n1
        if x[k] > FEAS_TOL:
            return LPResult(LPStatus.INFEASIBLE, iterations=pivots)
        c2 = np.concatenate([c, [0.0]])
        x, W, lam, n2 = _simplex(c2, G1, h1, x, W, max_pivots, max(budget - pivots, 0))
        pivots += n2
        x = x[:k]
        box_lo, box_hi, gen_rows = m, m + k, m
    else:
        G = np.vstack([G_gen, G_box])
        h = np.concatenate([h_gen, h_box])
        x, W, lam, pivots = _simplex(c, G, h, x0, W_box, max_pivots, budget)
        box_lo, box_hi, gen_rows = m, m + k, m

    # general-row multipliers in the caller's orientation
    duals = np.zeros(lp.A.shape[0])
    box_binding = False
    for row, mult in zip(W, lam):
        if row < gen_rows:
            orig = keep[row]
            duals[orig] = mult * sign[orig]
        elif box_lo <= row < box_hi + k and mult > OPT_TOL:
            box_binding = True
    if lp.sense is Sense.MAXIMIZE:
        duals = -duals
    x = np.clip(x, lo, hi)
    value = float(lp.objective[free] @ x) + const
    return LPResult(
        LPStatus.OPTIMAL,
        value=value,
        witness=_assemble(q, free, fixed_idx, fixed_val, x),
        iterations=pivots,
        box_binding=box_binding,
        duals=duals,
    )


def _assemble(q, free, fixed_idx, fixed_val, x):
    b = np.empty(q)
    b[free] = x
    if fixed_idx:
        b[fixed_idx] = fixed_val
    return b
