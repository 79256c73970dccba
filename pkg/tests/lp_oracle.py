"""Brute-force LP oracle: scan a grid over the free variables, keep feasible points."""

import itertools

import numpy as np

from scorebounds.lp import LinearProgram


def grid_optimum(lp: LinearProgram, step: float, tol: float = 1e-9):
    """Best objective over feasible grid points, or ``None`` if none is feasible."""
    free = [k for k in range(lp.num_vars) if k not in lp.fixed]
    axes = [np.arange(lp.boxes[k, 0], lp.boxes[k, 1] + step / 2, step) for k in free]
    mesh = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(free), -1).T
    pts = np.zeros((mesh.shape[0], lp.num_vars))
    pts[:, free] = mesh
    for k, v in lp.fixed.items():
        pts[:, k] = v
    ok = np.ones(pts.shape[0], dtype=bool)
    for a, sense, b in zip(lp.A, lp.senses, lp.rhs):
        lhs = pts @ a
        ok &= lhs >= b - tol if sense == ">=" else lhs <= b + tol
    if not ok.any():
        return None
    vals = pts[ok] @ lp.objective
    return float(vals.max() if lp.sense.value == "max" else vals.min())


def random_lp(rng: np.random.Generator, q_free: int, m: int, feasible: bool = True) -> LinearProgram:
    """Box [-1, 1]^q_free plus one variable pinned to 1; rows cut around a random centre."""
    q = q_free + 1
    fixed_idx = int(rng.integers(q))
    centre = rng.uniform(-0.6, 0.6, q)
    centre[fixed_idx] = 1.0
    A = rng.normal(size=(m, q))
    slack = rng.uniform(0.05, 0.6, m) * np.linalg.norm(A, axis=1)
    rhs = A @ centre - slack
    senses = [">="] * m
    flip = rng.random(m) < 0.5
    A[flip] *= -1
    rhs[flip] *= -1
    senses = ["<=" if f else ">=" for f in flip]
    if not feasible:
        # append a row and its strict negation
        a = rng.normal(size=q)
        c = float(a @ centre)
        A = np.vstack([A, a, a])
        rhs = np.concatenate([rhs, [c + 0.3, c - 0.3]])
        senses = senses + [">=", "<="]
    r = rng.normal(size=q)
    sense = "max" if rng.random() < 0.5 else "min"
    return LinearProgram(q, r, (-1.0, 1.0), A, senses, rhs, {fixed_idx: 1.0}, sense)
