"""Observation-level data, grouping by support point, and group statistics.

Covariates must be discrete. Rows are grouped by exact equality of their
covariate vectors after canonicalization to 12 significant digits, so values
that differ only by binary-float noise land in the same cell.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Sequence

import numpy as np

__all__ = [
    "ValidationError",
    "ParseError",
    "Design",
    "Observation",
    "Dataset",
    "CsvSchema",
    "ClusterStats",
    "GroupSummary",
    "GroupedData",
    "ingest_csv",
    "group",
    "estimate_g",
    "estimate_g_clustered",
    "canonicalize",
]

SIGNIFICANT_DIGITS = 12


class ValidationError(ValueError):
    """Input data or arguments violate a documented precondition."""


class ParseError(ValidationError):
    """A CSV cell could not be parsed."""


class Design(str, Enum):
    FIXED = "fixed"
    RANDOM = "random"

    @classmethod
    def coerce(cls, value: "Design | str") -> "Design":
        try:
            return cls(value)
        except ValueError:
            raise ValidationError(
                f"design must be one of {[d.value for d in cls]}, got {value!r}"
            ) from None


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValidationError(f"tau must lie in (0, 1), got {tau}")
    return tau


@dataclass(frozen=True)
class Observation:
    y: int
    x: tuple[float, ...]
    weight: float = 1.0
    cluster: Hashable | None = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented sample of binary outcomes and discrete covariates.

    ``v_lo``/``v_hi`` hold the endpoints of interval-observed covariates
    (shape ``(n, q_v)``); both are ``None`` for purely discrete data.
    ``clusters`` defaults to one cluster per row.
    """

    y: np.ndarray
    X: np.ndarray
    weights: np.ndarray | None = None
    clusters: np.ndarray | None = None
    tau: float = 0.5
    design: Design = Design.FIXED
    covariate_names: tuple[str, ...] | None = None
    v_lo: np.ndarray | None = None
    v_hi: np.ndarray | None = None
    interval_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        n = y.shape[0]
        if n < 1:
            raise ValidationError("dataset must contain at least one observation")
        if X.shape[0] != n:
            raise ValidationError(f"X has {X.shape[0]} rows but y has {n}")
        bad = np.flatnonzero((y != 0) & (y != 1))
        if bad.size:
            raise ValidationError(f"row {bad[0]}: outcome must be 0 or 1, got {y[bad[0]]!r}")
        if not np.all(np.isfinite(X)):
            row = int(np.flatnonzero(~np.all(np.isfinite(X), axis=1))[0])
            raise ValidationError(f"row {row}: covariates must be finite")
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (n,):
            raise ValidationError("weights must have one entry per observation")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            row = int(np.flatnonzero(~((w > 0) & np.isfinite(w)))[0])
            raise ValidationError(f"row {row}: weight must be positive and finite, got {w[row]}")
        c = np.arange(n) if self.clusters is None else np.asarray(self.clusters)
        if c.shape != (n,):
            raise ValidationError("clusters must have one entry per observation")
        object.__setattr__(self, "y", y.astype(np.int8))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "clusters", c)
        object.__setattr__(self, "tau", _check_tau(self.tau))
        object.__setattr__(self, "design", Design.coerce(self.design))
        if self.covariate_names is None:
            names = tuple(f"x{k + 1}" for k in range(X.shape[1]))
            object.__setattr__(self, "covariate_names", names)
        elif len(self.covariate_names) != X.shape[1]:
            raise ValidationError("covariate_names length does not match X")
        if (self.v_lo is None) != (self.v_hi is None):
            raise ValidationError("v_lo and v_hi must be given together")
        if self.v_lo is not None:
            lo = np.asarray(self.v_lo, dtype=float).reshape(n, -1)
            hi = np.asarray(self.v_hi, dtype=float).reshape(n, -1)
            if lo.shape != hi.shape:
                raise ValidationError("v_lo and v_hi shapes differ")
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ValidationError("interval endpoints must be finite")
            inverted = np.flatnonzero(np.any(lo > hi, axis=1))
            if inverted.size:
                raise ValidationError(
                    f"row {inverted[0]}: interval lower endpoint exceeds upper endpoint"
                )
            object.__setattr__(self, "v_lo", lo)
            object.__setattr__(self, "v_hi", hi)
            if self.interval_names is None:
                names = tuple(f"v{k + 1}" for k in range(lo.shape[1]))
                object.__setattr__(self, "interval_names", names)

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def q(self) -> int:
        return int(self.X.shape[1])

    @property
    def has_intervals(self) -> bool:
        return self.v_lo is not None

    @property
    def unit_weights(self) -> bool:
        return bool(np.all(self.weights == 1.0))

    @property
    def observations(self) -> list[Observation]:
        return [
            Observation(int(self.y[i]), tuple(self.X[i]), float(self.weights[i]), self.clusters[i])
            for i in range(self.n)
        ]

    @classmethod
    def from_observations(
        cls, observations: Sequence[Observation], tau: float = 0.5, design: Design | str = "fixed"
    ) -> "Dataset":
        if not observations:
            raise ValidationError("dataset must contain at least one observation")
        q = len(observations[0].x)
        for i, ob in enumerate(observations):
            if len(ob.x) != q:
                raise ValidationError(f"row {i}: expected {q} covariates, got {len(ob.x)}")
        clusters = [ob.cluster if ob.cluster is not None else ("__row", i)
                    for i, ob in enumerate(observations)]
        codes = {}
        return cls(
            y=np.array([ob.y for ob in observations]),
            X=np.array([ob.x for ob in observations], dtype=float).reshape(len(observations), q),
            weights=np.array([ob.weight for ob in observations], dtype=float),
            clusters=np.array([codes.setdefault(c, len(codes)) for c in clusters]),
            tau=tau,
            design=design,
        )


# ---------------------------------------------------------------------------
# CSV ingestion


@dataclass
class CsvSchema:
    """Column mapping for :func:`ingest_csv`.

    When ``covariates`` is ``None`` every column other than the outcome,
    weight and cluster columns is a covariate, except ``<name>_lo`` /
    ``<name>_hi`` pairs which become interval covariates.
    """

    outcome: str = "y"
    covariates: Sequence[str] | None = None
    weight: str = "w"
    cluster: str = "cluster"
    intervals: Sequence[str] | None = None


def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline="")
    if isinstance(source, io.TextIOBase):
        return source
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def _parse_float(cell: str, line: int, column: str) -> float:
    text = cell.strip()
    if text == "":
        raise ParseError(f"line {line}: missing value in column {column!r}")
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"line {line}: column {column!r} is not a number: {cell!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"line {line}: column {column!r} is not finite: {cell!r}")
    return value


def ingest_csv(
    source,
    schema: CsvSchema | None = None,
    tau: float = 0.5,
    design: Design | str = "fixed",
) -> Dataset:
    """Read a UTF-8 CSV with a header row into a :class:`Dataset`.

    Error messages cite the physical line number (the header is line 1).
    """
    schema = schema or CsvSchema()
    stream = _open_text(source)
    close = isinstance(source, (str, os.PathLike))
    try:
        rows = list(csv.reader(stream))
    finally:
        if close:
            stream.close()
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ValidationError("empty file: no header row")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise ValidationError("empty file: header present but no data rows")
    if len(set(header)) != len(header):
        raise ValidationError(f"duplicate column names in header: {header}")
    if schema.outcome not in header:
        raise ValidationError(f"outcome column {schema.outcome!r} not found in header {header}")

    reserved = {schema.outcome, schema.weight, schema.cluster}
    if schema.intervals is not None:
        intervals = list(schema.intervals)
    else:
        intervals = [h[:-3] for h in header
                     if h.endswith("_lo") and h[:-3] + "_hi" in header and h not in reserved]
    interval_cols = {f"{v}_lo" for v in intervals} | {f"{v}_hi" for v in intervals}
    if schema.covariates is not None:
        covariates = list(schema.covariates)
    else:
        covariates = [h for h in header if h not in reserved and h not in interval_cols]
    for name in covariates + sorted(interval_cols):
        if name not in header:
            raise ValidationError(f"column {name!r} not found in header {header}")
    if not covariates and not intervals:
        raise ValidationError("no covariate columns")

    idx = {h: k for k, h in enumerate(header)}
    n = len(body)
    y = np.empty(n, dtype=np.int8)
    X = np.empty((n, len(covariates)))
    lo = np.empty((n, len(intervals)))
    hi = np.empty((n, len(intervals)))
    w = np.ones(n)
    has_w = schema.weight in idx
    has_c = schema.cluster in idx
    clusters: list = []
    for i, row in enumerate(body):
        line = i + 2
        if len(row) != len(header):
            raise ParseError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        cell = row[idx[schema.outcome]].strip()
        if cell not in ("0", "1", "0.0", "1.0"):
            raise ValidationError(f"line {line}: outcome must be 0 or 1, got {cell!r}")
        y[i] = int(float(cell))
        for k, name in enumerate(covariates):
            X[i, k] = _parse_float(row[idx[name]], line, name)
        for k, name in enumerate(intervals):
            lo[i, k] = _parse_float(row[idx[f"{name}_lo"]], line, f"{name}_lo")
            hi[i, k] = _parse_float(row[idx[f"{name}_hi"]], line, f"{name}_hi")
            if lo[i, k] > hi[i, k]:
                raise ValidationError(f"line {line}: {name}_lo exceeds {name}_hi")
        if has_w:
            w[i] = _parse_float(row[idx[schema.weight]], line, schema.weight)
            if w[i] <= 0:
                raise ValidationError(f"line {line}: weight must be positive, got {w[i]}")
        if has_c:
            label = row[idx[schema.cluster]].strip()
            if label == "":
                raise ParseError(f"line {line}: missing cluster id")
            clusters.append(label)

    if has_c:
        _, codes = np.unique(np.array(clusters, dtype=object).astype(str), return_inverse=True)
    else:
        codes = None
    return Dataset(
        y=y,
        X=X,
        weights=w,
        clusters=codes,
        tau=tau,
        design=design,
        covariate_names=tuple(covariates),
        v_lo=lo if intervals else None,
        v_hi=hi if intervals else None,
        interval_names=tuple(intervals) if intervals else None,
    )


# ---------------------------------------------------------------------------
# grouping


def canonicalize(values: np.ndarray) -> np.ndarray:
    """Round every entry to 12 significant digits (half-even on the decimal string)."""
    values = np.asarray(values, dtype=float)
    uniq, inverse = np.unique(values, return_inverse=True)
    canon = np.array([float(f"{v:.{SIGNIFICANT_DIGITS}g}") for v in uniq])
    canon[canon == 0.0] = 0.0  # fold -0.0
    return canon[inverse].reshape(values.shape)


@dataclass
class ClusterStats:
    """Per-cluster sums for one support point.

    ``weight[c]`` is the total weight of the group's rows in cluster ``c`` and
    ``wy[c]`` the weighted count of ``Y = 1`` among them.
    """

    ids: np.ndarray
    weight: np.ndarray
    wy: np.ndarray

    def upsilon(self, tau: float) -> np.ndarray:
        return self.wy - tau * self.weight

    @property
    def gamma(self) -> np.ndarray:
        return self.weight / self.weight.sum()


@dataclass
class GroupSummary:
    x: np.ndarray
    n_j: int
    mass: float
    g_hat: float
    ybar: float
    sigma2_hat: float
    s2_hat: float
    weight: float
    wy: float = 0.0
    cluster_stats: ClusterStats | None = None
    v_lo: np.ndarray | None = None
    v_hi: np.ndarray | None = None


@dataclass
class GroupedData:
    """Sample collapsed to its distinct support points.

    ``cluster_weight`` is the total weight of each cluster over all groups
    (``N`` times the random-design share); ``cluster_ids`` labels its entries.
    """

    groups: list[GroupSummary]
    n: int
    N: float
    tau: float
    design: Design
    cluster_ids: np.ndarray = field(default_factory=lambda: np.empty(0))
    cluster_weight: np.ndarray = field(default_factory=lambda: np.empty(0))
    covariate_names: tuple[str, ...] | None = None
    interval_names: tuple[str, ...] | None = None

    @property
    def J(self) -> int:
        return len(self.groups)

    @property
    def support(self) -> np.ndarray:
        return np.array([g.x for g in self.groups])

    @property
    def has_intervals(self) -> bool:
        return bool(self.groups) and self.groups[0].v_lo is not None

    @property
    def v_lo(self) -> np.ndarray:
        return np.array([g.v_lo for g in self.groups])

    @property
    def v_hi(self) -> np.ndarray:
        return np.array([g.v_hi for g in self.groups])

    @property
    def counts(self) -> np.ndarray:
        return np.array([g.n_j for g in self.groups])

    @property
    def masses(self) -> np.ndarray:
        return np.array([g.mass for g in self.groups])

    @property
    def g_hat(self) -> np.ndarray:
        return np.array([g.g_hat for g in self.groups])

    @property
    def ybar(self) -> np.ndarray:
        return np.array([g.ybar for g in self.groups])

    @property
    def sigma2_hat(self) -> np.ndarray:
        return np.array([g.sigma2_hat for g in self.groups])

    @property
    def s2_hat(self) -> np.ndarray:
        return np.array([g.s2_hat for g in self.groups])

    @property
    def weights(self) -> np.ndarray:
        return np.array([g.weight for g in self.groups])

    @property
    def unit_weights(self) -> bool:
        return all(g.weight == g.n_j for g in self.groups)

    @property
    def has_cluster_stats(self) -> bool:
        return bool(self.groups) and all(g.cluster_stats is not None for g in self.groups)


def group(dataset: Dataset) -> GroupedData:
    """Collapse ``dataset`` to one :class:`GroupSummary` per distinct support point.

    Groups are ordered lexicographically by their canonical covariate vector
    (interval endpoints included when present).
    """
    keys = dataset.X
    if dataset.has_intervals:
        keys = np.hstack([dataset.X, dataset.v_lo, dataset.v_hi])
    keys = canonicalize(keys)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    J = uniq.shape[0]
    n = dataset.n
    tau = dataset.tau
    y = dataset.y.astype(float)
    w = dataset.weights

    counts = np.bincount(inverse, minlength=J)
    ones = np.bincount(inverse, weights=y, minlength=J)
    wsum = np.bincount(inverse, weights=w, minlength=J)
    wysum = np.bincount(inverse, weights=w * y, minlength=J)
    N = float(wsum.sum())

    _, cluster_codes = np.unique(dataset.clusters, return_inverse=True)
    cluster_codes = cluster_codes.reshape(-1)
    m = int(cluster_codes.max()) + 1
    cluster_weight = np.bincount(cluster_codes, weights=w, minlength=m)

    # per (group, cluster) sums
    pair = inverse.astype(np.int64) * m + cluster_codes
    pair_keys, pair_inv = np.unique(pair, return_inverse=True)
    pair_inv = pair_inv.reshape(-1)
    pair_w = np.bincount(pair_inv, weights=w, minlength=pair_keys.size)
    pair_wy = np.bincount(pair_inv, weights=w * y, minlength=pair_keys.size)
    pair_group = pair_keys // m
    pair_cluster = pair_keys % m
    splits = np.searchsorted(pair_group, np.arange(1, J))

    qx = dataset.q
    qv = dataset.v_lo.shape[1] if dataset.has_intervals else 0
    if dataset.unit_weights:
        mass = counts / n
    else:
        mass = wsum / N
    g_hat = estimate_g_from_sums(counts, wsum, wysum, n, N, tau, dataset.design)
    groups = []
    for j, (pc, pw, pwy) in enumerate(zip(np.split(pair_cluster, splits),
                                          np.split(pair_w, splits),
                                          np.split(pair_wy, splits))):
        ybar = wysum[j] / wsum[j]
        # random-design variance of (Y - tau) 1{X = x_j}, 1/n divisor
        mean_v = (ones[j] - tau * counts[j]) / n
        inside = ones[j] * (1 - tau - mean_v) ** 2 + (counts[j] - ones[j]) * (-tau - mean_v) ** 2
        s2 = (inside + (n - counts[j]) * mean_v**2) / n
        groups.append(GroupSummary(
            x=uniq[j, :qx].copy(),
            n_j=int(counts[j]),
            mass=float(mass[j]),
            g_hat=float(g_hat[j]),
            ybar=float(ybar),
            sigma2_hat=float(ybar * (1.0 - ybar)),
            s2_hat=float(s2),
            weight=float(wsum[j]),
            wy=float(wysum[j]),
            cluster_stats=ClusterStats(ids=pc, weight=pw, wy=pwy),
            v_lo=uniq[j, qx:qx + qv].copy() if qv else None,
            v_hi=uniq[j, qx + qv:].copy() if qv else None,
        ))
    return GroupedData(
        groups=groups,
        n=n,
        N=N,
        tau=tau,
        design=dataset.design,
        cluster_ids=np.arange(m),
        cluster_weight=cluster_weight,
        covariate_names=dataset.covariate_names,
        interval_names=dataset.interval_names,
    )


def estimate_g_from_sums(counts, wsum, wysum, n, N, tau, design) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    wsum = np.asarray(wsum, dtype=float)
    wysum = np.asarray(wysum, dtype=float)
    if Design.coerce(design) is Design.FIXED:
        unit = np.array_equal(wsum, counts)
        mass = counts / n if unit else wsum / N
        return (wysum - tau * wsum) / wsum * mass
    return (wysum - tau * wsum) / N


def estimate_g(grouped: GroupedData, tau: float, design: Design | str) -> np.ndarray:
    """Unbiased estimate of ``g0(x_j)`` for every group.

    Fixed design: ``mean_j(Y - tau) * p(x_j)``. Random design:
    ``n^-1 sum_i (Y_i - tau) 1{X_i = x_j}``. With survey weights both use
    weighted sums and ``N`` in place of counts and ``n``.
    """
    tau = _check_tau(tau)
    wsum = grouped.weights
    wysum = np.array([g.wy for g in grouped.groups])
    return estimate_g_from_sums(grouped.counts, wsum, wysum, grouped.n, grouped.N, tau, design)


def estimate_g_clustered(
    grouped: GroupedData, tau: float, design: Design | str
) -> tuple[np.ndarray, list[ClusterStats], np.ndarray]:
    """Weighted, cluster-aware estimate of ``g0``.

    Returns ``(g_hat, per_group_stats, gamma)`` where ``gamma`` holds the
    shares used by the finite-sample bound: per-group ``gamma_{j,c}`` arrays
    for the fixed design, the global per-cluster ``gamma_c`` for the random
    design.
    """
    tau = _check_tau(tau)
    design = Design.coerce(design)
    if not grouped.has_cluster_stats:
        raise ValidationError("grouped data carries no cluster statistics")
    stats = [g.cluster_stats for g in grouped.groups]
    if any(np.any(s.weight <= 0) for s in stats):
        raise ValidationError("cluster weights must be positive")
    upsilon_sums = np.array([s.upsilon(tau).sum() for s in stats])
    if design is Design.FIXED:
        total = float(sum(s.weight.sum() for s in stats))
        g_hat = upsilon_sums / total
        gamma = [s.gamma for s in stats]
    else:
        g_hat = upsilon_sums / grouped.N
        gamma = grouped.cluster_weight / grouped.N
    return g_hat, stats, gamma
