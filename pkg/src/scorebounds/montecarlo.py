"""Simulation designs and replication harnesses.

Two designs are provided: a three-coefficient model on a 5 x 5 grid of
quantile-binned correlated normals, and a 6 x 2 grade/internship design with
equal cells. Every replication draws from its own Philox stream keyed by
``(seed, rep)``, so results do not depend on execution order and replications
can be farmed out to worker processes.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad

from .bounds import BoundInterval, BoundsSpec, build_constraints, interval_from_constraints, screen
from .classify import Outcome, classify_abstain, classify_random, classify_sample_frequency
from .confidence import halfwidths, inv_norm_cdf, norm_cdf
from .data import Dataset, Design, ValidationError, group

__all__ = [
    "DGPSpec",
    "appendix_b",
    "kls",
    "rng_for",
    "open_uniforms",
    "standard_normals",
    "gen_appendixB",
    "gen_kls",
    "generate",
    "PopulationOracle",
    "population_oracle",
    "cell_probabilities",
    "population_g",
    "support_masses",
    "BoundsRep",
    "run_bounds_rep",
    "run_bounds_experiment",
    "run_classification_experiment",
    "ExperimentReport",
    "worker_count",
]

BIN_CUTS_P = (0.2, 0.4, 0.6, 0.8)
W_CORR = 0.25
GRID = (-2.0, -1.0, 0.0, 1.0, 2.0)
GPA_LEVELS = (3.0, 3.2, 3.4, 3.6, 3.8, 4.0)
MARGIN_TOL = 1e-12


@dataclass(frozen=True)
class DGPSpec:
    """A simulation design with an analytic noise law.

    ``noise`` names the scale function ``sigma(x)``; ``target`` is the index
    of the coefficient whose bounds are reported, or ``None`` to bound
    ``x_j'b`` at every support point.
    """

    name: str
    beta0: tuple[float, ...]
    noise: str
    tau: float = 0.5
    normalized_index: int = 0
    target: int | None = None
    box: tuple[float, float] = (-10.0, 10.0)

    def __post_init__(self) -> None:
        if self.name not in ("appendixB", "kls"):
            raise ValidationError(f"unknown scenario {self.name!r}")
        if self.noise not in ("heteroskedastic", "homoskedastic"):
            raise ValidationError(f"unknown noise mode {self.noise!r}")

    @property
    def support(self) -> np.ndarray:
        if self.name == "appendixB":
            return np.array([(1.0, a, b) for a in GRID for b in GRID])
        return np.array([(g, t, 1.0) for g in GPA_LEVELS for t in (0.0, 1.0)])

    def sigma(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.name == "appendixB":
            return 0.15 * (1.0 + (X[:, 1] + X[:, 2]) ** 2)
        if self.noise == "homoskedastic":
            return np.full(X.shape[0], 0.5)
        return 0.2 * (1.0 + (X[:, 0] / 3.0 + X[:, 1]) ** 2)

    def bounds_specs(self) -> list[BoundsSpec]:
        if self.target is not None:
            r = np.zeros(len(self.beta0))
            r[self.target] = 1.0
            return [BoundsSpec(r, self.box, self.normalized_index)]
        return [BoundsSpec(x, self.box, self.normalized_index) for x in self.support]


def appendix_b() -> DGPSpec:
    return DGPSpec("appendixB", (0.5, 1.0, 2.0), "heteroskedastic", normalized_index=1, target=2)


def kls(noise: str = "homoskedastic") -> DGPSpec:
    return DGPSpec("kls", (1.0, 0.4, -3.7), noise, normalized_index=0, target=None)


# ---------------------------------------------------------------------------
# random numbers


def rng_for(seed: int, rep: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for replication ``rep``; ``stream`` separates independent uses."""
    key = [int(seed), int(rep)] + ([int(stream)] if stream else [])
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def open_uniforms(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1) with 53-bit resolution."""
    k = rng.integers(0, 2**53, size=size, dtype=np.int64)
    return (k + 0.5) / 2.0**53


def standard_normals(rng: np.random.Generator, size) -> np.ndarray:
    return inv_norm_cdf(open_uniforms(rng, size))


# ---------------------------------------------------------------------------
# data generation


def _cluster_labels(n: int, cluster_size: int | None) -> np.ndarray | None:
    if cluster_size is None:
        return None
    if cluster_size < 1:
        raise ValidationError("cluster_size must be positive")
    return np.arange(n) // cluster_size


def _noise(rng, n: int, cluster_size: int | None, cluster_corr: float) -> np.ndarray:
    """Standard normal noise; with clusters, a shared component induces correlation."""
    v = standard_normals(rng, n)
    if cluster_size is None or cluster_corr == 0.0:
        return v
    if not 0.0 <= cluster_corr < 1.0:
        raise ValidationError("cluster_corr must lie in [0, 1)")
    labels = _cluster_labels(n, cluster_size)
    shared = standard_normals(rng, int(labels[-1]) + 1)[labels]
    return math.sqrt(cluster_corr) * shared + math.sqrt(1.0 - cluster_corr) * v


def gen_appendixB(n: int, seed: int, rep: int = 0, design: Design | str = "fixed",
                  cluster_size: int | None = None, cluster_corr: float = 0.0,
                  dgp: DGPSpec | None = None) -> Dataset:
    """Binned correlated-normal design with heteroskedastic probit noise."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    dgp = dgp or appendix_b()
    rng = rng_for(seed, rep)
    z = standard_normals(rng, (n, 2))
    w1 = z[:, 0]
    w2 = W_CORR * z[:, 0] + math.sqrt(1.0 - W_CORR**2) * z[:, 1]
    cuts = inv_norm_cdf(np.array(BIN_CUTS_P))
    x1 = np.searchsorted(cuts, w1, side="left") - 2.0
    x2 = np.searchsorted(cuts, w2, side="left") - 2.0
    X = np.column_stack([np.ones(n), x1, x2])
    v = _noise(rng, n, cluster_size, cluster_corr)
    y = (X @ np.asarray(dgp.beta0) + dgp.sigma(X) * v >= 0).astype(np.int8)
    return Dataset(y, X, clusters=_cluster_labels(n, cluster_size), tau=dgp.tau,
                   design=design, covariate_names=("const", "x1", "x2"))


def gen_kls(n: int, seed: int, noise_mode: str = "homoskedastic", rep: int = 0,
            design: Design | str = "fixed", cluster_size: int | None = None,
            cluster_corr: float = 0.0) -> Dataset:
    """Grade/internship design with ``n / 12`` rows in each of the 12 cells."""
    if n < 12 or n % 12:
        raise ValidationError(f"n must be a positive multiple of 12 for equal cells, got {n}")
    dgp = kls(noise_mode)
    X = np.repeat(dgp.support, n // 12, axis=0)
    rng = rng_for(seed, rep)
    v = _noise(rng, n, cluster_size, cluster_corr)
    y = (X @ np.asarray(dgp.beta0) + dgp.sigma(X) * v >= 0).astype(np.int8)
    return Dataset(y, X, clusters=_cluster_labels(n, cluster_size), tau=dgp.tau,
                   design=design, covariate_names=("GPA", "TopInternship", "const"))


def generate(dgp: DGPSpec, n: int, seed: int, rep: int = 0, design: Design | str = "fixed",
             cluster_size: int | None = None, cluster_corr: float = 0.0) -> Dataset:
    if dgp.name == "appendixB":
        return gen_appendixB(n, seed, rep, design, cluster_size, cluster_corr, dgp)
    return gen_kls(n, seed, dgp.noise, rep, design, cluster_size, cluster_corr)


# ---------------------------------------------------------------------------
# population quantities


def cell_probabilities(dgp: DGPSpec, support: np.ndarray | None = None) -> np.ndarray:
    """``P(Y = 1 | X = x_j) = Phi(x_j'beta / sigma(x_j))``."""
    support = dgp.support if support is None else np.atleast_2d(support)
    return norm_cdf(support @ np.asarray(dgp.beta0) / dgp.sigma(support))


def _appendix_b_masses() -> dict[tuple[float, float], float]:
    edges = np.concatenate([[-np.inf], inv_norm_cdf(np.array(BIN_CUTS_P)), [np.inf]])
    s = math.sqrt(1.0 - W_CORR**2)
    out = {}
    for i, a in enumerate(GRID):
        for k, b in enumerate(GRID):
            lo2, hi2 = edges[k], edges[k + 1]

            def inner(w1, lo2=lo2, hi2=hi2):
                return math.exp(-0.5 * w1 * w1) / math.sqrt(2 * math.pi) * (
                    float(norm_cdf((hi2 - W_CORR * w1) / s)) - float(norm_cdf((lo2 - W_CORR * w1) / s)))

            val, _ = quad(inner, edges[i], edges[i + 1], epsabs=1e-13, epsrel=1e-12, limit=200)
            out[(a, b)] = val
    return out


_MASS_CACHE: dict[str, dict] = {}


def support_masses(dgp: DGPSpec, support: np.ndarray | None = None) -> np.ndarray:
    """Population probabilities of the support points."""
    support = dgp.support if support is None else np.atleast_2d(support)
    if dgp.name == "kls":
        return np.full(support.shape[0], 1.0 / 12.0)
    if "appendixB" not in _MASS_CACHE:
        _MASS_CACHE["appendixB"] = _appendix_b_masses()
    table = _MASS_CACHE["appendixB"]
    return np.array([table[(float(x[1]), float(x[2]))] for x in support])


def population_g(dgp: DGPSpec, grouped, design: Design | str) -> np.ndarray:
    """``g_0`` at the observed groups.

    The fixed design conditions on the realized covariates, so the mass of a
    group is its sample share; the random design uses population masses.
    """
    P = cell_probabilities(dgp, grouped.support)
    if Design.coerce(design) is Design.FIXED:
        return (P - dgp.tau) * grouped.masses
    return (P - dgp.tau) * support_masses(dgp, grouped.support)


@dataclass
class PopulationOracle:
    support: np.ndarray
    probs: np.ndarray
    signs: np.ndarray
    intervals: list[BoundInterval]


def population_oracle(dgp: DGPSpec) -> PopulationOracle:
    """Exact sign pattern and identified intervals of the design."""
    support = dgp.support
    P = cell_probabilities(dgp, support)
    gap = P - dgp.tau
    if np.any(np.abs(gap) < MARGIN_TOL):
        j = int(np.flatnonzero(np.abs(gap) < MARGIN_TOL)[0])
        raise ValidationError(f"margin assumption violated at support point {support[j].tolist()}")
    signs = np.sign(gap).astype(int)
    intervals = []
    for spec in dgp.bounds_specs():
        A, senses, rhs = build_constraints(support, signs, spec)
        intervals.append(interval_from_constraints(A, senses, rhs, spec))
    return PopulationOracle(support, P, signs, intervals)


# ---------------------------------------------------------------------------
# parallel map


def worker_count() -> int:
    """Worker processes allowed by ``SCOREBOUNDS_THREADS`` (default 1)."""
    raw = os.environ.get("SCOREBOUNDS_THREADS", "1")
    try:
        k = int(raw)
    except ValueError as exc:
        raise ValidationError(f"SCOREBOUNDS_THREADS must be an integer, got {raw!r}") from exc
    return max(1, min(k, os.cpu_count() or 1))


def _pmap(fn, args: list, workers: int | None = None) -> list:
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(args) < 2:
        return [fn(a) for a in args]
    chunk = max(1, len(args) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, args, chunksize=chunk))


# ---------------------------------------------------------------------------
# bounds experiments


@dataclass(frozen=True)
class BoundsTask:
    dgp: DGPSpec
    n: int
    seed: int
    rep: int
    alpha: float
    inference: str
    design: str
    cluster_size: int | None
    cluster_corr: float


@dataclass(frozen=True)
class BoundsRep:
    lower: float
    upper: float
    feasible: bool
    covers_interval: bool
    covers_g: bool
    lower_binding: bool
    upper_binding: bool


def run_bounds_rep(task: BoundsTask, population: tuple[float, float] | None = None) -> BoundsRep:
    data = generate(task.dgp, task.n, task.seed, task.rep, task.design,
                    task.cluster_size, task.cluster_corr)
    grouped = group(data)
    cluster = task.cluster_size is not None
    hw = halfwidths(grouped, task.alpha, task.inference, task.design, cluster=cluster)
    g0 = population_g(task.dgp, grouped, task.design)
    covers_g = bool(np.all(np.abs(grouped.g_hat - g0) <= hw.s))
    spec = task.dgp.bounds_specs()[0]
    d = screen(grouped.g_hat, hw)
    A, senses, rhs = build_constraints(grouped.support, d, spec)
    iv = interval_from_constraints(A, senses, rhs, spec)
    if population is None:
        pop = population_oracle(task.dgp).intervals[0]
        population = (pop.lower, pop.upper)
    covers = iv.feasible and iv.lower <= population[0] + 1e-9 and iv.upper >= population[1] - 1e-9
    return BoundsRep(iv.lower if iv.feasible else float("nan"),
                     iv.upper if iv.feasible else float("nan"),
                     iv.feasible, bool(covers), covers_g, iv.lower_binding, iv.upper_binding)


def _bounds_worker(args):
    task, population = args
    return run_bounds_rep(task, population)


def run_bounds_experiment(dgp: DGPSpec, n: int, reps: int, alpha: float = 0.05,
                          inference: str = "finite", design: str = "fixed", seed: int = 0,
                          cluster_size: int | None = None, cluster_corr: float = 0.0,
                          workers: int | None = None) -> "ExperimentReport":
    """Mean, spread and coverage of the estimated bounds over ``reps`` samples.

    Coverage is the share of replications whose interval contains the
    population interval; ``g_coverage`` is the share whose confidence
    rectangle contains ``g_0``. Standard deviations use the ``1/reps``
    divisor so a single replication reports zero spread.
    """
    if reps < 1:
        raise ValidationError("reps must be at least 1")
    if dgp.target is None:
        raise ValidationError("bounds experiments need a single target coefficient")
    start = time.perf_counter()
    pop = population_oracle(dgp).intervals[0]
    population = (pop.lower, pop.upper)
    tasks = [(BoundsTask(dgp, n, seed, rep, alpha, inference, design, cluster_size, cluster_corr),
              population) for rep in range(reps)]
    results = _pmap(_bounds_worker, tasks, workers)
    lo = np.array([r.lower for r in results])
    hi = np.array([r.upper for r in results])
    ok = np.array([r.feasible for r in results])
    row = {
        "n": n,
        "mean_lower": float(np.mean(lo[ok])) if ok.any() else float("nan"),
        "mean_upper": float(np.mean(hi[ok])) if ok.any() else float("nan"),
        "std_lower": float(np.std(lo[ok])) if ok.any() else float("nan"),
        "std_upper": float(np.std(hi[ok])) if ok.any() else float("nan"),
        "coverage": float(np.mean([r.covers_interval for r in results])),
        "g_coverage": float(np.mean([r.covers_g for r in results])),
        "infeasible": int(np.sum(~ok)),
        "upper_box_binding": float(np.mean([r.upper_binding for r in results])),
    }
    settings = {
        "scenario": dgp.name, "noise": dgp.noise, "alpha": alpha, "inference": inference,
        "design": design, "cluster_size": cluster_size, "cluster_corr": cluster_corr,
        "population": [pop.lower, pop.upper],
    }
    return ExperimentReport("bounds", settings, [row], reps, seed,
                            runtime=time.perf_counter() - start)


# ---------------------------------------------------------------------------
# classification experiments

RULES = ("abstain", "random", "sample-frequency")

# display order of report columns; serialization order does not matter
COLUMN_ORDER = ("n", "rule", "mean_lower", "mean_upper", "std_lower", "std_upper", "coverage",
                "g_coverage", "infeasible", "upper_box_binding", "avg_pointwise", "uniform")


@dataclass(frozen=True)
class ClassifyTask:
    dgp: DGPSpec
    n: int
    seed: int
    rep: int
    alpha: float
    rules: tuple[str, ...]
    oracle: dict = field(hash=False)


def _classify_worker(task: ClassifyTask) -> dict[str, np.ndarray]:
    data = generate(task.dgp, task.n, task.seed, task.rep, "fixed")
    grouped = group(data)
    hw = halfwidths(grouped, task.alpha, "asymptotic", "fixed")
    d = screen(grouped.g_hat, hw)
    support = task.dgp.support
    # the randomization bit is drawn after the data so both classifiers share it
    r_bits = rng_for(task.seed, task.rep, stream=1).integers(0, 2, size=support.shape[0])
    pop_lo, pop_hi = task.oracle["lower"], task.oracle["upper"]
    # align sample groups with the design support
    index = {tuple(x): j for j, x in enumerate(grouped.support.tolist())}
    f_hat = np.array([grouped.ybar[index[tuple(x)]] - task.dgp.tau if tuple(x) in index else 0.0
                      for x in support.tolist()])
    estimated = []
    for spec in task.dgp.bounds_specs():
        A, senses, rhs = build_constraints(grouped.support, d, spec)
        estimated.append(interval_from_constraints(A, senses, rhs, spec))
    out = {}
    for rule in task.rules:
        miss = np.zeros(support.shape[0], dtype=bool)
        for j, iv in enumerate(estimated):
            pop = (pop_lo[j], pop_hi[j])
            bit = int(r_bits[j])
            if rule == "abstain":
                truth = classify_abstain(pop).outcome
                est = classify_abstain(iv).outcome if iv.feasible else Outcome.ABSTAIN
            elif rule == "random":
                truth = classify_random(pop, bit).outcome
                est = classify_random(iv, bit).outcome if iv.feasible else \
                    (Outcome.ONE if bit else Outcome.ZERO)
            else:
                truth = classify_random(pop, bit).outcome
                est = classify_sample_frequency(f_hat[j], bit).outcome
            miss[j] = truth is not est
        out[rule] = miss
    return out


def run_classification_experiment(dgp: DGPSpec, n: int, reps: int, alpha: float = 0.05,
                                  rules=RULES, seed: int = 0,
                                  workers: int | None = None) -> "ExperimentReport":
    """Disagreement between sample and population classifications.

    The sample side uses fixed-design asymptotic half-widths. The population
    side applies the same rule to the identified intervals; the
    sample-frequency rule is compared with the population random rule, both
    sharing one fair bit per support point and replication.
    """
    if reps < 1:
        raise ValidationError("reps must be at least 1")
    rules = tuple(rules)
    for rule in rules:
        if rule not in RULES:
            raise ValidationError(f"rule must be one of {RULES}, got {rule!r}")
    start = time.perf_counter()
    oracle = population_oracle(dgp)
    o = {"lower": [iv.lower for iv in oracle.intervals], "upper": [iv.upper for iv in oracle.intervals]}
    tasks = [ClassifyTask(dgp, n, seed, rep, alpha, rules, o) for rep in range(reps)]
    results = _pmap(_classify_worker, tasks, workers)
    rows = []
    for rule in rules:
        miss = np.array([r[rule] for r in results])
        rows.append({
            "n": n,
            "rule": rule,
            "avg_pointwise": float(miss.mean()),
            "uniform": float(miss.any(axis=1).mean()),
        })
    settings = {"scenario": dgp.name, "noise": dgp.noise, "alpha": alpha,
                "inference": "asymptotic", "design": "fixed"}
    return ExperimentReport("classification", settings, rows, reps, seed,
                            runtime=time.perf_counter() - start)


# ---------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    """Result rows plus the settings that produced them.

    ``runtime`` is kept out of the canonical JSON so identical runs serialize
    identically; pass ``include_metadata=True`` to record it.
    """

    kind: str
    settings: dict
    rows: list[dict]
    reps: int
    seed: int
    runtime: float = 0.0

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValidationError("reps must be at least 1")
        for row in self.rows:
            for key in ("coverage", "g_coverage", "avg_pointwise", "uniform"):
                if key in row and not 0.0 <= row[key] <= 1.0:
                    raise ValidationError(f"{key} must lie in [0, 1], got {row[key]}")

    def to_dict(self, include_metadata: bool = False) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "runtime"}
        out["rows"] = [{k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                        for k, v in row.items()} for row in out["rows"]]
        if include_metadata:
            out["metadata"] = {"runtime_seconds": self.runtime}
        return out

    def to_json(self, include_metadata: bool = False) -> str:
        return json.dumps(self.to_dict(include_metadata), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentReport":
        meta = payload.get("metadata") or {}
        return cls(payload["kind"], payload["settings"], payload["rows"], payload["reps"],
                   payload["seed"], runtime=meta.get("runtime_seconds", 0.0))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))

    @staticmethod
    def merge(reports: list["ExperimentReport"]) -> "ExperimentReport":
        first = reports[0]
        rows = [row for r in reports for row in r.rows]
        return ExperimentReport(first.kind, first.settings, rows, first.reps, first.seed,
                                runtime=sum(r.runtime for r in reports))

    def columns(self) -> list[str]:
        keys = {k for row in self.rows for k in row}
        known = [c for c in COLUMN_ORDER if c in keys]
        return known + sorted(keys - set(known))

    def to_table(self) -> str:
        cols = self.columns()
        cells = [[_fmt(row.get(c)) for c in cols] for row in self.rows]
        widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(cols)]
        lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
        lines.append("  ".join("-" * w for w in widths))
        lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
        return "\n".join(lines)

    def to_csv(self) -> str:
        cols = self.columns()
        lines = [",".join(cols)]
        lines += [",".join(_fmt(row.get(c)) for c in cols) for row in self.rows]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)
