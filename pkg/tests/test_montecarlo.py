import math

import numpy as np
import pytest

from scorebounds.data import ValidationError, group
from scorebounds.montecarlo import (
    DGPSpec,
    ExperimentReport,
    appendix_b,
    cell_probabilities,
    gen_appendixB,
    gen_kls,
    kls,
    open_uniforms,
    population_g,
    population_oracle,
    rng_for,
    run_bounds_experiment,
    run_classification_experiment,
    support_masses,
    worker_count,
)


def test_uniforms_open_interval():
    u = open_uniforms(rng_for(0, 0), 10**5)
    assert u.min() > 0 and u.max() < 1


def test_appendix_b_marginals_and_correlation():
    n = 100_000
    d = gen_appendixB(n, 1)
    for k in (1, 2):
        freq = np.array([np.mean(d.X[:, k] == v) for v in (-2, -1, 0, 1, 2)])
        assert np.all(np.abs(freq - 0.2) <= 3 * math.sqrt(0.16 / n))
    assert np.corrcoef(d.X[:, 1], d.X[:, 2])[0, 1] > 0


def test_appendix_b_masses_match_large_sample():
    g = group(gen_appendixB(400_000, 9))
    m = support_masses(appendix_b(), g.support)
    assert abs(m.sum() - 1) < 1e-12 or g.J < 25
    assert np.all(np.abs(g.masses - m) <= 4 * np.sqrt(m * (1 - m) / g.n))


def test_appendix_b_population_signs():
    o = population_oracle(appendix_b())
    expected = np.sign(0.5 + o.support[:, 1] + 2 * o.support[:, 2])
    assert np.array_equal(o.signs, expected)
    assert (o.intervals[0].lower, o.intervals[0].upper) == pytest.approx((1.5, 3.0), abs=1e-9)


def test_kls_design():
    d = gen_kls(2880, 1)
    g = group(d)
    assert g.J == 12 and np.all(g.counts == 240)
    o = population_oracle(kls())
    x = o.support
    assert np.array_equal(o.signs, np.sign(x[:, 0] + 0.4 * x[:, 1] - 3.7))
    i = [tuple(r) for r in x.tolist()].index((4.0, 1.0, 1.0))
    assert o.signs[i] == 1
    i = [tuple(r) for r in x.tolist()].index((3.0, 0.0, 1.0))
    assert o.signs[i] == -1
    with pytest.raises(ValidationError):
        gen_kls(100, 1)


def test_kls_heteroskedastic_signs_unchanged():
    assert np.array_equal(population_oracle(kls("heteroskedastic")).signs, population_oracle(kls()).signs)


def test_margin_violation():
    dgp = DGPSpec("kls", (1.0, 0.4, -3.6), "homoskedastic")
    with pytest.raises(ValidationError, match="margin assumption violated"):
        population_oracle(dgp)


def test_generation_deterministic_and_rep_specific():
    a = gen_appendixB(500, 3, rep=2)
    b = gen_appendixB(500, 3, rep=2)
    c = gen_appendixB(500, 3, rep=3)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.X, b.X)
    assert not np.array_equal(a.X, c.X)


def test_cluster_noise_keeps_marginal():
    d = gen_kls(120_000, 4, cluster_size=5, cluster_corr=0.4)
    g = group(d)
    P = cell_probabilities(kls(), g.support)
    assert np.all(np.abs(g.ybar - P) <= 4 * np.sqrt(P * (1 - P) / g.counts * (1 + 4 * 0.4)))
    assert d.clusters.max() == 120_000 // 5 - 1


def test_population_g_designs():
    g = group(gen_appendixB(2000, 1))
    fixed = population_g(appendix_b(), g, "fixed")
    rand = population_g(appendix_b(), g, "random")
    P = cell_probabilities(appendix_b(), g.support)
    assert np.allclose(fixed, (P - 0.5) * g.masses)
    assert np.all(np.sign(fixed) == np.sign(rand))


def test_single_rep_report():
    r = run_bounds_experiment(appendix_b(), 2000, 1, inference="asymptotic", design="random")
    assert r.rows[0]["std_lower"] == 0.0 and r.rows[0]["std_upper"] == 0.0
    with pytest.raises(ValidationError):
        run_bounds_experiment(appendix_b(), 2000, 0)


def test_bounds_experiment_deterministic():
    a = run_bounds_experiment(appendix_b(), 1500, 6, seed=5, inference="asymptotic")
    b = run_bounds_experiment(appendix_b(), 1500, 6, seed=5, inference="asymptotic")
    assert a.to_json() == b.to_json()


def test_parallel_equals_serial():
    a = run_bounds_experiment(appendix_b(), 1000, 4, seed=2, workers=1)
    b = run_bounds_experiment(appendix_b(), 1000, 4, seed=2, workers=2)
    assert a.to_json() == b.to_json()


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("SCOREBOUNDS_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("SCOREBOUNDS_THREADS", "lots")
    with pytest.raises(ValidationError):
        worker_count()


def test_classification_random_rule_not_worse():
    r = run_classification_experiment(kls(), 2880, 30, seed=3)
    rows = {row["rule"]: row for row in r.rows}
    assert rows["random"]["avg_pointwise"] <= rows["abstain"]["avg_pointwise"]
    for row in r.rows:
        assert 0 <= row["avg_pointwise"] <= row["uniform"] <= 1


def test_classification_trend():
    res = [run_classification_experiment(kls(), n, 150, seed=8, rules=("abstain",)).rows[0]
           for n in (2880, 5760, 8640)]
    avg = [r["avg_pointwise"] for r in res]
    se = [math.sqrt(a * (1 - a) / (150 * 12)) for a in avg]
    for k in range(2):
        assert avg[k + 1] <= avg[k] + 2 * max(se[k], se[k + 1])


def test_sample_frequency_flat():
    a = run_classification_experiment(kls(), 2880, 150, seed=4, rules=("sample-frequency",))
    b = run_classification_experiment(kls(), 8640, 150, seed=4, rules=("sample-frequency",))
    assert abs(a.rows[0]["avg_pointwise"] - b.rows[0]["avg_pointwise"]) <= 0.02


def test_report_round_trip():
    r = run_bounds_experiment(appendix_b(), 1000, 2, seed=1)
    back = ExperimentReport.from_json(r.to_json())
    assert back.to_table() == r.to_table()
    assert back.to_csv() == r.to_csv()
    meta = ExperimentReport.from_json(r.to_json(include_metadata=True))
    assert meta.runtime == pytest.approx(r.runtime)


def test_report_validation():
    with pytest.raises(ValidationError):
        ExperimentReport("bounds", {}, [{"coverage": 1.5}], 1, 0)
