import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scorebounds.data import (
    CsvSchema,
    Dataset,
    Observation,
    ParseError,
    ValidationError,
    canonicalize,
    estimate_g,
    estimate_g_clustered,
    group,
    ingest_csv,
)
from scorebounds.montecarlo import gen_appendixB, gen_kls


# ---------------------------------------------------------------------------
# ingestion


def test_two_row_file():
    d = ingest_csv(b"y,x1\n1,3.0\n0,3.2", tau=0.5)
    assert d.n == 2 and d.q == 1
    assert d.y.tolist() == [1, 0]
    assert d.X[:, 0].tolist() == [3.0, 3.2]


def test_weight_column():
    d = ingest_csv(b"y,x1,w\n1,1,2.5")
    assert d.observations[0].weight == 2.5
    assert d.covariate_names == ("x1",)


def test_outcome_out_of_range_names_row():
    with pytest.raises(ValidationError, match="line 3"):
        ingest_csv(b"y,x1\n1,1\n2,1\n")


def test_missing_cell_is_parse_error():
    with pytest.raises(ParseError, match="line 2.*x1"):
        ingest_csv(b"y,x1\n1,\n")


def test_ragged_row():
    with pytest.raises(ParseError, match="line 2"):
        ingest_csv(b"y,x1\n1,1,5\n")


def test_non_numeric_covariate():
    with pytest.raises(ParseError, match="not a number"):
        ingest_csv(b"y,x1\n1,abc\n")


@pytest.mark.parametrize("payload", [b"", b"\n\n", b"y,x1\n"])
def test_empty_inputs(payload):
    with pytest.raises(ValidationError, match="empty"):
        ingest_csv(payload)


def test_nonpositive_weight():
    with pytest.raises(ValidationError, match="weight"):
        ingest_csv(b"y,x1,w\n1,1,0\n")


def test_interval_columns_detected():
    d = ingest_csv(b"y,x1,v_lo,v_hi\n1,1,2.9,3.0\n0,1,1,2\n")
    assert d.interval_names == ("v",)
    assert d.v_lo[:, 0].tolist() == [2.9, 1.0]
    assert d.covariate_names == ("x1",)


def test_inverted_interval_rejected():
    with pytest.raises(ValidationError, match="line 2"):
        ingest_csv(b"y,x1,v_lo,v_hi\n1,1,3,2\n")


def test_cluster_labels_are_coded():
    d = ingest_csv(b"y,x1,cluster\n1,1,b\n0,1,a\n1,2,b\n")
    assert d.clusters.tolist() == [1, 0, 1]


def test_text_stream_and_schema():
    src = io.StringIO("out,a,b\n1,1,2\n0,1,3\n")
    d = ingest_csv(src, CsvSchema(outcome="out", covariates=["b"]))
    assert d.covariate_names == ("b",)
    assert d.X[:, 0].tolist() == [2.0, 3.0]


def test_path_source(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("y,x\n1,1\n")
    assert ingest_csv(p).n == 1


def test_dataset_validation():
    with pytest.raises(ValidationError):
        Dataset([1, 0], [[1.0]])
    with pytest.raises(ValidationError):
        Dataset([1], [[np.inf]])
    with pytest.raises(ValidationError):
        Dataset([1], [[1.0]], tau=1.0)
    with pytest.raises(ValidationError):
        Dataset([1], [[1.0]], weights=[-1.0])


def test_from_observations_round_trip():
    obs = [Observation(1, (1.0, 2.0)), Observation(0, (1.0, 3.0), weight=2.0, cluster="c")]
    d = Dataset.from_observations(obs)
    assert d.n == 2 and d.q == 2
    assert d.weights.tolist() == [1.0, 2.0]


# ---------------------------------------------------------------------------
# grouping


def test_four_rows_two_groups():
    g = group(Dataset([1, 0, 1, 1], [[1], [1], [2], [2]]))
    assert g.J == 2
    assert g.masses.tolist() == [0.5, 0.5]


def test_kls_and_appendix_b_group_counts():
    assert group(gen_kls(2880, 1)).J == 12
    assert group(gen_appendixB(5000, 1)).J == 25


def test_canonicalization_merges_float_noise():
    x = np.array([[0.1 + 0.2], [0.3], [-0.0], [0.0]])
    g = group(Dataset([1, 0, 1, 0], x))
    assert g.J == 2
    assert canonicalize(np.array([-0.0]))[0] == 0.0
    assert str(canonicalize(np.array([-0.0]))[0]) == "0.0"


def test_single_group_all_ones():
    g = group(Dataset([1, 1, 1], [[1], [1], [1]]))
    assert g.g_hat.tolist() == [0.5]


def test_symmetric_groups():
    g = group(Dataset([1, 1, 0, 0], [[1], [1], [2], [2]]))
    assert g.g_hat.tolist() == [0.25, -0.25]


def test_random_design_hand_example():
    # (Y - tau) 1{X = x_1} takes values (+0.5, -0.5, 0, 0)
    g = group(Dataset([1, 0, 1, 0], [[1], [1], [2], [2]], design="random"))
    assert g.s2_hat[0] == 0.125


def _random_dataset(seed, n, design="fixed", tau=0.5, weights=False, clusters=None):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(n, 2)).astype(float)
    y = rng.integers(0, 2, size=n)
    w = rng.uniform(0.5, 3, n) if weights else None
    c = rng.integers(0, clusters, n) if clusters else None
    return Dataset(y, X, weights=w, clusters=c, tau=tau, design=design)


@given(seed=st.integers(0, 10**6), n=st.integers(1, 300), tau=st.floats(0.05, 0.95))
def test_fixed_equals_random_estimate(seed, n, tau):
    d = _random_dataset(seed, n, tau=tau)
    g = group(d)
    fixed = estimate_g(g, tau, "fixed")
    rand = estimate_g(g, tau, "random")
    assert np.all(np.abs(fixed - rand) <= 4 * np.spacing(np.maximum(np.abs(fixed), 1e-300)))


@given(seed=st.integers(0, 10**6), n=st.integers(1, 300), tau=st.floats(0.05, 0.95),
       weights=st.booleans())
def test_group_invariants(seed, n, tau, weights):
    g = group(_random_dataset(seed, n, tau=tau, weights=weights))
    assert g.J == len(g.groups) <= n
    assert abs(g.masses.sum() - 1.0) <= 1e-12
    assert np.all(g.counts >= 1)
    assert np.all(g.g_hat >= -tau * g.masses - 1e-15)
    assert np.all(g.g_hat <= (1 - tau) * g.masses + 1e-15)
    assert np.all((g.sigma2_hat >= 0) & (g.sigma2_hat <= 0.25))
    assert len({tuple(x) for x in g.support.tolist()}) == g.J


@given(seed=st.integers(0, 10**6), n=st.integers(1, 300))
def test_random_design_sum_identity(seed, n):
    d = _random_dataset(seed, n, design="random", tau=0.3)
    g = group(d)
    assert g.g_hat.sum() == pytest.approx(np.mean(d.y - 0.3), abs=1e-13)


@given(seed=st.integers(0, 10**6), n=st.integers(2, 200))
def test_s2_hat_matches_direct_formula(seed, n):
    d = _random_dataset(seed, n, design="random")
    g = group(d)
    for j, x in enumerate(g.support):
        ind = np.all(d.X == x, axis=1)
        v = (d.y - 0.5) * ind
        assert g.s2_hat[j] == pytest.approx(np.mean((v - v.mean()) ** 2), abs=1e-15)


@pytest.mark.parametrize("design", ["fixed", "random"])
def test_clustered_singletons_equal_iid(design):
    d = _random_dataset(3, 150, design=design)
    g = group(d)
    g_c, _, _ = estimate_g_clustered(g, 0.5, design)
    iid = estimate_g(g, 0.5, design)
    assert np.all(np.abs(g_c - iid) <= 4 * np.spacing(np.abs(iid)))


def test_one_cluster_effective_size_one():
    d = Dataset([1, 0, 1], [[1], [2], [1]], clusters=[0, 0, 0], design="random")
    _, _, gamma = estimate_g_clustered(group(d), 0.5, "random")
    assert np.sum(gamma**2) == 1.0


def test_two_clusters_weighted_shares():
    d = Dataset([1, 0, 1, 1], [[1]] * 4, weights=[0.5, 0.5, 1.5, 1.5], clusters=[0, 0, 1, 1])
    g_hat, stats, gamma = estimate_g_clustered(group(d), 0.5, "fixed")
    assert gamma[0].tolist() == [0.25, 0.75]
    # weighted mean of (Y - tau) with one group
    expected = np.average(np.array([1, 0, 1, 1]) - 0.5, weights=[0.5, 0.5, 1.5, 1.5])
    assert g_hat[0] == pytest.approx(expected, abs=1e-15)


def test_unbiasedness_by_simulation():
    # g_0 for a two-cell design with known cell probabilities
    rng = np.random.default_rng(2024)
    p = np.array([0.3, 0.8])
    X = np.repeat([[0.0], [1.0]], [40, 60], axis=0)
    prob = np.where(X[:, 0] == 0, p[0], p[1])
    reps = np.array([group(Dataset((rng.random(100) < prob).astype(int), X)).g_hat
                     for _ in range(2000)])
    g0 = (p - 0.5) * np.array([0.4, 0.6])
    se = reps.std(axis=0) / np.sqrt(2000)
    assert np.all(np.abs(reps.mean(axis=0) - g0) <= 4 * se)
