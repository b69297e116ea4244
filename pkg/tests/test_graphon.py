import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphonsim import graphon
from graphonsim.experiments import clopper_pearson


def kernel_choices():
    return st.sampled_from(
        [
            graphon.constant(0.0),
            graphon.constant(0.5),
            graphon.constant(1.0),
            graphon.product(),
            graphon.piecewise_constant([[0.2, 0.8], [0.8, 0.4]]),
            graphon.minimum(),
        ]
    )


class TestEvaluate:
    def test_constant(self):
        assert graphon.evaluate(graphon.constant(0.5), 0.3, 0.7) == 0.5

    def test_min(self):
        assert graphon.evaluate(graphon.minimum(), 0.25, 0.75) == 0.25

    def test_product(self):
        assert graphon.evaluate(graphon.product(), 0.5, 0.5) == 0.25

    def test_rejects_out_of_domain(self):
        with pytest.raises(ValueError):
            graphon.evaluate(graphon.product(), -0.1, 0.5)
        with pytest.raises(ValueError):
            graphon.evaluate(graphon.product(), 0.1, 1.5)

    @given(kernel_choices(), st.floats(0, 1), st.floats(0, 1))
    def test_symmetric_and_in_range(self, g, u, v):
        a = graphon.evaluate(g, u, v)
        assert a == graphon.evaluate(g, v, u)
        assert 0.0 <= a <= 1.0


class TestGridGraphon:
    def test_left_closed_cells(self):
        g = graphon.piecewise_constant([[0.1, 0.2], [0.2, 0.9]])
        assert graphon.evaluate(g, 0.0, 0.0) == 0.1
        assert graphon.evaluate(g, 0.49, 0.49) == 0.1
        assert graphon.evaluate(g, 0.5, 0.5) == 0.9
        # boundary u = 1 maps into the last cell
        assert graphon.evaluate(g, 1.0, 1.0) == 0.9

    def test_rejects_asymmetric_values(self):
        with pytest.raises(ValueError, match="symmetric"):
            graphon.piecewise_constant([[0.1, 0.3], [0.2, 0.9]])

    def test_rejects_out_of_range_values(self):
        with pytest.raises(ValueError):
            graphon.piecewise_constant([[0.1, 1.3], [1.3, 0.9]])


class TestWeightMatrix:
    def test_constant_one_n2(self):
        w = graphon.weight_matrix(graphon.constant(1.0), 2)
        assert np.array_equal(w, [[0.5, 0.5], [0.5, 0.5]])

    def test_product_n2(self):
        w = graphon.weight_matrix(graphon.product(), 2)
        assert np.allclose(w, [[0.125, 0.25], [0.25, 0.5]], atol=0, rtol=0)

    def test_constant_zero(self):
        assert not graphon.weight_matrix(graphon.constant(0.0), 7).any()

    @given(kernel_choices(), st.integers(1, 40))
    def test_symmetric_and_bounded(self, g, n):
        w = graphon.weight_matrix(g, n)
        assert np.array_equal(w, w.T)
        assert w.min() >= 0.0 and w.max() <= 1.0 / n


class TestSampleAdjacency:
    def test_constant_one_all_edges(self, rng):
        s = graphon.sample_adjacency(graphon.constant(1.0), 4, 1.0, rng)
        assert np.array_equal(s.xi, np.ones((4, 4), dtype=np.int8))

    def test_constant_zero_no_edges(self, rng):
        s = graphon.sample_adjacency(graphon.constant(0.0), 4, 1.0, rng)
        assert not s.xi.any()

    @given(st.integers(1, 25), st.floats(0.05, 1.0), st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=40)
    def test_symmetric_binary(self, n, p, seed):
        s = graphon.sample_adjacency(graphon.product(), n, p, np.random.default_rng(seed))
        assert np.array_equal(s.xi, s.xi.T)
        assert set(np.unique(s.xi)) <= {0, 1}

    def test_reproducible_from_seed(self):
        a = graphon.sample_adjacency(graphon.product(), 12, 0.7, np.random.default_rng(5))
        b = graphon.sample_adjacency(graphon.product(), 12, 0.7, np.random.default_rng(5))
        assert np.array_equal(a.xi, b.xi)

    def test_rejects_bad_p(self, rng):
        with pytest.raises(ValueError):
            graphon.sample_adjacency(graphon.product(), 4, 0.0, rng)
        with pytest.raises(ValueError):
            graphon.sample_adjacency(graphon.product(), 4, 1.2, rng)

    def test_edge_frequency_matches_bernoulli_mean(self):
        # entry (1, 2) in 1-based indexing has edge probability p*G = 0.5*0.6
        reps = 10_000
        hits = 0
        for seed in range(reps):
            s = graphon.sample_adjacency(
                graphon.constant(0.6), 2, 0.5, np.random.default_rng(seed)
            )
            hits += int(s.xi[0, 1])
        lo, hi = clopper_pearson(hits, reps, 0.99)
        assert lo <= 0.30 <= hi

    def test_self_loops_flag(self, rng):
        s = graphon.sample_adjacency(graphon.constant(1.0), 6, 1.0, rng, self_loops=False)
        assert not np.diag(s.xi).any()
        assert s.xi.sum() == 30


class TestInteractionMatrices:
    def test_dense_constant_one_forces_zero_deviation(self):
        for seed in range(10):
            s = graphon.sample_adjacency(graphon.constant(1.0), 6, 1.0, np.random.default_rng(seed))
            m = graphon.interaction_matrices(s, graphon.constant(1.0))
            assert np.all(m.deviation == 0.0)

    def test_constant_zero(self, rng):
        g = graphon.constant(0.0)
        s = graphon.sample_adjacency(g, 5, 0.8, rng)
        m = graphon.interaction_matrices(s, g)
        assert not m.weights.any()
        assert np.array_equal(m.deviation, -m.mean_weights)

    def test_single_entry(self):
        s = graphon.AdjacencySample(n=1, p=1.0, xi=np.array([[1]], dtype=np.int8))
        m = graphon.interaction_matrices(s, graphon.constant(0.5))
        assert m.weights == [[1.0]]
        assert m.mean_weights == [[0.5]]
        assert m.deviation == [[0.5]]

    @given(st.integers(1, 12), st.floats(0.1, 1.0), st.integers(0, 10 ** 6))
    @settings(max_examples=30)
    def test_deviation_identity_and_entry_ranges(self, n, p, seed):
        g = graphon.minimum()
        s = graphon.sample_adjacency(g, n, p, np.random.default_rng(seed))
        m = graphon.interaction_matrices(s, g)
        assert np.array_equal(m.deviation, m.weights - m.mean_weights)
        assert set(np.unique(m.weights)) <= {0.0, 1.0 / (n * p)}
        assert m.mean_weights.min() >= 0.0 and m.mean_weights.max() <= 1.0 / n

    def test_entrywise_mean_is_centered(self):
        # sample mean of each deviation entry within 4 standard errors of 0
        n, p, reps = 3, 0.5, 10_000
        g = graphon.constant(0.5)
        acc = np.zeros((n, n))
        for seed in range(reps):
            s = graphon.sample_adjacency(g, n, p, np.random.default_rng(seed))
            acc += graphon.interaction_matrices(s, g).deviation
        mean = acc / reps
        edge = p * 0.5
        se = math.sqrt(edge * (1 - edge)) / (n * p) / math.sqrt(reps)
        assert np.all(np.abs(mean) <= 4 * se)

    def test_entry_variance_matches_closed_form(self):
        # sample variance within 5 standard errors of p*g*(1-p*g)/(n*p)^2,
        # with the standard error taken from the exact two-point moments
        n, p, reps = 3, 0.5, 10_000
        g_val = 0.5
        g = graphon.constant(g_val)
        vals = np.empty(reps)
        for seed in range(reps):
            s = graphon.sample_adjacency(g, n, p, np.random.default_rng(seed))
            vals[seed] = graphon.interaction_matrices(s, g).deviation[0, 1]
        edge = p * g_val
        sigma2 = edge * (1 - edge) / (n * p) ** 2
        hi = (1 - edge) / (n * p)
        lo = -g_val / n
        m4 = edge * hi ** 4 + (1 - edge) * lo ** 4
        var_of_var = (m4 - sigma2 ** 2 * (reps - 3) / (reps - 1)) / reps
        assert abs(vals.var(ddof=1) - sigma2) <= 5 * math.sqrt(var_of_var)


class TestSparsityRule:
    def test_dense(self):
        rule = graphon.SparsityRule("dense")
        assert rule.probability(17) == 1.0
        assert rule.degree_diverges() and rule.squared_degree_diverges()

    def test_power_law_regimes(self):
        assert graphon.SparsityRule("power_law", 0.4).degree_diverges()
        assert graphon.SparsityRule("power_law", 0.4).squared_degree_diverges()
        assert graphon.SparsityRule("power_law", 0.6).degree_diverges()
        assert not graphon.SparsityRule("power_law", 0.6).squared_degree_diverges()
        assert not graphon.SparsityRule("power_law", 1.0).degree_diverges()

    @given(st.floats(0.01, 3.0), st.integers(1, 10 ** 6))
    def test_probability_in_unit_interval(self, gamma, n):
        p = graphon.SparsityRule("power_law", gamma).probability(n)
        assert 0.0 < p <= 1.0

    def test_rejects_unknown_form(self):
        with pytest.raises(ValueError):
            graphon.SparsityRule("banded")


def test_adjacency_csv_roundtrip(tmp_path, rng):
    s = graphon.sample_adjacency(graphon.product(), 8, 0.9, rng)
    path = tmp_path / "adj.csv"
    graphon.save_adjacency_csv(s, path)
    back = np.loadtxt(path, delimiter=",", dtype=int)
    assert np.array_equal(back, s.xi)
