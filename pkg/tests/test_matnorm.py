import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphonsim import graphon, matnorm
from graphonsim.experiments import ExperimentConfig, clopper_pearson, deviation_norms


def brute_force_norm(a: np.ndarray) -> float:
    """Independent oracle: enumerate both sign vectors."""
    n = a.shape[0]
    best = -math.inf
    for x in itertools.product([-1.0, 1.0], repeat=n):
        for y in itertools.product([-1.0, 1.0], repeat=n):
            best = max(best, float(np.array(x) @ a @ np.array(y)))
    return best


class TestExactNorm:
    def test_zero_matrix(self):
        assert matnorm.norm_inf_to_1_exact(np.zeros((5, 5))) == 0.0

    def test_identity_n2(self):
        assert matnorm.norm_inf_to_1_exact(np.eye(2)) == 2.0

    def test_signed_checkerboard(self):
        got = matnorm.norm_inf_to_1_exact(np.array([[1.0, -1.0], [-1.0, 1.0]]))
        assert got == brute_force_norm(np.array([[1.0, -1.0], [-1.0, 1.0]])) == 4.0

    @given(st.integers(1, 6), st.integers(0, 10 ** 6))
    @settings(max_examples=40)
    def test_matches_double_enumeration(self, n, seed):
        a = np.random.default_rng(seed).standard_normal((n, n))
        assert matnorm.norm_inf_to_1_exact(a) == pytest.approx(brute_force_norm(a), abs=1e-12)

    def test_size_cap_redirects_to_heuristic(self):
        with pytest.raises(ValueError, match="heuristic"):
            matnorm.norm_inf_to_1_exact(np.zeros((23, 23)))

    def test_transpose_symmetry(self, rng):
        # the bilinear sup is transpose-invariant; the two enumerations sum
        # in different orders, so allow float-reordering slack
        for _ in range(10):
            a = rng.standard_normal((7, 7))
            got, swapped = matnorm.norm_inf_to_1_exact(a), matnorm.norm_inf_to_1_exact(a.T)
            assert got == pytest.approx(swapped, rel=1e-13)

    @given(st.floats(-4, 4), st.integers(0, 10 ** 6))
    @settings(max_examples=25)
    def test_absolute_homogeneity(self, lam, seed):
        a = np.random.default_rng(seed).standard_normal((5, 5))
        got = matnorm.norm_inf_to_1_exact(lam * a)
        assert got == pytest.approx(abs(lam) * matnorm.norm_inf_to_1_exact(a), abs=1e-12)

    def test_absolute_sum_bound_with_equality_for_nonnegative(self, rng):
        for _ in range(50):
            a = rng.random((6, 6))
            norm = matnorm.norm_inf_to_1_exact(a)
            assert norm <= a.sum() + 1e-12
            assert norm == pytest.approx(np.abs(a).sum(), abs=1e-12)
        signed = rng.standard_normal((6, 6))
        assert matnorm.norm_inf_to_1_exact(signed) <= np.abs(signed).sum() + 1e-12


class TestHeuristic:
    def test_zero_matrix(self, rng):
        assert matnorm.norm_inf_to_1_heuristic(np.zeros((8, 8)), 5, rng) == 0.0

    def test_identity_n10(self, rng):
        # enumeration oracle confirms the optimum is n
        assert matnorm.norm_inf_to_1_heuristic(np.eye(10), 50, rng) == 10.0

    def test_never_exceeds_exact_and_usually_close(self):
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 13))
            a = rng.standard_normal((n, n))
            exact = matnorm.norm_inf_to_1_exact(a)
            lower = matnorm.norm_inf_to_1_heuristic(a, 50, rng)
            assert lower <= exact + 1e-9
            hits += lower >= 0.9 * exact
        assert hits >= 95

    def test_restart_count_validated(self, rng):
        with pytest.raises(ValueError):
            matnorm.norm_inf_to_1_heuristic(np.eye(3), 0, rng)


class TestGramNorm:
    def test_zero(self):
        assert matnorm.gram_norm(np.zeros((4, 4))) == 0.0

    def test_identity_gram_is_identity(self):
        assert matnorm.gram_norm(np.eye(2)) == 2.0

    def test_equals_exact_norm_of_gram_matrix(self, rng):
        a = rng.standard_normal((8, 8))
        assert matnorm.gram_norm(a) == matnorm.norm_inf_to_1_exact(a.T @ a)

    def test_heuristic_backend_bounded_by_exact(self, rng):
        a = rng.standard_normal((8, 8))
        lo = matnorm.gram_norm(a, method="heuristic", restarts=20, rng=rng)
        assert lo <= matnorm.gram_norm(a, method="exact") + 1e-9


class TestCutnormTailBound:
    def test_vanishing_threshold_gives_one(self):
        assert matnorm.cutnorm_tail_bound(1e-12, 10, 1.0) == pytest.approx(1.0)

    def test_direct_substitution(self):
        assert matnorm.cutnorm_tail_bound(1.0, 10, 1.0) == math.exp(-300.0 / 7.0)
        assert matnorm.cutnorm_tail_bound(0.5, 20, 0.25) == pytest.approx(
            math.exp(-300.0 / 26.0), rel=1e-15
        )

    def test_domain(self):
        with pytest.raises(ValueError):
            matnorm.cutnorm_tail_bound(0.0, 10, 1.0)
        with pytest.raises(ValueError):
            matnorm.cutnorm_tail_bound(11.0, 10, 1.0)
        with pytest.raises(ValueError):
            matnorm.cutnorm_tail_bound(1.0, 10, 0.0)

    @given(st.floats(0.01, 5.0), st.floats(0.02, 5.0), st.integers(5, 100), st.floats(0.05, 1.0))
    @settings(max_examples=40)
    def test_probability_and_monotone(self, eta1, eta2, n, p):
        eta1, eta2 = sorted((min(eta1, n), min(eta2, n)))
        b1 = matnorm.cutnorm_tail_bound(eta1, n, p)
        b2 = matnorm.cutnorm_tail_bound(eta2, n, p)
        assert 0.0 <= b2 <= b1 <= 1.0


class TestGramTailBound:
    def test_direct_substitution(self):
        assert matnorm.gram_tail_bound(1.0, 100, 1.0) == 3e4 * math.exp(-200.0 / 13.0)
        assert matnorm.gram_tail_bound(2.0, 1000, 0.5) == 3e6 * math.exp(-8.0 * 1000.0 * 0.0625 / 17.0)

    def test_vanishing_p_limit_is_prefactor(self):
        assert matnorm.gram_tail_bound(1.0, 100, 1e-9) == pytest.approx(3e4)

    def test_not_clamped(self):
        assert matnorm.gram_tail_bound(0.1, 1000, 0.01) > 1.0

    def test_domain(self):
        with pytest.raises(ValueError):
            matnorm.gram_tail_bound(0.0, 10, 0.5)
        with pytest.raises(ValueError):
            matnorm.gram_tail_bound(1.0, 10, 1.5)


class TestConcentrationTailBound:
    def test_w1_weight_substitution(self):
        params = matnorm.BoundParams(delta=1.0, big_k=1.0)
        assert matnorm.concentration_tail_bound("w1_weight", 0.5, 100, params) == 2.0 * math.exp(-6.25)

    def test_dense_w2_substitution(self):
        params = matnorm.BoundParams(delta=1.0, big_k=1.0)
        assert matnorm.concentration_tail_bound("w2_sparse_dense", 1.0, 100, params) == math.exp(-50.0)

    def test_sparse_w2_needs_p(self):
        params = matnorm.BoundParams()
        with pytest.raises(ValueError, match="sparsity"):
            matnorm.concentration_tail_bound("w2_sparse", 1.0, 100, params)

    @given(st.sampled_from(matnorm.TAIL_BOUND_KINDS), st.integers(10, 500))
    @settings(max_examples=30)
    def test_monotone_nonincreasing_and_vanishing(self, kind, n):
        params = matnorm.BoundParams(delta=0.7, big_k=1.3)
        grid = np.linspace(0.05, 8.0, 25)
        values = [matnorm.concentration_tail_bound(kind, a, n, params, p=0.5) for a in grid]
        assert all(v1 >= v2 for v1, v2 in zip(values, values[1:]))
        assert matnorm.concentration_tail_bound(kind, 1e4, n, params, p=0.5) < 1e-8

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            matnorm.concentration_tail_bound("w3_weight", 1.0, 10, matnorm.BoundParams())


class TestBernsteinBound:
    def test_direct_substitution(self):
        assert matnorm.bernstein_bound(1.0, 1.0, 1.0) == math.exp(-3.0 / 8.0)

    def test_degenerate_limit(self):
        assert matnorm.bernstein_bound(1.0, 0.0, 1e-12) < 1e-200

    def test_monotone_in_u(self):
        grid = np.linspace(0.1, 10.0, 50)
        values = [matnorm.bernstein_bound(u, 2.0, 0.5) for u in grid]
        assert all(v1 >= v2 for v1, v2 in zip(values, values[1:]))

    def test_domain(self):
        for bad in [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)]:
            with pytest.raises(ValueError):
                matnorm.bernstein_bound(*bad)


def test_bound_params_positive():
    with pytest.raises(ValueError):
        matnorm.BoundParams(delta=0.0)
    with pytest.raises(ValueError):
        matnorm.BoundParams(big_k=-1.0)


class TestEmpiricalCutnormConcentration:
    """Monte Carlo frequency of {norm/n > eta} against the closed-form bound.

    The n=12 frequencies at eta >= 0.3 sit far below the bound. At eta = 0.2
    the bound (0.0616) is exceeded by the true frequency (~0.53): the
    closed-form expression carries no union over the 2^n sign vectors, so at
    this size it undershoots the actual tail; it only dominates once n is
    large. The strict xfail documents that gap.
    """

    @pytest.fixture(scope="class")
    @staticmethod
    def norms():
        cfg = ExperimentConfig(
            graphon_name="constant",
            graphon_params=(("value", 0.5),),
            sparsity_form="dense",
            n_list=(12,),
            n_ref=64,
            replications=2000,
            master_seed=20240811,
        )
        return deviation_norms(cfg, 12)

    @pytest.mark.parametrize(
        "eta",
        [
            pytest.param(
                0.2,
                marks=pytest.mark.xfail(
                    strict=True, reason="stated bound lacks the sign-vector union factor at n=12"
                ),
            ),
            0.3,
            0.4,
        ],
    )
    def test_frequency_below_bound(self, norms, eta):
        exceed = int(np.sum(norms > eta))
        lo, _ = clopper_pearson(exceed, len(norms), 0.99)
        assert lo <= matnorm.cutnorm_tail_bound(eta, 12, 1.0)
