"""Scoring rules: fixed weights, moment-based rules, reduction chain."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seedrank import (AffiliationParams, ClassMoments, DegenerateMomentsError,
                      DiscriminantModel, LandingProfile, ParameterError,
                      estimate_moments, geometric_model, heat_kernel_weights,
                      lin_sbmrank, pooled_covariance, ppr_weights, psi_two_block,
                      quad_sbmrank, rank_nodes, score, select_profile_length)


def random_profile(rng, n, K):
    probs = rng.random((n, K))
    probs /= probs.sum(axis=0, keepdims=True)
    return LandingProfile(probs=probs, seed_set=[0], K=K)


def toy_moments(a, b, sigma_a, sigma_b, pi_a=0.5):
    return ClassMoments(a=np.asarray(a, float), b=np.asarray(b, float),
                        sigma_a=np.asarray(sigma_a, float),
                        sigma_b=np.asarray(sigma_b, float), pi_a=pi_a)


class TestFixedWeights:
    def test_ppr_powers(self):
        np.testing.assert_allclose(ppr_weights(0.5, 3).w, [0.5, 0.25, 0.125])

    def test_ppr_zero_alpha(self):
        assert np.all(ppr_weights(0.0, 4).w == 0.0)

    def test_ppr_negative_alpha(self):
        np.testing.assert_allclose(ppr_weights(-0.2, 2).w, [-0.2, 0.04])

    def test_ppr_range_validated(self):
        for bad in (1.0, -1.0, 1.5):
            with pytest.raises(ParameterError):
                ppr_weights(bad, 3)

    def test_heat_kernel_t2(self):
        w = heat_kernel_weights(2.0, 2).w
        np.testing.assert_allclose(w, [2 * np.exp(-2), 2 * np.exp(-2)])
        assert w[0] == pytest.approx(0.2707, abs=1e-4)

    def test_heat_kernel_term_recurrence(self):
        t = 1.7
        w = heat_kernel_weights(t, 8).w
        for k in range(1, 8):
            assert w[k] / w[k - 1] == pytest.approx(t / (k + 1))

    def test_heat_kernel_small_t_limit(self):
        assert np.all(heat_kernel_weights(1e-9, 4).w < 1e-8)

    def test_heat_kernel_validates_t(self):
        with pytest.raises(ParameterError):
            heat_kernel_weights(0.0, 3)


class TestGeometric:
    def test_coincident_centroids(self):
        a = np.array([0.1, 0.2])
        assert np.all(geometric_model(a, a).w == 0.0)

    def test_theory_centroids_give_ppr_weights(self):
        N, K = 500, 6
        sol = psi_two_block(0.3, 0.2, N, K)
        model = geometric_model(sol.centroid_a, sol.centroid_b)
        np.testing.assert_allclose(N * model.w, 0.2 ** np.arange(1, K + 1),
                                   rtol=1e-12)


class TestLinSbmRank:
    def test_identity_covariance_reduces_to_geometric(self):
        a, b = np.array([0.3, 0.1]), np.array([0.2, 0.15])
        mom = toy_moments(a, b, np.eye(2), np.eye(2))
        np.testing.assert_allclose(lin_sbmrank(mom).w, a - b, atol=1e-12)

    def test_scalar_covariance_keeps_ordering(self):
        rng = np.random.default_rng(1)
        a, b = rng.random(3), rng.random(3)
        mom = toy_moments(a, b, 4.0 * np.eye(3), 4.0 * np.eye(3))
        lin = lin_sbmrank(mom)
        np.testing.assert_allclose(lin.w, (a - b) / 4.0, atol=1e-12)
        prof = random_profile(rng, 30, 3)
        order_lin = rank_nodes(score(lin, prof))
        order_geo = rank_nodes(score(geometric_model(a, b), prof))
        assert np.array_equal(order_lin, order_geo)

    def test_diagonal_inverse(self):
        mom = toy_moments([1.0, 1.0], [0.0, 0.0],
                          np.diag([4.0, 1.0]), np.diag([4.0, 1.0]))
        np.testing.assert_allclose(lin_sbmrank(mom).w, [0.25, 1.0])

    def test_pooled_covariance_weights_by_counts(self):
        mom = ClassMoments(a=np.zeros(2), b=np.ones(2),
                           sigma_a=np.eye(2), sigma_b=3.0 * np.eye(2),
                           pi_a=0.5, count_a=11, count_b=21)
        expected = (10 * np.eye(2) + 20 * 3.0 * np.eye(2)) / 30
        np.testing.assert_allclose(pooled_covariance(mom), expected)


class TestQuadSbmRank:
    def test_equal_covariances_reduce_to_linear(self):
        rng = np.random.default_rng(5)
        a, b = rng.random(4), rng.random(4)
        X = rng.random((4, 4))
        sigma = X @ X.T + 0.5 * np.eye(4)
        mom = toy_moments(a, b, sigma, sigma)
        quad = quad_sbmrank(mom)
        np.testing.assert_allclose(quad.W, 0.0, atol=1e-10)
        np.testing.assert_allclose(quad.w, lin_sbmrank(mom).w, rtol=1e-8)
        prof = random_profile(rng, 50, 4)
        assert np.array_equal(rank_nodes(score(quad, prof)),
                              rank_nodes(score(lin_sbmrank(mom), prof)))

    def test_identity_moments(self):
        mom = toy_moments([1.0, 0.0], [0.0, 1.0], np.eye(2), np.eye(2))
        quad = quad_sbmrank(mom)
        np.testing.assert_allclose(quad.w, [1.0, -1.0], atol=1e-12)
        np.testing.assert_allclose(quad.W, 0.0, atol=1e-12)

    def test_scalar_case(self):
        mom = toy_moments([1.0], [0.0], [[2.0]], [[1.0]])
        quad = quad_sbmrank(mom)
        assert quad.w[0] == pytest.approx(0.5)
        assert quad.W[0, 0] == pytest.approx(0.25)

    def test_w0_includes_prior_term(self):
        mom_even = toy_moments([1.0], [0.0], [[1.0]], [[1.0]], pi_a=0.5)
        mom_rare = toy_moments([1.0], [0.0], [[1.0]], [[1.0]], pi_a=0.1)
        diff = quad_sbmrank(mom_rare).w0 - quad_sbmrank(mom_even).w0
        assert diff == pytest.approx(np.log(0.1 / 0.9) - 0.0)


class TestScore:
    def test_zero_model_scores_are_offset(self):
        rng = np.random.default_rng(0)
        prof = random_profile(rng, 10, 3)
        model = DiscriminantModel(kind="geometric", w=np.zeros(3), w0=1.25)
        np.testing.assert_allclose(score(model, prof), 1.25)

    def test_uniform_profile_no_discrimination(self):
        prof = LandingProfile(probs=np.full((6, 2), 1 / 6), seed_set=[0], K=2)
        s = score(ppr_weights(0.4, 2), prof)
        assert np.ptp(s) < 1e-15

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ParameterError, match="K="):
            score(ppr_weights(0.4, 3), random_profile(rng, 5, 2))

    @settings(max_examples=50, deadline=None)
    @given(c=st.floats(1e-6, 1e6), seed=st.integers(0, 2**32 - 1))
    def test_positive_scaling_preserves_order(self, c, seed):
        rng = np.random.default_rng(seed)
        prof = random_profile(rng, 20, 3)
        w = rng.standard_normal(3)
        m1 = DiscriminantModel(kind="geometric", w=w)
        m2 = DiscriminantModel(kind="geometric", w=c * w)
        assert np.array_equal(rank_nodes(score(m1, prof)),
                              rank_nodes(score(m2, prof)))

    def test_ppr_matches_geometric_ordering_on_theory_centroids(self):
        """Orderings agree exactly on random profiles (score ties below
        1e-12 excepted); full 100-profile version runs in acceptance."""
        N, K = 64, 6
        sol = psi_two_block(0.3, 0.2, N, K)
        geo = geometric_model(sol.centroid_a, sol.centroid_b)
        ppr = ppr_weights(sol.alpha_star, K)
        rng = np.random.default_rng(123)
        for _ in range(10):
            prof = random_profile(rng, 40, K)
            assert np.array_equal(rank_nodes(score(geo, prof)),
                                  rank_nodes(score(ppr, prof)))


class TestClassMomentsValidation:
    def test_asymmetric_covariance_rejected(self):
        with pytest.raises(ParameterError, match="symmetric"):
            toy_moments([0.0], [1.0], [[1.0]], [[1.0]]).sigma_a[:] = 0  # noqa
            ClassMoments(a=np.zeros(2), b=np.ones(2),
                         sigma_a=np.array([[1.0, 0.5], [0.0, 1.0]]),
                         sigma_b=np.eye(2), pi_a=0.5)

    def test_indefinite_covariance_rejected(self):
        with pytest.raises(ParameterError, match="semidefinite"):
            ClassMoments(a=np.zeros(2), b=np.ones(2),
                         sigma_a=np.diag([1.0, -0.5]), sigma_b=np.eye(2),
                         pi_a=0.5)

    def test_pi_a_range(self):
        with pytest.raises(ParameterError, match="pi_a"):
            toy_moments([0.0], [1.0], [[1.0]], [[1.0]], pi_a=1.0)


class TestEstimateMoments:
    def test_cap_disabled_selects_K_max(self):
        aff = AffiliationParams(30, 30, 0.5, 0.2)
        mom = estimate_moments(aff, M=3, K_max=1, cond_cap=np.inf, rng_seed=0)
        assert mom.K == 1

    def test_deterministic_given_seed(self):
        aff = AffiliationParams(20, 20, 0.5, 0.2)
        m1 = estimate_moments(aff, M=4, K_max=3, rng_seed=9)
        m2 = estimate_moments(aff, M=4, K_max=3, rng_seed=9)
        np.testing.assert_array_equal(m1.a, m2.a)
        np.testing.assert_array_equal(m1.sigma_b, m2.sigma_b)

    def test_moments_track_theory_coarsely(self):
        aff = AffiliationParams(200, 200, 0.3, 0.2)
        mom = estimate_moments(aff, M=10, K_max=4, rng_seed=3)
        theory = psi_two_block(0.3, 0.2, N=200, K=mom.K)
        np.testing.assert_allclose(mom.a, theory.centroid_a, rtol=0.15)
        np.testing.assert_allclose(mom.b, theory.centroid_b, rtol=0.15)

    def test_condition_search_descends(self):
        # nearly collinear trailing coordinates force K below K_max
        sigma_good = np.eye(2)
        base = np.eye(3)
        base[2, 1] = base[1, 2] = 1.0 - 1e-14
        base[2, 2] = 1.0
        assert select_profile_length(sigma_good, sigma_good, K_max=2) == 2
        assert select_profile_length(base, base, K_max=3, cond_cap=1e10) == 2

    def test_degenerate_moments_error(self):
        zero = np.zeros((2, 2))
        with pytest.raises(DegenerateMomentsError):
            select_profile_length(zero, zero, K_max=2)

    def test_requires_two_realizations(self):
        with pytest.raises(ParameterError, match="M=2"):
            estimate_moments(AffiliationParams(10, 10, 0.5, 0.2), M=1)
