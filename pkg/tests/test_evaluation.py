"""Correlation, recall curves, quantile bands, and their tie conventions."""

import numpy as np
import pytest

from seedrank import (ParameterError, QuantileBand, labeling_from_scores,
                      pearson_correlation, quantile_bands, ranked_nodes,
                      recall_curve)


class TestPearson:
    def test_perfect_recovery(self):
        truth = np.array([1] * 5 + [0] * 5)
        assert pearson_correlation(truth, truth) == pytest.approx(1.0)

    def test_complement_after_swap_maximization(self):
        truth = np.array([1] * 5 + [0] * 5)
        assert pearson_correlation(1 - truth, truth) == pytest.approx(1.0)
        assert pearson_correlation(1 - truth, truth,
                                   swap_symmetric=False) == pytest.approx(-1.0)

    def test_zero_variance_prediction(self):
        truth = np.array([1, 1, 0, 0])
        assert pearson_correlation(np.ones(4), truth) == 0.0

    def test_null_distribution(self):
        """Random balanced predictions at n=128 over 1000 trials: the
        signed correlation averages ~0 (well under 0.05); the
        swap-maximized value has mean ~ sqrt(2/pi) * sd(r) ~ 0.071, which
        a naive reading might put under 0.05 but does not go there."""
        rng = np.random.default_rng(2024)
        truth = np.array([1] * 64 + [0] * 64)
        signed, swapped = [], []
        for _ in range(1000):
            pred = np.zeros(128, dtype=int)
            pred[rng.choice(128, size=64, replace=False)] = 1
            signed.append(pearson_correlation(pred, truth, swap_symmetric=False))
            swapped.append(pearson_correlation(pred, truth))
        assert abs(np.mean(signed)) < 0.05
        # hypergeometric-overlap null: sd(r) = 0.0887, E|r| = 0.0708
        assert np.mean(swapped) == pytest.approx(0.0708, abs=0.01)

    def test_requires_two_true_classes(self):
        with pytest.raises(ParameterError, match="two classes"):
            pearson_correlation(np.array([1, 0]), np.array([1, 1]))


class TestRankedNodes:
    def test_seeds_first_then_score_then_id(self):
        scores = np.array([0.5, 0.9, 0.5, 0.1])
        order = ranked_nodes(scores, seed_set=[3])
        assert order.tolist() == [3, 1, 0, 2]

    def test_ties_break_by_ascending_id(self):
        order = ranked_nodes(np.zeros(5))
        assert order.tolist() == [0, 1, 2, 3, 4]


class TestRecallCurve:
    def test_oracle_scorer_perfect_at_class_size(self):
        labels = np.array([1] * 4 + [2] * 6)
        scores = np.where(labels == 1, 1.0, 0.0)
        curve = recall_curve(scores, labels, {1}, seed_set=[0])
        assert curve.at(4) == 1.0
        assert curve.at(10) == 1.0

    def test_constant_scores_deterministic_by_id(self):
        labels = np.array([2, 1, 2, 1])
        curve = recall_curve(np.zeros(4), labels, {1}, seed_set=[1])
        # order: seed 1 first, then ids 0, 2, 3
        np.testing.assert_allclose(curve.recall, [0.5, 0.5, 0.5, 1.0])

    def test_monotone_and_ends_at_one(self):
        rng = np.random.default_rng(5)
        labels = rng.integers(1, 3, size=40)
        labels[:3] = 1
        scores = rng.standard_normal(40)
        curve = recall_curve(scores, labels, {1}, seed_set=[0])
        assert np.all(np.diff(curve.recall) >= -1e-15)
        assert curve.recall[-1] == 1.0

    def test_seed_counts_toward_recall(self):
        labels = np.array([1, 2, 2, 2])
        curve = recall_curve(np.zeros(4), labels, {1}, seed_set=[0])
        assert curve.at(1) == 1.0


class TestQuantileBands:
    def test_identical_samples_collapse(self):
        band = quantile_bands(np.ones((5, 3)) * 2.5)
        np.testing.assert_array_equal(band.lo, 2.5)
        np.testing.assert_array_equal(band.hi, 2.5)

    def test_nearest_rank_median(self):
        samples = np.arange(1, 1001, dtype=float).reshape(-1, 1)
        band = quantile_bands(samples, levels=(0.5, 0.5))
        assert band.lo[0] == 500.0

    def test_default_levels(self):
        samples = np.arange(1, 1001, dtype=float).reshape(-1, 1)
        band = quantile_bands(samples)
        assert band.lo[0] == 2.0  # ceil(0.0015 * 1000) = 2
        assert band.hi[0] == 999.0  # ceil(0.9985 * 1000) = 999

    def test_bands_nest(self):
        rng = np.random.default_rng(0)
        samples = rng.standard_normal((200, 4))
        inner = quantile_bands(samples, levels=(0.25, 0.75))
        outer = quantile_bands(samples, levels=(0.05, 0.95))
        assert np.all(outer.lo <= inner.lo)
        assert np.all(outer.hi >= inner.hi)

    def test_needs_two_samples(self):
        with pytest.raises(ParameterError, match="two samples"):
            quantile_bands(np.ones((1, 3)))


class TestLabelingFromScores:
    def test_top_size_with_seed_forced(self):
        scores = np.array([0.0, 0.1, 0.9, 0.8])
        mask = labeling_from_scores(scores, seed_set=[0], size=2)
        assert mask.tolist() == [True, False, True, False]
