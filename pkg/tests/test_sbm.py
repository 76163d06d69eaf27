"""Generator, parameter validation, and graph serialization."""

import json

import numpy as np
import pytest

from seedrank import (AffiliationParams, ParameterError, SbmParams,
                      affiliation_to_sbm, expected_degree, generate,
                      graph_from_edges, load_graph, save_graph)

FIG1_PI = [491 / 2048, 532 / 2048, 471 / 2048, 554 / 2048]
FIG1_P = [
    [0.40, 0.15, 0.08, 0.04],
    [0.15, 0.38, 0.04, 0.08],
    [0.06, 0.08, 0.37, 0.16],
    [0.06, 0.04, 0.18, 0.36],
]


def fig1_params(directed=True):
    P = np.array(FIG1_P)
    if not directed:
        P = 0.5 * (P + P.T)
    return SbmParams(n=2048, pi=np.array(FIG1_PI), P=P, directed=directed)


class TestValidation:
    def test_pi_must_sum_to_one(self):
        with pytest.raises(ParameterError, match="sum to 1"):
            SbmParams(n=10, pi=np.array([0.6, 0.3]), P=np.full((2, 2), 0.1))

    def test_no_empty_blocks(self):
        with pytest.raises(ParameterError, match="at least one node"):
            SbmParams(n=10, pi=np.array([0.99, 0.01]), P=np.full((2, 2), 0.1))

    def test_undirected_needs_symmetric_P(self):
        with pytest.raises(ParameterError, match="symmetric"):
            SbmParams(n=10, pi=np.array([0.5, 0.5]),
                      P=np.array([[0.5, 0.1], [0.2, 0.5]]))

    def test_directed_allows_asymmetric_P(self):
        fig1_params(directed=True)  # should not raise

    def test_P_range_checked(self):
        with pytest.raises(ParameterError, match=r"\[0, 1\]"):
            SbmParams(n=10, pi=np.array([1.0]), P=np.array([[1.5]]))

    def test_P_shape_checked(self):
        with pytest.raises(ParameterError, match="2x2"):
            SbmParams(n=10, pi=np.array([0.5, 0.5]), P=np.array([[0.1]]))


class TestBlockSizes:
    def test_exact_proportions(self):
        params = fig1_params()
        assert params.block_sizes().tolist() == [491, 532, 471, 554]

    def test_remainder_goes_in_index_order(self):
        params = SbmParams(n=10, pi=np.array([1 / 3, 1 / 3, 1 / 3]),
                           P=np.full((3, 3), 0.2))
        # floor gives (3, 3, 3); the spare node lands on block 1
        assert params.block_sizes().tolist() == [4, 3, 3]

    def test_nodes_laid_out_block_contiguously(self):
        g = generate(SbmParams(n=10, pi=np.array([0.3, 0.7]),
                               P=np.full((2, 2), 0.5)), 0)
        assert g.labels.tolist() == [1] * 3 + [2] * 7


class TestGenerate:
    def test_zero_probability_gives_no_edges(self):
        g = generate(SbmParams(n=10, pi=np.array([1.0]), P=np.array([[0.0]])), 7)
        assert g.num_edges == 0

    def test_probability_one_gives_complete_graph(self):
        g = generate(SbmParams(n=4, pi=np.array([1.0]), P=np.array([[1.0]])), 7)
        assert g.num_edges == 6
        for u in range(4):
            assert sorted(g.out_neighbors(u)) == [v for v in range(4) if v != u]

    def test_self_loops_flag(self):
        g = generate(SbmParams(n=3, pi=np.array([1.0]), P=np.array([[1.0]]),
                               self_loops=True), 7)
        assert all(g.has_arc(u, u) for u in range(3))

    def test_reproducible_edge_set(self, two_block_params):
        g1 = generate(two_block_params, 123)
        g2 = generate(two_block_params, 123)
        assert np.array_equal(g1.out_indices, g2.out_indices)
        assert np.array_equal(g1.out_indptr, g2.out_indptr)
        g3 = generate(two_block_params, 124)
        assert not np.array_equal(g1.out_indices, g3.out_indices)

    def test_undirected_adjacency_symmetric_exactly(self, small_graph):
        small_graph.validate()
        for u in range(small_graph.n):
            for v in small_graph.out_neighbors(u):
                assert small_graph.has_arc(int(v), u)

    def test_directed_in_out_neighbors_consistent(self):
        g = generate(fig1_params(), 5)
        rng = np.random.default_rng(0)
        for u in rng.integers(0, g.n, size=20):
            for v in g.out_neighbors(int(u))[:5]:
                assert int(u) in g.in_neighbors(int(v))

    def test_fig1_expected_edge_count_undirected(self):
        """Symmetrized 4-block model: realized undirected edge count within
        3 sigma of sum_{i<=j} n_i n_j p_ij over 20 realizations."""
        params = fig1_params(directed=False)
        sizes = params.block_sizes()
        mean, var = 0.0, 0.0
        for i in range(4):
            for j in range(i, 4):
                pairs = (sizes[i] * (sizes[i] - 1) // 2 if i == j
                         else sizes[i] * sizes[j])
                p = params.P[i, j]
                mean += pairs * p
                var += pairs * p * (1 - p)
        counts = [generate(params, 1000 + r).num_edges for r in range(20)]
        observed = np.mean(counts)
        assert abs(observed - mean) < 3 * np.sqrt(var / 20)

    def test_fig1_expected_arc_count_directed(self):
        """Directed printed parameters: arcs u->v occur with probability
        P[block(v), block(u)], so the expected arc count is
        sum_{i,j} n_i n_j p_ij minus the diagonal-pair correction."""
        params = fig1_params(directed=True)
        sizes = params.block_sizes().astype(float)
        mean = float(sizes @ params.P @ sizes - np.diag(params.P) @ sizes)
        var = mean  # Bernoulli sum, p small: var ~ sum p(1-p) <= mean
        counts = [generate(params, 2000 + r).num_arcs for r in range(20)]
        assert abs(np.mean(counts) - mean) < 3 * np.sqrt(var / 20)

    def test_block_pair_densities_concentrate(self):
        """Empirical block-pair densities within 4 sigma of p_ij in >= 95%
        of 100 seeded trials (n = 1024)."""
        params = SbmParams(n=1024, pi=np.array([0.5, 0.5]),
                           P=np.array([[0.3, 0.2], [0.2, 0.3]]))
        sizes = params.block_sizes()
        ok = 0
        for trial in range(100):
            g = generate(params, trial)
            edges = g.edge_array()
            lab_u = g.labels[edges[:, 0]]
            lab_v = g.labels[edges[:, 1]]
            within = True
            for i, j, pairs in ((1, 1, sizes[0] * (sizes[0] - 1) / 2),
                                (1, 2, sizes[0] * sizes[1]),
                                (2, 2, sizes[1] * (sizes[1] - 1) / 2)):
                count = np.sum((np.minimum(lab_u, lab_v) == i)
                               & (np.maximum(lab_u, lab_v) == j))
                p = params.P[i - 1, j - 1]
                bound = 4 * np.sqrt(p * (1 - p) / pairs)
                if abs(count / pairs - p) >= bound:
                    within = False
            ok += within
        assert ok >= 95


class TestAffiliation:
    def test_expected_degree_general_form(self):
        aff = AffiliationParams(n_a=64, n_b=64, p_in=0.3125, p_out=0.1875)
        assert expected_degree(aff) == pytest.approx(32.0)

    def test_expected_degree_er_collapse(self):
        aff = AffiliationParams(n_a=50, n_b=50, p_in=0.2, p_out=0.2)
        assert expected_degree(aff) == pytest.approx(100 * 0.2)

    def test_expected_degree_single_node(self):
        assert expected_degree(AffiliationParams(1, 0, 1.0, 0.0)) == 1.0

    def test_affiliation_to_sbm(self):
        params = affiliation_to_sbm(AffiliationParams(64, 64, 0.3, 0.2))
        assert params.C == 2
        assert params.pi.tolist() == [0.5, 0.5]
        assert params.P.tolist() == [[0.3, 0.2], [0.2, 0.3]]

    def test_affiliation_unequal_blocks(self):
        params = affiliation_to_sbm(AffiliationParams(10, 30, 0.5, 0.1))
        assert params.pi.tolist() == [0.25, 0.75]

    def test_affiliation_er_collapse(self):
        params = affiliation_to_sbm(AffiliationParams(8, 8, 0.2, 0.2))
        assert np.all(params.P == 0.2)


class TestSerialization:
    def test_round_trip(self, small_graph, tmp_path):
        save_graph(small_graph, tmp_path / "g")
        loaded = load_graph(tmp_path / "g")
        assert loaded.n == small_graph.n
        assert np.array_equal(loaded.labels, small_graph.labels)
        assert np.array_equal(loaded.out_indices, small_graph.out_indices)
        assert np.array_equal(loaded.out_indptr, small_graph.out_indptr)
        assert loaded.params.to_json_dict() == small_graph.params.to_json_dict()

    def test_directed_round_trip(self, tmp_path):
        g = generate(fig1_params(), 11)
        save_graph(g, tmp_path / "g")
        loaded = load_graph(tmp_path / "g")
        assert loaded.directed
        assert np.array_equal(loaded.out_indices, g.out_indices)
        assert np.array_equal(loaded.in_indices, g.in_indices)

    def test_edge_file_sorted(self, small_graph, tmp_path):
        paths = save_graph(small_graph, tmp_path / "g")
        rows = [tuple(map(int, line.split()))
                for line in open(paths["edges"]) if line.strip()]
        assert rows == sorted(rows)
        assert all(u <= v for u, v in rows)

    def test_params_json_schema(self, small_graph, tmp_path):
        paths = save_graph(small_graph, tmp_path / "g")
        with open(paths["params"]) as fh:
            d = json.load(fh)
        assert set(d) == {"n", "pi", "P", "directed", "self_loops"}


class TestGraphFromEdges:
    def test_rejects_out_of_range(self):
        with pytest.raises(ParameterError, match="out of range"):
            graph_from_edges(3, [(0, 5)], [1, 1, 1])

    def test_either_orientation_accepted(self):
        g1 = graph_from_edges(3, [(0, 1), (1, 2)], [1, 1, 1])
        g2 = graph_from_edges(3, [(1, 0), (2, 1), (0, 1)], [1, 1, 1])
        assert np.array_equal(g1.out_indices, g2.out_indices)
