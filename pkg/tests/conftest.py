"""Shared fixtures and small graph builders."""

import numpy as np
import pytest

from seedrank import SbmParams, generate, graph_from_edges


def path_graph(n, labels=None):
    """Undirected path 0-1-...-(n-1)."""
    edges = [(i, i + 1) for i in range(n - 1)]
    labels = labels if labels is not None else np.ones(n, dtype=np.int32)
    return graph_from_edges(n, edges, labels)


def complete_graph(n, labels=None):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    labels = labels if labels is not None else np.ones(n, dtype=np.int32)
    return graph_from_edges(n, edges, labels)


def random_connected_graph(rng, n, p=0.5):
    """ER graph resampled until connected (path fallback mixed in)."""
    for _ in range(200):
        mask = rng.random((n, n)) < p
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j]]
        if not edges:
            continue
        g = graph_from_edges(n, edges, np.ones(n, dtype=np.int32))
        if _is_connected(g):
            return g
    # guaranteed-connected fallback
    return path_graph(n)


def _is_connected(g):
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in g.out_neighbors(u):
            if int(v) not in seen:
                seen.add(int(v))
                stack.append(int(v))
    return len(seen) == g.n


@pytest.fixture
def two_block_params():
    return SbmParams(n=64, pi=np.array([0.5, 0.5]),
                     P=np.array([[0.5, 0.1], [0.1, 0.5]]))


@pytest.fixture
def small_graph(two_block_params):
    return generate(two_block_params, rng_seed=42)
