"""Exact landing-probability profiles for walks rooted at a seed set.

``landing_probabilities`` applies the walk transition K times to the
uniform seed distribution (dense vector against the CSR adjacency, cost
O(K |E|)).  ``walk_enumeration_oracle`` recomputes the same profile by
exhaustively enumerating walks; it exists purely as an independent
cross-check for tests and refuses inputs beyond a small size guard.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import ParameterError, SizeGuardError
from .sbm import Graph

_ORACLE_MAX_NODES = 12
_ORACLE_MAX_STEPS = 6


@dataclass
class WalkConfig:
    """Seed set and walk horizon.  The walk starts from a uniformly random
    member of ``seed_set``."""

    seed_set: list
    K: int

    def __post_init__(self):
        self.seed_set = [int(s) for s in self.seed_set]
        if len(self.seed_set) == 0:
            raise ParameterError("seed set must be non-empty")
        if len(set(self.seed_set)) != len(self.seed_set):
            raise ParameterError("seed set contains duplicate nodes")
        if self.K < 1:
            raise ParameterError("walk length K must be >= 1")

    def validate_against(self, graph: Graph) -> None:
        for s in self.seed_set:
            if not 0 <= s < graph.n:
                raise ParameterError(f"seed node {s} out of range for n={graph.n}")


@dataclass
class LandingProfile:
    """Per-node landing probabilities; column k-1 holds the k-step values."""

    probs: np.ndarray  # (n, K)
    seed_set: list
    K: int

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    def column(self, k: int) -> np.ndarray:
        """k-step landing probabilities, k in 1..K."""
        if not 1 <= k <= self.K:
            raise ParameterError(f"step k={k} outside 1..{self.K}")
        return self.probs[:, k - 1]

    def to_csv(self, path) -> None:
        with open(Path(path), "w") as fh:
            fh.write("node," + ",".join(f"k{k}" for k in range(1, self.K + 1)) + "\n")
            for v in range(self.n):
                row = ",".join(f"{x:.17g}" for x in self.probs[v])
                fh.write(f"{v},{row}\n")


@njit(cache=True)
def _in_neighbor_sums(in_indptr, in_indices, q, out):
    """out[v] = sum of q[u] over in-neighbors u of v."""
    for v in range(out.size):
        s = 0.0
        for idx in range(in_indptr[v], in_indptr[v + 1]):
            s += q[in_indices[idx]]
        out[v] = s


def landing_probabilities(graph: Graph, cfg: WalkConfig) -> LandingProfile:
    """Exact k-step landing probabilities for k = 1..K.

    Mass at a node spreads uniformly over its out-neighbors each step;
    nodes with no out-neighbors keep their mass (implicit self-loop), so
    every column remains a probability distribution.
    """
    cfg.validate_against(graph)
    n = graph.n
    deg = graph.out_degrees().astype(np.float64)
    dead = deg == 0.0
    safe_deg = np.where(dead, 1.0, deg)

    p = np.zeros(n)
    p[cfg.seed_set] = 1.0 / len(cfg.seed_set)
    out = np.empty(n)
    probs = np.empty((n, cfg.K))
    for k in range(cfg.K):
        q = p / safe_deg
        if dead.any():
            q[dead] = 0.0
        _in_neighbor_sums(graph.in_indptr, graph.in_indices, q, out)
        if dead.any():
            out[dead] += p[dead]
        p = out.copy()
        probs[:, k] = p
    return LandingProfile(probs=probs, seed_set=list(cfg.seed_set), K=cfg.K)


def walk_enumeration_oracle(graph: Graph, cfg: WalkConfig) -> LandingProfile:
    """Brute-force profile: enumerate every walk of length <= K from the
    seed set, weighting a walk by the product of 1/outdegree along it.

    Exponential in K; refuses graphs with n > 12 or K > 6.
    """
    cfg.validate_against(graph)
    if graph.n > _ORACLE_MAX_NODES:
        raise SizeGuardError(
            f"oracle limited to n <= {_ORACLE_MAX_NODES} nodes (got {graph.n})")
    if cfg.K > _ORACLE_MAX_STEPS:
        raise SizeGuardError(
            f"oracle limited to K <= {_ORACLE_MAX_STEPS} steps (got {cfg.K})")

    probs = np.zeros((graph.n, cfg.K + 1))
    neighbors = [list(graph.out_neighbors(u)) for u in range(graph.n)]

    def visit(u: int, k: int, weight: float) -> None:
        probs[u, k] += weight
        if k == cfg.K:
            return
        nbrs = neighbors[u]
        if not nbrs:  # dead end: mass stays put
            visit(u, k + 1, weight)
            return
        w = weight / len(nbrs)
        for v in nbrs:
            visit(v, k + 1, w)

    w0 = 1.0 / len(cfg.seed_set)
    for s in cfg.seed_set:
        visit(s, 0, w0)
    return LandingProfile(probs=probs[:, 1:].copy(), seed_set=list(cfg.seed_set),
                          K=cfg.K)


def class_mean_profiles(profile: LandingProfile, labels, class_split):
    """Centroids of the landing probabilities for the two classes.

    ``class_split = (S, T)`` partitions the block ids; the in-class
    centroid ``a`` averages the profile rows of nodes whose label is in S
    (seed rows included), ``b`` likewise over T.
    """
    labels = np.asarray(labels)
    if labels.size != profile.n:
        raise ParameterError("labels must cover all profile rows")
    S, T = class_split
    in_mask = np.isin(labels, list(S))
    out_mask = np.isin(labels, list(T))
    if not in_mask.any():
        raise ParameterError("in-class is empty under the given split")
    if not out_mask.any():
        raise ParameterError("out-class is empty under the given split")
    overlap = in_mask & out_mask
    if overlap.any():
        raise ParameterError("class split must partition the block ids")
    a = profile.probs[in_mask].mean(axis=0)
    b = profile.probs[out_mask].mean(axis=0)
    return a, b
