"""Closed-form estimation of affiliation-model edge probabilities from one
observed undirected graph with known block sizes.

The estimator plugs three empirical moments into a rational formula:

    m1 = (1/(n(n-1)))        sum_{i != j}      A_ij          (edge density)
    m2 = (1/(n(n-1)(n-2)))   sum_{i,j,k dist.} A_ij A_ik     (shared-endpoint wedges)
    m3 = (1/(n(n-1)(n-2)))   sum_{i,j,k dist.} A_ij A_ik A_jk  (triangles)

together with the block-size moments s2 = n_a^2 + n_b^2 and
s3 = n_a^3 + n_b^3.

Normalization note: the closed-form identity behind the estimator holds
with s2 and s3 expressed as sums of powers of the block *proportions*,
i.e. s2/n^2 and s3/n^3.  (With raw counts the formula is dimensionally
inconsistent: the m's are probabilities while raw s2, s3 grow like n^2 and
n^3.)  We verified symbolically and on synthetic graphs with known
parameters that the proportion normalization makes the population identity
exact, so :func:`estimate` divides the raw size moments accordingly.
EstimatorMoments keeps the raw counts as defined.

Degenerate directions: the denominator carries the factor (m1^2 - m2),
whose population value is -pi_a pi_b (pi_a - pi_b)^2 (p_in - p_out)^2.
It vanishes when p_in = p_out (the Erdos-Renyi direction) *and* when the
blocks are balanced (n_a = n_b), so consistent estimation needs unequal
blocks and a genuine planted partition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import NearSingularEstimatorError, ParameterError
from .sbm import Graph

_DENOM_TOL = 1e-12


@dataclass
class EstimatorMoments:
    """Empirical edge/wedge/triangle moments plus raw size moments."""

    s2: float  # n_a^2 + n_b^2 (raw counts)
    s3: float  # n_a^3 + n_b^3 (raw counts)
    m1: float
    m2: float
    m3: float


@dataclass
class EstimatedParams:
    """Plug-in estimates; raw values kept for diagnostics, clipped values
    for downstream use."""

    p_in_hat: float
    p_out_hat: float
    alpha_est: float
    p_in_raw: float
    p_out_raw: float
    denominator: float
    moments: EstimatorMoments

    def to_json_dict(self) -> dict:
        return {
            "p_in_hat": self.p_in_hat,
            "p_out_hat": self.p_out_hat,
            "alpha_est": self.alpha_est,
            "m": [self.moments.m1, self.moments.m2, self.moments.m3],
            "denominator": self.denominator,
        }

    def save(self, path) -> None:
        with open(Path(path), "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@njit(cache=True)
def _count_triangles(indptr, indices):
    """Triangles in a loopless symmetric CSR adjacency, each counted once.

    For each edge (u, v) with u < v, counts common neighbors w > v via a
    sorted-list merge.
    """
    total = 0
    n = indptr.size - 1
    for u in range(n):
        for ptr in range(indptr[u], indptr[u + 1]):
            v = indices[ptr]
            if v <= u:
                continue
            i, j = indptr[u], indptr[v]
            iend, jend = indptr[u + 1], indptr[v + 1]
            while i < iend and j < jend:
                wi, wj = indices[i], indices[j]
                if wi < wj:
                    i += 1
                elif wj < wi:
                    j += 1
                else:
                    if wi > v:
                        total += 1
                    i += 1
                    j += 1
    return total


def moments(graph: Graph) -> EstimatorMoments:
    """Empirical moments of an undirected graph.

    m2 uses the wedge identity sum_i d_i (d_i - 1) over ordered distinct
    neighbor pairs; m3 counts each triangle 6 times (ordered distinct
    triples).  Self-loops are ignored.
    """
    if graph.directed:
        raise ParameterError("moment estimators are defined for undirected graphs")
    n = graph.n
    if n < 3:
        raise ParameterError("need n >= 3 (wedge and triangle moments undefined)")

    rows = np.repeat(np.arange(n), np.diff(graph.out_indptr))
    loopless = graph.out_indices != rows
    deg = np.bincount(rows[loopless], minlength=n).astype(np.float64)

    arcs = float(deg.sum())  # ordered pairs i != j with an edge
    m1 = arcs / (n * (n - 1))
    wedges = float((deg * (deg - 1.0)).sum())
    m2 = wedges / (n * (n - 1) * (n - 2))
    if loopless.all():
        tri = _count_triangles(graph.out_indptr, graph.out_indices)
    else:
        from .sbm import graph_from_edges
        e = graph.edge_array()
        keep = e[:, 0] != e[:, 1]
        clean = graph_from_edges(n, e[keep], graph.labels, directed=False)
        tri = _count_triangles(clean.out_indptr, clean.out_indices)
    m3 = 6.0 * tri / (n * (n - 1) * (n - 2))

    sizes = graph.block_sizes.astype(np.float64)
    s2 = float((sizes ** 2).sum())
    s3 = float((sizes ** 3).sum())
    return EstimatorMoments(s2=s2, s3=s3, m1=m1, m2=m2, m3=m3)


def estimate(graph: Graph, n_a: int | None = None, n_b: int | None = None
             ) -> EstimatedParams:
    """Estimate (p_in, p_out) for a two-block affiliation graph with known
    block sizes, and the derived restart parameter
    alpha_est = (p_in_hat - p_out_hat) / (p_in_hat + p_out_hat).

    Raises :class:`NearSingularEstimatorError` when the denominator falls
    below 1e-12 in magnitude (p_in ~ p_out or near-balanced blocks).
    """
    mom = moments(graph)
    if n_a is None or n_b is None:
        if graph.block_sizes.size != 2:
            raise ParameterError("explicit n_a, n_b required unless the graph "
                                 "has exactly two blocks")
        n_a, n_b = (int(x) for x in graph.block_sizes)
    n = graph.n
    if n_a + n_b != n:
        raise ParameterError("n_a + n_b must equal the node count")
    if n_a < 1 or n_b < 1:
        raise ParameterError("both blocks must be non-empty")

    # proportion-normalized size moments (see module docstring)
    s2 = (n_a ** 2 + n_b ** 2) / n ** 2
    s3 = (n_a ** 3 + n_b ** 3) / n ** 3
    m1, m2, m3 = mom.m1, mom.m2, mom.m3

    denom = (m1 ** 2 - m2) * (2.0 * s2 ** 3 - 3.0 * s3 * s2 + s3)
    if abs(denom) < _DENOM_TOL:
        raise NearSingularEstimatorError(
            f"estimator denominator {denom:.3e} is numerically zero "
            "(p_in ~ p_out or near-balanced blocks)", denominator=float(denom))
    num = ((s3 - s2 * s3) * m1 ** 3 + (s2 ** 3 - s3) * m2 * m1
           + (s3 * s2 - s2 ** 3) * m3)
    p_out_raw = num / denom
    p_in_raw = (m1 + (s2 - 1.0) * p_out_raw) / s2

    p_out_hat = float(np.clip(p_out_raw, 0.0, 1.0))
    p_in_hat = float(np.clip(p_in_raw, 0.0, 1.0))
    tot = p_in_hat + p_out_hat
    alpha_est = 0.0 if tot == 0 else (p_in_hat - p_out_hat) / tot
    return EstimatedParams(p_in_hat=p_in_hat, p_out_hat=p_out_hat,
                           alpha_est=float(alpha_est),
                           p_in_raw=float(p_in_raw), p_out_raw=float(p_out_raw),
                           denominator=float(denom), moments=mom)
