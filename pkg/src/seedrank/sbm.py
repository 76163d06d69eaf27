"""Stochastic block model parameters, graph realizations, and graph I/O.

Graphs are stored as plain CSR index arrays (no matrix library object) so
the random-walk kernels can run over them directly and large instances
stay memory-lean.  Node ids are 0-based; block ids are 1-based.

Edge-direction convention for directed models: ``P[i, j]`` is the
probability of an edge *from* a node in block ``j+1`` *into* a node in
block ``i+1`` (columns index the source block).  For undirected models
``P`` must be symmetric and the distinction disappears.  This orientation
is what makes the block-level walk recurrences in
:mod:`seedrank.blocktheory` (``R[i, j] = n_i * P[i, j]``) describe the
forward random walk on a generated graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError

# Rows of the Bernoulli edge matrix are sampled in fixed-size chunks; the
# chunk size is part of the generation algorithm (changing it changes the
# stream alignment, hence the realized graph for a given seed).
_GEN_CHUNK_ROWS = 512

_PI_SUM_TOL = 1e-12
_SYMMETRY_TOL = 1e-12


def make_rng(seed) -> np.random.Generator:
    """Build the package-standard RNG: Philox (counter-based) behind a
    :class:`numpy.random.Generator`.

    ``seed`` may be an int, a tuple of ints (hashed via ``SeedSequence``,
    which is how experiment harnesses derive independent per-trial
    streams), a ``SeedSequence``, or an existing ``Generator`` (returned
    unchanged).  Philox streams are splittable and platform-stable, so
    parallel generation with derived seeds stays reproducible.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class SbmParams:
    """Parameters of the block model G(n, pi, P).

    n: node count; pi: block proportions (length C, sums to 1);
    P: C x C edge-probability matrix (see module docstring for the
    directed orientation); directed / self_loops: generation flags.
    """

    n: int
    pi: np.ndarray
    P: np.ndarray
    directed: bool = False
    self_loops: bool = False

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=np.float64)
        self.P = np.asarray(self.P, dtype=np.float64)
        self.validate()

    @property
    def C(self) -> int:
        return self.pi.size

    def validate(self) -> None:
        if self.n < 1:
            raise ParameterError("n must be a positive integer")
        if self.pi.ndim != 1 or self.pi.size < 1:
            raise ParameterError("pi must be a non-empty vector")
        if np.any(self.pi <= 0) or np.any(self.pi > 1):
            raise ParameterError("pi entries must lie in (0, 1]")
        if abs(self.pi.sum() - 1.0) > _PI_SUM_TOL:
            raise ParameterError(
                f"pi must sum to 1 within {_PI_SUM_TOL} (got {self.pi.sum()!r})"
            )
        if np.any(np.rint(self.pi * self.n) < 1):
            raise ParameterError(
                "every block must round to at least one node (round(pi_i * n) >= 1)"
            )
        if self.P.shape != (self.C, self.C):
            raise ParameterError(
                f"P must be {self.C}x{self.C} to match pi (got {self.P.shape})"
            )
        if np.any(self.P < 0) or np.any(self.P > 1):
            raise ParameterError("P entries must lie in [0, 1]")
        if not self.directed and np.max(np.abs(self.P - self.P.T)) > _SYMMETRY_TOL:
            raise ParameterError(
                f"undirected models require symmetric P within {_SYMMETRY_TOL}"
            )

    def block_sizes(self) -> np.ndarray:
        """Deterministic block sizes: floor(pi_i * n), remainder handed out
        one node at a time in block-index order.  A 1e-9 absolute guard on
        the floor keeps exact-intent proportions (e.g. 491/2048) from
        losing a node to float rounding."""
        sizes = np.floor(self.pi * self.n + 1e-9).astype(np.int64)
        rem = self.n - sizes.sum()
        for i in range(int(rem)):
            sizes[i % self.C] += 1
        return sizes

    def to_json_dict(self) -> dict:
        return {
            "n": int(self.n),
            "pi": [float(x) for x in self.pi],
            "P": [[float(x) for x in row] for row in self.P],
            "directed": bool(self.directed),
            "self_loops": bool(self.self_loops),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SbmParams":
        for key in ("n", "pi", "P"):
            if key not in d:
                raise ParameterError(f"params JSON missing required field {key!r}")
        return cls(
            n=int(d["n"]),
            pi=np.asarray(d["pi"], dtype=np.float64),
            P=np.asarray(d["P"], dtype=np.float64),
            directed=bool(d.get("directed", False)),
            self_loops=bool(d.get("self_loops", False)),
        )


@dataclass
class AffiliationParams:
    """Two-block special case with within/between probabilities.

    Block a (id 1) holds the seed community.  ``n_a + n_b`` is the total
    node count.
    """

    n_a: int
    n_b: int
    p_in: float
    p_out: float

    def __post_init__(self):
        if self.n_a < 1 or self.n_b < 0:
            raise ParameterError("block sizes must satisfy n_a >= 1, n_b >= 0")
        for name, p in (("p_in", self.p_in), ("p_out", self.p_out)):
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.n_a + self.n_b


def expected_degree(params: AffiliationParams) -> float:
    """Expected (out-)degree of a block-a node: n_a*p_in + n_b*p_out.

    This is the literal expected neighbor count (self excluded only via
    the generator's self-loop flag).  Note the common ``c = (n/2) p``
    normalization reports half of this for balanced blocks: with
    c_in = N*p_in and c_out = N*p_out (N = n/2), the sweep parameter used
    by the experiment harness is d = (c_in + c_out)/2, i.e. half the
    literal expected degree.  See ``experiments.affiliation_from_sweep``.
    """
    return params.n_a * params.p_in + params.n_b * params.p_out


def affiliation_to_sbm(aff: AffiliationParams, directed: bool = False,
                       self_loops: bool = False) -> SbmParams:
    """Embed the two-block affiliation model into general SBM parameters."""
    n = aff.n
    if aff.n_b == 0:
        return SbmParams(n=n, pi=np.array([1.0]), P=np.array([[aff.p_in]]),
                         directed=directed, self_loops=self_loops)
    pi = np.array([aff.n_a / n, aff.n_b / n])
    P = np.array([[aff.p_in, aff.p_out], [aff.p_out, aff.p_in]])
    return SbmParams(n=n, pi=pi, P=P, directed=directed, self_loops=self_loops)


@dataclass
class Graph:
    """A realized graph: CSR adjacency plus per-node block labels.

    ``out_indptr``/``out_indices`` give sorted out-neighbor lists;
    ``in_indptr``/``in_indices`` the in-neighbor lists (the same arrays
    for undirected graphs).  ``labels[v]`` is the 1-based block id.
    """

    n: int
    out_indptr: np.ndarray
    out_indices: np.ndarray
    in_indptr: np.ndarray
    in_indices: np.ndarray
    labels: np.ndarray
    block_sizes: np.ndarray
    directed: bool
    params: SbmParams | None = field(default=None, repr=False)

    @property
    def num_arcs(self) -> int:
        """Number of stored directed arcs (2x edge count when undirected)."""
        return int(self.out_indices.size)

    @property
    def num_edges(self) -> int:
        """Undirected edge count (self loops count once); arcs if directed."""
        if self.directed:
            return self.num_arcs
        loops = int(np.sum(self.out_indices == _row_of(self.out_indptr, self.out_indices)))
        return (self.num_arcs - loops) // 2 + loops

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    def out_neighbors(self, u: int) -> np.ndarray:
        return self.out_indices[self.out_indptr[u]:self.out_indptr[u + 1]]

    def in_neighbors(self, v: int) -> np.ndarray:
        return self.in_indices[self.in_indptr[v]:self.in_indptr[v + 1]]

    def has_arc(self, u: int, v: int) -> bool:
        row = self.out_neighbors(u)
        k = np.searchsorted(row, v)
        return k < row.size and row[k] == v

    def validate(self) -> None:
        if self.out_indices.size and (self.out_indices.min() < 0
                                      or self.out_indices.max() >= self.n):
            raise ParameterError("edge endpoint out of range")
        if int(self.block_sizes.sum()) != self.n:
            raise ParameterError("block sizes must sum to n")
        if not self.directed:
            rows = _row_of(self.out_indptr, self.out_indices)
            order = np.lexsort((rows, self.out_indices))
            if not (np.array_equal(self.out_indices[order], rows)
                    and np.array_equal(rows[order], self.out_indices)):
                raise ParameterError("undirected adjacency must be symmetric")

    def edge_array(self) -> np.ndarray:
        """(m, 2) array of edges sorted by (u, v); undirected edges appear
        once with u <= v."""
        u = _row_of(self.out_indptr, self.out_indices)
        v = self.out_indices
        if not self.directed:
            keep = u <= v
            u, v = u[keep], v[keep]
        return np.stack([u, v], axis=1)


def _row_of(indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(indptr.size - 1, dtype=indices.dtype),
                     np.diff(indptr))


def _labels_from_sizes(sizes: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(1, sizes.size + 1, dtype=np.int32), sizes)


def _csr_from_sorted_pairs(n: int, u: np.ndarray, v: np.ndarray):
    """Build CSR (indptr, indices) from arcs already sorted by (u, v)."""
    counts = np.bincount(u, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, np.ascontiguousarray(v, dtype=np.int32)


def _symmetrize_upper(n: int, u: np.ndarray, v: np.ndarray):
    """CSR of the symmetric adjacency from (u, v)-sorted pairs with u <= v.

    Row slices come out sorted because transposed entries (values < row)
    are placed before direct entries (values >= row), each ascending.
    """
    loops = u == v
    deg = np.bincount(u, minlength=n) + np.bincount(v, minlength=n)
    deg -= np.bincount(u[loops], minlength=n)  # loops stored once
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    indices = np.empty(int(indptr[-1]), dtype=np.int32)
    cursor = indptr[:-1].copy()
    _fill_rows(indices, cursor, v[~loops], u[~loops])
    _fill_rows(indices, cursor, u, v)
    return indptr, indices


def _fill_rows(indices: np.ndarray, cursor: np.ndarray,
               rows: np.ndarray, vals: np.ndarray) -> None:
    """Place vals into per-row slots, advancing each row's cursor."""
    # pure-numpy scatter with running per-row cursors
    order = np.argsort(rows, kind="stable")
    r = rows[order]
    vals_o = vals[order]
    counts = np.bincount(r, minlength=cursor.size)
    starts = cursor[r] + _within_group_rank(r)
    indices[starts] = vals_o
    cursor += counts


def _within_group_rank(sorted_rows: np.ndarray) -> np.ndarray:
    """Rank of each element within its run of equal values (rows sorted)."""
    if sorted_rows.size == 0:
        return np.zeros(0, dtype=np.int64)
    idx = np.arange(sorted_rows.size, dtype=np.int64)
    starts = np.flatnonzero(np.diff(sorted_rows)) + 1
    group_start = np.zeros(sorted_rows.size, dtype=np.int64)
    group_start[starts] = starts
    np.maximum.accumulate(group_start, out=group_start)
    return idx - group_start


def generate(params: SbmParams, rng_seed) -> Graph:
    """Sample one graph realization.

    Each potential arc is an independent Bernoulli draw; block sizes are
    deterministic (``params.block_sizes``), nodes laid out block 1 first.
    Deterministic given (params, rng_seed): the rows of the Bernoulli
    matrix are consumed in fixed 512-row chunks from a Philox stream.
    """
    params.validate()
    rng = make_rng(rng_seed)
    sizes = params.block_sizes()
    labels = _labels_from_sizes(sizes)
    n = params.n

    # per-source-block probability over target nodes; prob that an arc
    # u -> v exists is P[label(v)-1, label(u)-1]
    prob_rows = params.P[labels - 1, :]  # (n, C): row u, col = source block

    us, vs = [], []
    for start in range(0, n, _GEN_CHUNK_ROWS):
        stop = min(start + _GEN_CHUNK_ROWS, n)
        block_cols = labels[start:stop] - 1
        # thresholds[r, v] for source u = start + r, target v
        thresholds = prob_rows[:, block_cols].T  # (chunk, n)
        draws = rng.random((stop - start, n))
        mask = draws < thresholds
        if not params.self_loops:
            mask[np.arange(stop - start), np.arange(start, stop)] = False
        if not params.directed:
            # keep only v >= u (upper triangle incl. diagonal when loops on)
            cols = np.arange(n)[None, :]
            rows = np.arange(start, stop)[:, None]
            mask &= cols >= rows if params.self_loops else cols > rows
        r_idx, c_idx = np.nonzero(mask)
        us.append((r_idx + start).astype(np.int32))
        vs.append(c_idx.astype(np.int32))
        del draws, mask, thresholds

    u = np.concatenate(us) if us else np.zeros(0, dtype=np.int32)
    v = np.concatenate(vs) if vs else np.zeros(0, dtype=np.int32)
    del us, vs

    if params.directed:
        indptr, indices = _csr_from_sorted_pairs(n, u, v)
        in_order = np.argsort(v, kind="stable")
        in_indptr, in_indices = _csr_from_sorted_pairs(
            n, v[in_order], u[in_order])
        out = Graph(n=n, out_indptr=indptr, out_indices=indices,
                    in_indptr=in_indptr, in_indices=in_indices,
                    labels=labels, block_sizes=sizes, directed=True,
                    params=params)
    else:
        indptr, indices = _symmetrize_upper(n, u, v)
        out = Graph(n=n, out_indptr=indptr, out_indices=indices,
                    in_indptr=indptr, in_indices=indices,
                    labels=labels, block_sizes=sizes, directed=False,
                    params=params)
    return out


def graph_from_edges(n: int, edges, labels, directed: bool = False) -> Graph:
    """Build a Graph from an edge list (used by tests and the loaders).

    ``edges`` is an iterable of (u, v) pairs; for undirected graphs each
    edge may appear in either or both orientations.
    """
    arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    labels = np.asarray(labels, dtype=np.int32)
    if labels.size != n:
        raise ParameterError("labels must cover all nodes")
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise ParameterError("edge endpoint out of range")
    if directed:
        pairs = arr
    else:
        loops = arr[:, 0] == arr[:, 1]
        pairs = np.vstack([arr[~loops], arr[~loops][:, ::-1], arr[loops]])
    if pairs.size:
        pairs = np.unique(pairs, axis=0)  # sorts by (u, v) and dedups
    u = pairs[:, 0].astype(np.int32)
    v = pairs[:, 1].astype(np.int32)
    indptr, indices = _csr_from_sorted_pairs(n, u, v)
    if directed:
        in_order = np.argsort(v, kind="stable")
        in_indptr, in_indices = _csr_from_sorted_pairs(n, v[in_order], u[in_order])
    else:
        in_indptr, in_indices = indptr, indices
    sizes = np.bincount(labels, minlength=int(labels.max(initial=0)) + 1)[1:]
    g = Graph(n=n, out_indptr=indptr, out_indices=indices,
              in_indptr=in_indptr, in_indices=in_indices,
              labels=labels, block_sizes=sizes.astype(np.int64),
              directed=directed)
    g.validate()
    return g


# ---------------------------------------------------------------------------
# serialization: TSV edge list + TSV labels + JSON params


def save_graph(graph: Graph, out_dir) -> dict:
    """Write edges.tsv / labels.tsv / params.json into ``out_dir``.

    Edge list rows are ``u\\tv`` sorted by (u, v), one row per undirected
    edge (u <= v) or per arc when directed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    edges = graph.edge_array()
    with open(out / "edges.tsv", "w") as fh:
        for a, b in edges:
            fh.write(f"{a}\t{b}\n")
    with open(out / "labels.tsv", "w") as fh:
        for node, lab in enumerate(graph.labels):
            fh.write(f"{node}\t{lab}\n")
    params = graph.params
    if params is None:
        params_dict = {
            "n": graph.n,
            "pi": [float(s) / graph.n for s in graph.block_sizes],
            "P": None,
            "directed": graph.directed,
            "self_loops": False,
        }
    else:
        params_dict = params.to_json_dict()
    with open(out / "params.json", "w") as fh:
        json.dump(params_dict, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"edges": str(out / "edges.tsv"), "labels": str(out / "labels.tsv"),
            "params": str(out / "params.json")}


def load_graph(in_dir) -> Graph:
    """Load a graph written by :func:`save_graph`."""
    src = Path(in_dir)
    with open(src / "params.json") as fh:
        pd = json.load(fh)
    directed = bool(pd.get("directed", False))
    labels = []
    with open(src / "labels.tsv") as fh:
        for line in fh:
            if line.strip():
                node, lab = line.split()
                labels.append((int(node), int(lab)))
    labels.sort()
    lab_arr = np.array([l for _, l in labels], dtype=np.int32)
    n = lab_arr.size
    edges = []
    with open(src / "edges.tsv") as fh:
        for line in fh:
            if line.strip():
                a, b = line.split()
                edges.append((int(a), int(b)))
    g = graph_from_edges(n, edges, lab_arr, directed=directed)
    if pd.get("P") is not None:
        g.params = SbmParams.from_json_dict(pd)
    return g
