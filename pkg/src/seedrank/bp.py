"""Sparse belief propagation for block-label inference with seed clamping.

Messages live on directed edges; beliefs and a global field couple them:

    msg_s(i->j)  propto  xi_s * prod_{k in N(i), k != j} sum_r c_sr msg_r(k->i)
    bel_s(i)     propto  xi_s * prod_{j in N(i)}         sum_r c_sr msg_r(j->i)
    xi_s         =       pi_s * exp(-h_s),   h_s = (1/n) sum_k sum_r c_sr bel_r(k)

with c_sr = n * p_sr the scaled affinities.  One sweep visits every node
in a fixed randomized order; a visit recomputes the node's outgoing
messages (asynchronously, latest values), recomputes its belief, and
updates the field h incrementally with the belief change.  The immediate
field response is what keeps the size constraint active during the
transient: recomputing xi only once per sweep lets the whole graph pile
onto one class and then flip back, a period-2 oscillation that never
converges at desk-scale densities.  Message updates are damped
(new = damping * update + (1 - damping) * old) for stability near the
detectability threshold; damping does not move the fixed points.

Seed nodes are clamped: their beliefs and outgoing messages stay at the
one-hot seed-class vector.  Convergence is reported honestly; beliefs
from a non-converged run are still returned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import NumericFailureError, ParameterError
from .sbm import Graph, SbmParams, make_rng

_DEFAULT_TOL = 1e-6
_DEFAULT_MAX_ITERS = 1000
_DEFAULT_DAMPING = 0.5
_RENORM_EVERY = 16  # keep message products away from overflow


@dataclass
class BpParams:
    """Known model parameters driving the message equations."""

    C: int
    c: np.ndarray  # C x C scaled affinities, c_sr = n * p_sr
    pi: np.ndarray
    tol: float = _DEFAULT_TOL
    max_iters: int = _DEFAULT_MAX_ITERS
    damping: float = _DEFAULT_DAMPING

    def __post_init__(self):
        self.c = np.ascontiguousarray(self.c, dtype=np.float64)
        self.pi = np.asarray(self.pi, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        if self.C < 1:
            raise ParameterError("C must be >= 1")
        if self.c.shape != (self.C, self.C):
            raise ParameterError("c must be C x C")
        if np.any(self.c < 0):
            raise ParameterError("scaled affinities must be non-negative")
        if np.max(np.abs(self.c - self.c.T)) > 1e-9 * max(1.0, np.abs(self.c).max()):
            raise ParameterError("c must be symmetric for undirected graphs")
        if self.pi.size != self.C or np.any(self.pi <= 0):
            raise ParameterError("pi must have C positive entries")
        if abs(self.pi.sum() - 1.0) > 1e-9:
            raise ParameterError("pi must sum to 1")
        if self.tol <= 0:
            raise ParameterError("tol must be positive")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ParameterError("damping must lie in (0, 1]")

    @classmethod
    def from_sbm(cls, params: SbmParams, tol: float = _DEFAULT_TOL,
                 max_iters: int = _DEFAULT_MAX_ITERS,
                 damping: float = _DEFAULT_DAMPING) -> "BpParams":
        return cls(C=params.C, c=params.n * params.P, pi=params.pi.copy(),
                   tol=tol, max_iters=max_iters, damping=damping)


@dataclass
class BpState:
    """Mutable state of one run.

    Edge e runs src[e] -> dst[e]; edge ids follow the graph's CSR layout,
    so the outgoing edges of node i are out_indptr[i]:out_indptr[i+1] and
    align position-by-position with its sorted neighbor list.  in_edges
    groups edge ids by destination, in the same neighbor order, so the
    t-th incoming and t-th outgoing edge of a node connect it to the same
    neighbor.  ``field_h`` carries the running field exponent h_s;
    ``xi`` is its pi * exp(-h) image as of the last sweep boundary.
    """

    messages: np.ndarray  # (E, C)
    beliefs: np.ndarray  # (n, C)
    xi: np.ndarray  # (C,)
    field_h: np.ndarray  # (C,)
    clamped: np.ndarray  # (n,) bool
    src: np.ndarray
    dst: np.ndarray
    rev: np.ndarray
    in_indptr: np.ndarray
    in_edges: np.ndarray
    node_order: np.ndarray
    sweeps_done: int = 0

    @property
    def num_messages(self) -> int:
        return self.messages.shape[0]


@njit(cache=True)
def _reverse_edge_ids(indptr, indices):
    E = indices.size
    rev = np.empty(E, dtype=np.int64)
    n = indptr.size - 1
    for u in range(n):
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            lo, hi = indptr[v], indptr[v + 1]
            while lo < hi:  # binary search for u in row v
                mid = (lo + hi) // 2
                if indices[mid] < u:
                    lo = mid + 1
                else:
                    hi = mid
            rev[e] = lo
    return rev


def _build_edge_index(graph: Graph):
    src = np.repeat(np.arange(graph.n, dtype=np.int64),
                    np.diff(graph.out_indptr))
    dst = graph.out_indices.astype(np.int64)
    rev = _reverse_edge_ids(graph.out_indptr.astype(np.int64), dst)
    in_order = np.argsort(dst, kind="stable")
    in_edges = in_order.astype(np.int64)
    in_indptr = np.zeros(graph.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=graph.n), out=in_indptr[1:])
    return src, dst, rev, in_indptr, in_edges


def compute_field(params: BpParams, beliefs: np.ndarray, n: int) -> np.ndarray:
    """Field exponent h_s = (1/n) sum_k sum_r c_sr bel_r(k)."""
    return (params.c @ beliefs.sum(axis=0)) / n


def init(graph: Graph, params: BpParams, seed_set, seed_class: int,
         rng_seed) -> BpState:
    """Initialize messages, beliefs, and the field.

    Seed beliefs are the one-hot vector of ``seed_class`` and stay frozen.
    Unclamped beliefs spread the remaining expected class mass: the seed
    class starts at (pi_s n - |S|)/(n - |S|), every other class at
    pi_t n / (n - |S|).  Messages are normalized independent uniforms,
    except those leaving a seed node, which are clamped one-hot too.
    """
    if graph.directed:
        raise ParameterError("belief propagation requires an undirected graph")
    seed_set = sorted(int(s) for s in set(seed_set))
    if not seed_set:
        raise ParameterError("seed set must be non-empty")
    for s in seed_set:
        if not 0 <= s < graph.n:
            raise ParameterError(f"seed node {s} out of range")
    if not 1 <= seed_class <= params.C:
        raise ParameterError(f"seed_class must be in 1..{params.C}")
    capacity = params.pi[seed_class - 1] * graph.n
    if len(seed_set) >= capacity:
        raise ParameterError(
            f"seed set size {len(seed_set)} reaches the expected class "
            f"capacity {capacity:g}")

    n, C = graph.n, params.C
    rng = make_rng(rng_seed)
    src, dst, rev, in_indptr, in_edges = _build_edge_index(graph)
    E = src.size

    clamped = np.zeros(n, dtype=bool)
    clamped[seed_set] = True

    beliefs = np.empty((n, C))
    base = params.pi * n
    unclamped_row = base.copy()
    unclamped_row[seed_class - 1] -= len(seed_set)
    unclamped_row /= n - len(seed_set)
    beliefs[:] = unclamped_row
    beliefs[clamped] = 0.0
    beliefs[clamped, seed_class - 1] = 1.0

    messages = rng.random((E, C))
    messages /= messages.sum(axis=1, keepdims=True)
    from_clamped = clamped[src]
    messages[from_clamped] = 0.0
    messages[from_clamped, seed_class - 1] = 1.0

    node_order = rng.permutation(n).astype(np.int64)
    h = compute_field(params, beliefs, n)
    return BpState(messages=messages, beliefs=beliefs,
                   xi=params.pi * np.exp(-h), field_h=h, clamped=clamped,
                   src=src, dst=dst, rev=rev, in_indptr=in_indptr,
                   in_edges=in_edges, node_order=node_order)


@njit(cache=True)
def _node_sweep(msg, bel, h, pi, c, out_indptr, in_indptr, in_edges,
                node_order, clamped, damping, inv_n, fcache):
    C = c.shape[0]
    max_delta = 0.0
    xi = np.empty(C)
    acc = np.empty(C)
    for oi in range(node_order.size):
        i = node_order[oi]
        if clamped[i]:
            continue
        for s in range(C):
            xi[s] = pi[s] * np.exp(-h[s])
        ib, ie = in_indptr[i], in_indptr[i + 1]
        deg = ie - ib
        for t in range(deg):
            ee = in_edges[ib + t]
            for s in range(C):
                f = 0.0
                for r in range(C):
                    f += c[s, r] * msg[ee, r]
                fcache[t, s] = f
        # outgoing messages: skip the factor from the same neighbor
        for t_out in range(deg):
            e = out_indptr[i] + t_out
            for s in range(C):
                acc[s] = xi[s]
            count = 0
            for t in range(deg):
                if t == t_out:
                    continue
                for s in range(C):
                    acc[s] *= fcache[t, s]
                count += 1
                if count % _RENORM_EVERY == 0:
                    tot = 0.0
                    for s in range(C):
                        tot += acc[s]
                    if tot > 0.0:
                        for s in range(C):
                            acc[s] /= tot
            tot = 0.0
            for s in range(C):
                tot += acc[s]
            if tot > 0.0:
                for s in range(C):
                    acc[s] /= tot
            else:
                for s in range(C):
                    acc[s] = 1.0 / C
            for s in range(C):
                new = damping * acc[s] + (1.0 - damping) * msg[e, s]
                d = abs(new - msg[e, s])
                if d > max_delta:
                    max_delta = d
                msg[e, s] = new
        # belief update from all incoming factors, then field update
        for s in range(C):
            acc[s] = xi[s]
        count = 0
        for t in range(deg):
            for s in range(C):
                acc[s] *= fcache[t, s]
            count += 1
            if count % _RENORM_EVERY == 0:
                tot = 0.0
                for s in range(C):
                    tot += acc[s]
                if tot > 0.0:
                    for s in range(C):
                        acc[s] /= tot
        tot = 0.0
        for s in range(C):
            tot += acc[s]
        if tot > 0.0:
            for s in range(C):
                acc[s] /= tot
        else:
            for s in range(C):
                acc[s] = 1.0 / C
        for s in range(C):
            delta_b = 0.0
            for r in range(C):
                delta_b += c[s, r] * (acc[r] - bel[i, r])
            h[s] += delta_b * inv_n
        for s in range(C):
            bel[i, s] = acc[s]
    return max_delta


def sweep(state: BpState, graph: Graph, params: BpParams):
    """One full node pass; returns (state, max absolute message change).

    The state is updated in place.  Each node visit uses the field as of
    that moment (incrementally maintained), the latest messages, and
    damped message updates; clamped nodes are skipped entirely.
    """
    max_deg = int(np.max(np.diff(state.in_indptr))) if state.num_messages else 0
    fcache = np.empty((max(max_deg, 1), params.C))
    max_delta = _node_sweep(state.messages, state.beliefs, state.field_h,
                            params.pi, params.c,
                            graph.out_indptr.astype(np.int64),
                            state.in_indptr, state.in_edges, state.node_order,
                            state.clamped, params.damping, 1.0 / graph.n,
                            fcache)
    state.xi = params.pi * np.exp(-state.field_h)
    state.sweeps_done += 1
    if not (np.isfinite(state.messages).all() and np.isfinite(state.beliefs).all()
            and np.isfinite(state.xi).all()):
        raise NumericFailureError(
            f"non-finite value encountered in sweep {state.sweeps_done}",
            sweep=state.sweeps_done)
    return state, float(max_delta)


@dataclass
class BpResult:
    beliefs: np.ndarray
    labeling: np.ndarray  # 1-based argmax classes
    converged: bool
    sweeps: int
    max_delta: float
    state: BpState = field(repr=False, default=None)

    def metadata(self) -> dict:
        return {"converged": bool(self.converged), "sweeps": int(self.sweeps),
                "max_delta": float(self.max_delta)}


def run(graph: Graph, params: BpParams, seed_set, seed_class: int,
        rng_seed, tol: float | None = None,
        max_iters: int | None = None) -> BpResult:
    """Iterate sweeps until the largest message change drops below ``tol``
    or ``max_iters`` is reached; the convergence flag reports which.

    Each node is labeled with its highest-belief class (ties resolve to
    the lowest class id).  Deterministic given (graph, params, seed_set,
    seed_class, rng_seed).
    """
    tol = params.tol if tol is None else tol
    max_iters = params.max_iters if max_iters is None else max_iters
    state = init(graph, params, seed_set, seed_class, rng_seed)
    converged = False
    delta = np.inf
    for _ in range(max_iters):
        state, delta = sweep(state, graph, params)
        if delta < tol:
            converged = True
            break
    labeling = (np.argmax(state.beliefs, axis=1) + 1).astype(np.int32)
    return BpResult(beliefs=state.beliefs.copy(), labeling=labeling,
                    converged=converged, sweeps=state.sweeps_done,
                    max_delta=float(delta), state=state)


def write_beliefs_csv(path, beliefs: np.ndarray) -> None:
    """CSV ``node,class,belief`` rows, classes 1-based."""
    with open(Path(path), "w") as fh:
        fh.write("node,class,belief\n")
        for v in range(beliefs.shape[0]):
            for s in range(beliefs.shape[1]):
                fh.write(f"{v},{s + 1},{beliefs[v, s]:.17g}\n")


def write_run_metadata(path, result: BpResult) -> None:
    with open(Path(path), "w") as fh:
        json.dump(result.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")
