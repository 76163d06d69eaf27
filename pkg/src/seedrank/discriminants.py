"""Scoring rules over landing-probability profiles.

Every ranking method used here is a discriminant of the form
``score(r) = w . r + r . W r + w0`` over a node's profile row r:
restart-style power weights and Poisson heat-kernel weights pick fixed w,
the geometric rule takes w from class centroids, and the two
covariance-adjusted rules derive (w, W, w0) from class moments the way a
two-moment Gaussian likelihood-ratio classifier would.  w0 never affects
a ranking; it is kept so the quadratic form is complete.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateMomentsError, ParameterError
from .sbm import AffiliationParams, SbmParams, affiliation_to_sbm, generate, make_rng
from .walks import LandingProfile, WalkConfig, landing_probabilities

_SYM_TOL = 1e-10
_PSD_TOL = 1e-10
_EIG_CLIP = 1e-14  # relative to trace, for covariance inversion

LINEAR_KINDS = ("ppr", "heat_kernel", "geometric", "lin_sbmrank")
QUADRATIC_KINDS = ("quad_sbmrank",)


@dataclass
class ClassMoments:
    """First two moments of the per-class landing-probability clouds.

    ``count_a`` / ``count_b`` are the sample sizes behind the estimates
    (used for covariance pooling); they may be omitted for synthetic
    moments, in which case pooling falls back to a plain average.
    """

    a: np.ndarray
    b: np.ndarray
    sigma_a: np.ndarray
    sigma_b: np.ndarray
    pi_a: float
    count_a: int | None = None
    count_b: int | None = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.sigma_a = np.asarray(self.sigma_a, dtype=np.float64)
        self.sigma_b = np.asarray(self.sigma_b, dtype=np.float64)
        self.validate()
        # store exactly symmetric covariances
        self.sigma_a = 0.5 * (self.sigma_a + self.sigma_a.T)
        self.sigma_b = 0.5 * (self.sigma_b + self.sigma_b.T)

    @property
    def K(self) -> int:
        return self.a.size

    def validate(self) -> None:
        K = self.a.size
        if self.b.size != K:
            raise ParameterError("centroids a and b must have equal length")
        for name, S in (("sigma_a", self.sigma_a), ("sigma_b", self.sigma_b)):
            if S.shape != (K, K):
                raise ParameterError(f"{name} must be {K}x{K}")
            if np.max(np.abs(S - S.T)) > _SYM_TOL:
                raise ParameterError(f"{name} must be symmetric within {_SYM_TOL}")
            tr = float(np.trace(S))
            min_eig = float(np.linalg.eigvalsh(0.5 * (S + S.T)).min())
            if min_eig < -_PSD_TOL * max(tr, 1e-300):
                raise ParameterError(f"{name} must be positive semidefinite")
        if not 0.0 < self.pi_a < 1.0:
            raise ParameterError("pi_a must lie in (0, 1)")

    def truncated(self, K: int) -> "ClassMoments":
        return ClassMoments(a=self.a[:K], b=self.b[:K],
                            sigma_a=self.sigma_a[:K, :K],
                            sigma_b=self.sigma_b[:K, :K],
                            pi_a=self.pi_a,
                            count_a=self.count_a, count_b=self.count_b)


@dataclass
class DiscriminantModel:
    """Weights of one scoring rule; ``W`` is None for linear kinds."""

    kind: str
    w: np.ndarray
    W: np.ndarray | None = None
    w0: float = 0.0
    K: int = field(default=0)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.K == 0:
            self.K = self.w.size
        if self.w.size != self.K:
            raise ParameterError("w must have length K")
        if self.W is not None:
            self.W = np.asarray(self.W, dtype=np.float64)
            if self.W.shape != (self.K, self.K):
                raise ParameterError("W must be K x K")
            if np.max(np.abs(self.W - self.W.T)) > _SYM_TOL:
                raise ParameterError("W must be symmetric")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "K": int(self.K),
            "w": [float(x) for x in self.w],
            "W": None if self.W is None else [[float(x) for x in row] for row in self.W],
            "w0": float(self.w0),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "DiscriminantModel":
        return cls(kind=d["kind"], w=np.asarray(d["w"], dtype=np.float64),
                   W=None if d.get("W") is None else np.asarray(d["W"], dtype=np.float64),
                   w0=float(d.get("w0", 0.0)))

    def save(self, path) -> None:
        with open(Path(path), "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def ppr_weights(alpha: float, K: int) -> DiscriminantModel:
    """Power weights (alpha, alpha^2, ..., alpha^K), |alpha| < 1."""
    if not -1.0 < alpha < 1.0:
        raise ParameterError("alpha must lie in (-1, 1)")
    if K < 1:
        raise ParameterError("K must be >= 1")
    w = alpha ** np.arange(1, K + 1, dtype=np.float64)
    return DiscriminantModel(kind="ppr", w=w)


def heat_kernel_weights(t: float, K: int) -> DiscriminantModel:
    """Poisson(t) weights w_k = exp(-t) t^k / k! for k = 1..K."""
    if t <= 0:
        raise ParameterError("t must be positive")
    if K < 1:
        raise ParameterError("K must be >= 1")
    w = np.empty(K)
    wk = np.exp(-t) * t  # k = 1 term
    w[0] = wk
    for k in range(2, K + 1):
        wk *= t / k
        w[k - 1] = wk
    return DiscriminantModel(kind="heat_kernel", w=w)


def geometric_model(a, b) -> DiscriminantModel:
    """Centroid-difference sweep: w = a - b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ParameterError("centroids must be equal-length vectors")
    return DiscriminantModel(kind="geometric", w=a - b)


def _conditioned_inverse(S: np.ndarray):
    """Inverse via symmetric eigendecomposition with eigenvalues clipped
    at trace * 1e-14; returns (inverse, log-determinant of the clipped
    matrix)."""
    S = 0.5 * (S + S.T)
    tr = float(np.trace(S))
    if not np.isfinite(tr) or tr <= 0:
        raise DegenerateMomentsError("covariance has non-positive trace")
    vals, vecs = np.linalg.eigh(S)
    floor = tr * _EIG_CLIP
    vals = np.clip(vals, floor, None)
    inv = (vecs / vals) @ vecs.T
    logdet = float(np.sum(np.log(vals)))
    return 0.5 * (inv + inv.T), logdet


def pooled_covariance(moments: ClassMoments) -> np.ndarray:
    """Sample-size weighted pool of the two class covariances; plain
    average when counts are unknown."""
    na, nb = moments.count_a, moments.count_b
    if na is None or nb is None or na + nb <= 2:
        return 0.5 * (moments.sigma_a + moments.sigma_b)
    return ((na - 1) * moments.sigma_a + (nb - 1) * moments.sigma_b) / (na + nb - 2)


def lin_sbmrank(moments: ClassMoments) -> DiscriminantModel:
    """Covariance-normalized linear rule w = Sigma^-1 (a - b) with the
    pooled class covariance Sigma."""
    sigma = pooled_covariance(moments)
    inv, _ = _conditioned_inverse(sigma)
    w = inv @ (moments.a - moments.b)
    return DiscriminantModel(kind="lin_sbmrank", w=w)


def quad_sbmrank(moments: ClassMoments) -> DiscriminantModel:
    """Full two-moment quadratic rule:

        w = Sigma_a^-1 a - Sigma_b^-1 b
        W = (Sigma_b^-1 - Sigma_a^-1) / 2
        w0 = -(a.Sigma_a^-1 a - b.Sigma_b^-1 b + logdet Sigma_a
               - logdet Sigma_b)/2 + log(pi_a / (1 - pi_a))

    w0 shifts every node's score equally and never changes a ranking.
    """
    inv_a, logdet_a = _conditioned_inverse(moments.sigma_a)
    inv_b, logdet_b = _conditioned_inverse(moments.sigma_b)
    a, b = moments.a, moments.b
    w = inv_a @ a - inv_b @ b
    W = 0.5 * (inv_b - inv_a)
    w0 = (-0.5 * (a @ inv_a @ a - b @ inv_b @ b + logdet_a - logdet_b)
          + np.log(moments.pi_a / (1.0 - moments.pi_a)))
    return DiscriminantModel(kind="quad_sbmrank", w=w, W=0.5 * (W + W.T), w0=float(w0))


def score(model: DiscriminantModel, profile: LandingProfile) -> np.ndarray:
    """Per-node scores w.r + r.Wr + w0 over the profile rows."""
    if model.K != profile.K:
        raise ParameterError(
            f"model expects K={model.K} but profile has K={profile.K}")
    r = profile.probs
    s = r @ model.w + model.w0
    if model.W is not None:
        s = s + np.einsum("ij,jk,ik->i", r, model.W, r)
    return s


def rank_nodes(scores: np.ndarray) -> np.ndarray:
    """Node ids ordered by descending score, ties broken by ascending id."""
    order = np.lexsort((np.arange(scores.size), -scores))
    return order


def write_scores_csv(path, scores: np.ndarray) -> None:
    """CSV ``node,score,rank`` (rank 0 = highest score, id-broken ties)."""
    order = rank_nodes(scores)
    ranks = np.empty_like(order)
    ranks[order] = np.arange(order.size)
    with open(Path(path), "w") as fh:
        fh.write("node,score,rank\n")
        for v in range(scores.size):
            fh.write(f"{v},{scores[v]:.17g},{ranks[v]}\n")


@dataclass
class _MomentAccumulator:
    """Streaming mean/covariance over profile rows."""

    dim: int
    count: int = 0
    total: np.ndarray = None
    outer: np.ndarray = None

    def __post_init__(self):
        self.total = np.zeros(self.dim)
        self.outer = np.zeros((self.dim, self.dim))

    def add(self, rows: np.ndarray) -> None:
        self.count += rows.shape[0]
        self.total += rows.sum(axis=0)
        self.outer += rows.T @ rows

    def mean(self) -> np.ndarray:
        return self.total / self.count

    def cov(self) -> np.ndarray:
        if self.count < 2:
            raise DegenerateMomentsError("need at least two rows per class")
        m = self.mean()
        c = (self.outer - self.count * np.outer(m, m)) / (self.count - 1)
        return 0.5 * (c + c.T)


def estimate_moments(params, split=None, M: int = 100, seeds_per_graph: int = 1,
                     K_max: int = 10, cond_cap: float = 1e10,
                     rng_seed=0) -> ClassMoments:
    """Estimate class moments from M simulated realizations.

    For each realization, ``seeds_per_graph`` single-node seeds are drawn
    from the in-class and one profile is computed per seed; profile rows
    are pooled across realizations into per-class sample means and
    covariances (seed rows included).  The returned moments are truncated
    to the largest K <= K_max at which both covariance condition numbers
    stay below ``cond_cap``.  Deterministic given ``rng_seed``.

    ``params`` may be :class:`AffiliationParams` (in-class = block 1) or
    :class:`SbmParams` with an explicit ``split = (S, T)``.
    """
    if isinstance(params, AffiliationParams):
        sbm_params = affiliation_to_sbm(params)
        split = ({1}, {2})
    elif isinstance(params, SbmParams):
        if split is None:
            raise ParameterError("split=(S, T) is required with SbmParams")
        sbm_params = params
    else:
        raise ParameterError("params must be AffiliationParams or SbmParams")
    if M < 2:
        raise ParameterError("need at least M=2 realizations")
    if K_max < 1:
        raise ParameterError("K_max must be >= 1")

    S, T = split
    acc_a = _MomentAccumulator(K_max)
    acc_b = _MomentAccumulator(K_max)
    root = np.random.SeedSequence(rng_seed)
    streams = root.spawn(M)
    in_count = 0
    for m in range(M):
        rng = make_rng(streams[m])
        graph = generate(sbm_params, rng)
        in_nodes = np.flatnonzero(np.isin(graph.labels, list(S)))
        out_mask = np.isin(graph.labels, list(T))
        if in_nodes.size == 0 or not out_mask.any():
            raise ParameterError("class split leaves an empty class")
        in_count = in_nodes.size
        seeds = rng.choice(in_nodes, size=min(seeds_per_graph, in_nodes.size),
                           replace=False)
        in_mask = ~out_mask
        for s in np.sort(seeds):
            profile = landing_probabilities(graph, WalkConfig([int(s)], K_max))
            acc_a.add(profile.probs[in_mask])
            acc_b.add(profile.probs[out_mask])

    moments = ClassMoments(a=acc_a.mean(), b=acc_b.mean(),
                           sigma_a=acc_a.cov(), sigma_b=acc_b.cov(),
                           pi_a=in_count / sbm_params.n,
                           count_a=acc_a.count, count_b=acc_b.count)
    K_sel = select_profile_length(moments.sigma_a, moments.sigma_b,
                                  K_max=K_max, cond_cap=cond_cap)
    return moments.truncated(K_sel)


def select_profile_length(sigma_a: np.ndarray, sigma_b: np.ndarray,
                          K_max: int, cond_cap: float = 1e10) -> int:
    """Largest K <= K_max whose leading KxK covariance blocks both have
    condition numbers below ``cond_cap``."""
    for K in range(min(K_max, sigma_a.shape[0]), 0, -1):
        conds = []
        for S in (sigma_a, sigma_b):
            with np.errstate(all="ignore"):
                conds.append(np.linalg.cond(S[:K, :K]))
        if all(np.isfinite(c) and c < cond_cap for c in conds):
            return K
    raise DegenerateMomentsError(
        f"condition cap {cond_cap:g} unreachable even at K=1")
