"""Block-level walk recurrences, their closed forms, and predicted centroids.

All recurrences grow like (expected degree)^k, so every solver carries a
per-step normalization: it stores the *fractions* of walk mass per block
together with an accumulated log of the total.  Every downstream quantity
(prediction vector, predicted centroids, optimal restart parameter) is a
ratio, so the normalization is exact bookkeeping rather than approximation.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateParameterError, ParameterError
from .sbm import SbmParams

_HOMOGENEITY_TOL = 1e-9
_IDENTICAL_TOL = 1e-12


@dataclass
class TwoBlockRecurrence:
    """Scale-managed solution of the two-block walk-count recurrence.

    ``a_frac[k] = A_k / (A_k + B_k)`` (likewise ``b_frac``) and
    ``log_total[k] = log(A_k + B_k)``, for k = 0..K.  ``A`` / ``B``
    reconstruct the raw counts where they are representable.
    """

    N: int
    p_in: float
    p_out: float
    a_frac: np.ndarray
    b_frac: np.ndarray
    log_total: np.ndarray

    @property
    def K(self) -> int:
        return self.a_frac.size - 1

    @property
    def A(self) -> np.ndarray:
        return self.a_frac * np.exp(self.log_total)

    @property
    def B(self) -> np.ndarray:
        return self.b_frac * np.exp(self.log_total)


def _check_two_block_args(p_in: float, p_out: float, N: int, K: int) -> None:
    if N < 1:
        raise ParameterError("N must be >= 1")
    if K < 1:
        raise ParameterError("K must be >= 1")
    if p_in < 0 or p_out < 0 or p_in > 1 or p_out > 1:
        raise ParameterError("p_in and p_out must lie in [0, 1]")
    if p_in + p_out <= 0:
        raise ParameterError("p_in + p_out must be positive")


def solve_two_block_iterative(p_in: float, p_out: float, N: int, K: int
                              ) -> TwoBlockRecurrence:
    """Iterate A_k = N(p_in A_{k-1} + p_out B_{k-1}),
    B_k = N(p_out A_{k-1} + p_in B_{k-1}) from (A_0, B_0) = (1, 0),
    renormalizing each step."""
    _check_two_block_args(p_in, p_out, N, K)
    a = np.empty(K + 1)
    b = np.empty(K + 1)
    log_total = np.empty(K + 1)
    a[0], b[0], log_total[0] = 1.0, 0.0, 0.0
    af, bf, ls = 1.0, 0.0, 0.0
    for k in range(1, K + 1):
        na = p_in * af + p_out * bf
        nb = p_out * af + p_in * bf
        t = na + nb
        af, bf = na / t, nb / t
        ls += np.log(N) + np.log(t)
        a[k], b[k], log_total[k] = af, bf, ls
    return TwoBlockRecurrence(N=N, p_in=p_in, p_out=p_out,
                              a_frac=a, b_frac=b, log_total=log_total)


def solve_two_block_closed(p_in: float, p_out: float, N: int, K: int
                           ) -> TwoBlockRecurrence:
    """Closed form via the eigenvalues lam1 = N(p_in - p_out) and
    lam2 = N(p_in + p_out):

        A_k = (lam1^k + lam2^k) / 2,   B_k = (lam2^k - lam1^k) / 2.

    In scale-managed form, with rho = lam1/lam2:
    a_frac[k] = (1 + rho^k)/2 and log_total[k] = k log(lam2).
    """
    _check_two_block_args(p_in, p_out, N, K)
    ks = np.arange(K + 1)
    rho = (p_in - p_out) / (p_in + p_out)
    rho_k = rho ** ks
    a = (1.0 + rho_k) / 2.0
    b = (1.0 - rho_k) / 2.0
    log_total = ks * np.log(N * (p_in + p_out))
    return TwoBlockRecurrence(N=N, p_in=p_in, p_out=p_out,
                              a_frac=a, b_frac=b, log_total=log_total)


@dataclass
class TheorySolution:
    """Predicted weights and centroids in landing-probability space.

    ``psi[k-1]`` is the asymptotic geometric-discriminant weight for walk
    length k; ``alpha_star`` is the restart parameter whose power weights
    match psi when the identical-blocks condition holds (None otherwise);
    ``centroid_a`` / ``centroid_b`` are the predicted class centroids.
    """

    psi: np.ndarray
    alpha_star: float | None
    centroid_a: np.ndarray
    centroid_b: np.ndarray

    @property
    def K(self) -> int:
        return self.psi.size


def psi_two_block(p_in: float, p_out: float, N: int, K: int) -> TheorySolution:
    """Prediction vector Psi_k = (1/N)((A_k - B_k)/(A_k + B_k))
    = (1/N) alpha*^k with alpha* = (p_in - p_out)/(p_in + p_out).

    alpha* is negative for disassortative models; that is a valid restart
    parameter here (the power-weight reading works on (-1, 1)).
    """
    rec = solve_two_block_closed(p_in, p_out, N, K)
    psi = (rec.a_frac[1:] - rec.b_frac[1:]) / N
    alpha_star = (p_in - p_out) / (p_in + p_out)
    return TheorySolution(psi=psi, alpha_star=alpha_star,
                          centroid_a=rec.a_frac[1:] / N,
                          centroid_b=rec.b_frac[1:] / N)


@dataclass
class CBlockRecurrence:
    """Scale-managed solution of x_{ik} = sum_j n_i p_{ij} x_{j,k-1}.

    ``X_frac[:, k]`` holds the per-block fractions x_{ik} / sum_j x_{jk};
    ``log_total[k]`` the log of that sum.  Initial condition is a unit of
    walk mass on ``seed_block``.
    """

    params: SbmParams
    seed_block: int
    X_frac: np.ndarray  # (C, K+1)
    log_total: np.ndarray  # (K+1,)

    @property
    def K(self) -> int:
        return self.X_frac.shape[1] - 1


def solve_c_block(params: SbmParams, seed_block: int, K: int) -> CBlockRecurrence:
    """Iterate the C-dimensional recurrence with R[i, j] = n_i p_{ij}.

    The asymptotic guarantees behind the recurrence assume every p_{ij}
    is strictly positive; zero entries only draw a warning because the
    recurrence itself is still well-defined.
    """
    if K < 1:
        raise ParameterError("K must be >= 1")
    if not 1 <= seed_block <= params.C:
        raise ParameterError(f"seed_block must be in 1..{params.C}")
    if np.any(params.P <= 0):
        warnings.warn(
            "P has non-positive entries; asymptotic guarantees for the "
            "block recurrence require all p_ij > 0", stacklevel=2)
    sizes = params.block_sizes().astype(np.float64)
    R = sizes[:, None] * params.P
    C = params.C
    X = np.zeros((C, K + 1))
    log_total = np.zeros(K + 1)
    x = np.zeros(C)
    x[seed_block - 1] = 1.0
    X[:, 0] = x
    ls = 0.0
    for k in range(1, K + 1):
        y = R @ x
        t = y.sum()
        if t <= 0:
            raise DegenerateParameterError(
                f"walk mass vanished at step {k}; P is too degenerate")
        x = y / t
        ls += np.log(t)
        X[:, k] = x
        log_total[k] = ls
    return CBlockRecurrence(params=params, seed_block=seed_block,
                            X_frac=X, log_total=log_total)


@dataclass
class HomogeneityReport:
    """Aggregate degree parameters d_IJ and the worst violation of the
    within-class homogeneity condition."""

    d11: float  # S -> into S
    d12: float  # T -> into S
    d21: float  # S -> into T
    d22: float  # T -> into T
    max_violation: float
    holds: bool

    def d_matrix(self) -> np.ndarray:
        return np.array([[self.d11, self.d12], [self.d21, self.d22]])


def check_homogeneity(params: SbmParams, S, T,
                      tol: float = _HOMOGENEITY_TOL) -> HomogeneityReport:
    """Evaluate sum_{i in I} n_i p_{ij} for each j and report, per (I, J)
    class pair, how far the sums are from constant over j in J.

    d_IJ is taken as the mean over j in J; the condition "holds" when the
    largest spread is within ``tol`` (absolute, on expected-degree scale).
    """
    S, T = sorted(set(S)), sorted(set(T))
    if sorted(S + T) != list(range(1, params.C + 1)):
        raise ParameterError("S and T must partition the block ids 1..C")
    sizes = params.block_sizes().astype(np.float64)
    d = {}
    max_violation = 0.0
    for key_I, I in (("1", S), ("2", T)):
        rows = np.array(I) - 1
        for key_J, J in (("1", S), ("2", T)):
            cols = np.array(J) - 1
            sums = np.array([(sizes[rows] * params.P[rows, j]).sum() for j in cols])
            d[key_I + key_J] = float(sums.mean())
            spread = float(sums.max() - sums.min())
            max_violation = max(max_violation, spread)
    return HomogeneityReport(d11=d["11"], d12=d["12"], d21=d["21"], d22=d["22"],
                             max_violation=max_violation,
                             holds=max_violation <= tol)


@dataclass
class EigenSolution:
    """Diagonalization of the 2x2 aggregate recurrence matrix
    R = [[d11, d12], [d21, d22]]: ``lambda1`` is the dominant eigenvalue
    (d11 + d22 + phi)/2 and ``lambda2`` the subdominant one, with
    phi = sqrt((d11 - d22)^2 + 4 d12 d21).  Column j of U is the
    eigenvector for lambda_{j+1}, scaled so its second entry is 1, so
    R U = U diag(lambda1, lambda2).

    Under the equal-expected-degree condition d11 + d21 = d12 + d22 these
    collapse to lambda1 = d12 + d22 and lambda2 = d22 - d21.
    """

    lambda1: float
    lambda2: float
    U: np.ndarray
    phi: float


def eigen_solution(d11: float, d12: float, d21: float, d22: float) -> EigenSolution:
    phi = float(np.sqrt((d11 - d22) ** 2 + 4.0 * d12 * d21))
    lam1 = 0.5 * (d11 + d22 + phi)
    if d21 == 0.0:
        raise DegenerateParameterError(
            "closed-form eigenvectors are undefined for d21 = 0")
    if lam1 == 0.0:
        raise DegenerateParameterError("zero matrix has no eigen solution")
    # lam2 via the determinant avoids the cancellation in (d11+d22-phi)/2
    lam2 = (d11 * d22 - d12 * d21) / lam1
    # second matrix row gives the eigenvector v = ((lam - d22)/d21, 1);
    # pick the cancellation-free form of each numerator
    if d11 >= d22:
        u1 = 0.5 * (d11 - d22 + phi)
        u2 = (d12 * d21) / (0.5 * (d22 - d11 - phi))  # = lam2 - d22
    else:
        u1 = (d12 * d21) / (0.5 * (d22 - d11 + phi))  # = lam1 - d22
        u2 = 0.5 * (d11 - d22 - phi)
    U = np.array([
        [u1 / d21, u2 / d21],
        [1.0, 1.0],
    ])
    return EigenSolution(lambda1=lam1, lambda2=lam2, U=U, phi=phi)


@dataclass
class AggregateRecurrence:
    """Scale-managed (f_k, g_k) solution of the 2-dim aggregate recurrence.

    When built from a C-block model satisfying the homogeneity condition,
    f_k = sum_{i in S} x_{ik} and g_k = sum_{i in T} x_{ik} exactly.
    """

    d: np.ndarray  # 2x2 [[d11, d12], [d21, d22]]
    f_frac: np.ndarray
    g_frac: np.ndarray
    log_total: np.ndarray
    eigen: EigenSolution | None = field(default=None)

    @property
    def K(self) -> int:
        return self.f_frac.size - 1


def _solve_aggregate_iterative(d: np.ndarray, f0: float, g0: float, K: int):
    f = np.empty(K + 1)
    g = np.empty(K + 1)
    log_total = np.empty(K + 1)
    t0 = f0 + g0
    ff, gf, ls = f0 / t0, g0 / t0, np.log(t0)
    f[0], g[0], log_total[0] = ff, gf, ls
    for k in range(1, K + 1):
        nf = d[0, 0] * ff + d[0, 1] * gf
        ng = d[1, 0] * ff + d[1, 1] * gf
        t = nf + ng
        if t <= 0:
            f[k:], g[k:] = 0.0, 0.0
            log_total[k:] = -np.inf
            break
        ff, gf = nf / t, ng / t
        ls += np.log(t)
        f[k], g[k], log_total[k] = ff, gf, ls
    return f, g, log_total


def solve_aggregate(d11: float, d12: float, d21: float, d22: float,
                    f0: float, g0: float, K: int) -> AggregateRecurrence:
    """Solve (f_k, g_k) = [[d11, d12], [d21, d22]] (f_{k-1}, g_{k-1}).

    Uses the closed-form eigen solution; falls back to direct iteration
    in the defective/near-defective case (phi ~ 0) and when d12 = 0
    (where the closed-form eigenvector matrix is undefined).
    """
    for name, val in (("d11", d11), ("d12", d12), ("d21", d21), ("d22", d22)):
        if val < 0:
            raise ParameterError(f"{name} must be non-negative")
    if f0 < 0 or g0 < 0 or f0 + g0 <= 0:
        raise ParameterError("initial conditions must be non-negative with f0+g0 > 0")
    if K < 1:
        raise ParameterError("K must be >= 1")
    d = np.array([[d11, d12], [d21, d22]], dtype=np.float64)
    scale = max(d11, d12, d21, d22)
    phi = np.sqrt((d11 - d22) ** 2 + 4.0 * d12 * d21)
    # near-defective guard: below phi ~ 1e-3 * scale the eigenbasis is too
    # ill-conditioned to resolve the subdominant mode to the 1e-9 target,
    # and the O(K) iteration is exact bookkeeping anyway
    if scale == 0.0 or d21 <= 0.0 or phi <= 1e-3 * scale:
        f, g, log_total = _solve_aggregate_iterative(d, f0, g0, K)
        return AggregateRecurrence(d=d, f_frac=f, g_frac=g, log_total=log_total)

    eig = eigen_solution(d11, d12, d21, d22)
    if eig.lambda1 <= 0:
        f, g, log_total = _solve_aggregate_iterative(d, f0, g0, K)
        return AggregateRecurrence(d=d, f_frac=f, g_frac=g, log_total=log_total,
                                   eigen=eig)
    # expand the initial condition in the eigenbasis, (f0, g0) = U (c1, c2);
    # with U = [[a, b], [1, 1]] that is c1 = (f0 - b g0)/(a - b),
    # c2 = (a g0 - f0)/(a - b), and then, scaled by the dominant k-th power,
    #   f_k / lam1^k = c1 a + c2 b r^k,  g_k / lam1^k = c1 + c2 r^k,
    # where r = lam2/lam1 has |r| <= 1.
    a, b = eig.U[0, 0], eig.U[0, 1]
    c1 = (f0 - b * g0) / (a - b)
    c2 = (a * g0 - f0) / (a - b)
    r = eig.lambda2 / eig.lambda1
    ks = np.arange(K + 1)
    rk = r ** ks
    f_scaled = np.clip(c1 * a + c2 * b * rk, 0.0, None)
    g_scaled = np.clip(c1 + c2 * rk, 0.0, None)
    total = f_scaled + g_scaled
    with np.errstate(divide="ignore", invalid="ignore"):
        f_frac = np.where(total > 0, f_scaled / total, 0.0)
        g_frac = np.where(total > 0, g_scaled / total, 0.0)
        log_total = ks * np.log(eig.lambda1) + np.log(total)
    return AggregateRecurrence(d=d, f_frac=f_frac, g_frac=g_frac,
                               log_total=log_total, eigen=eig)


def identical_blocks_alpha(params: SbmParams) -> float | None:
    """alpha* = (p_in - p_out) / (C p_out + (p_in - p_out)) when all
    blocks are identically distributed (equal sizes, constant diagonal
    p_in, constant off-diagonal p_out); None otherwise."""
    sizes = params.block_sizes()
    if np.unique(sizes).size != 1:
        return None
    diag = np.diag(params.P)
    p_in = diag[0]
    if np.max(np.abs(diag - p_in)) > _IDENTICAL_TOL:
        return None
    C = params.C
    if C == 1:
        return None
    off = params.P[~np.eye(C, dtype=bool)]
    p_out = off[0]
    if np.max(np.abs(off - p_out)) > _IDENTICAL_TOL:
        return None
    denom = C * p_out + (p_in - p_out)
    if denom == 0:
        return None
    return float((p_in - p_out) / denom)


def psi_c_block(recurrence, S=None, T=None, n_S: int | None = None,
                n_T: int | None = None) -> TheorySolution:
    """Prediction vector for an in-class S vs out-class T split:

        Psi_k = (1/(f_k + g_k)) (f_k / n_S - g_k / n_T).

    Accepts a :class:`CBlockRecurrence` (S and T required; class sizes
    default to the block sizes) or an :class:`AggregateRecurrence`
    (n_S and n_T required).  alpha* is populated only in the C-block
    case when the blocks are identically distributed.
    """
    if isinstance(recurrence, CBlockRecurrence):
        if S is None or T is None:
            raise ParameterError("S and T are required with a C-block recurrence")
        S, T = sorted(set(S)), sorted(set(T))
        params = recurrence.params
        if sorted(S + T) != list(range(1, params.C + 1)):
            raise ParameterError("S and T must partition the block ids 1..C")
        sizes = params.block_sizes()
        if n_S is None:
            n_S = int(sizes[np.array(S) - 1].sum())
        if n_T is None:
            n_T = int(sizes[np.array(T) - 1].sum())
        f_frac = recurrence.X_frac[np.array(S) - 1, :].sum(axis=0)
        g_frac = recurrence.X_frac[np.array(T) - 1, :].sum(axis=0)
        alpha_star = identical_blocks_alpha(params)
    elif isinstance(recurrence, AggregateRecurrence):
        if n_S is None or n_T is None:
            raise ParameterError(
                "n_S and n_T are required with an aggregate recurrence")
        f_frac, g_frac = recurrence.f_frac, recurrence.g_frac
        alpha_star = None
    else:
        raise ParameterError(f"unsupported recurrence type {type(recurrence)!r}")

    if n_S < 1 or n_T < 1:
        raise ParameterError("class sizes must be positive")
    if np.any(~np.isfinite(f_frac + g_frac)) or np.any(f_frac + g_frac <= 0):
        raise DegenerateParameterError("total walk mass vanished; Psi undefined")
    psi = f_frac[1:] / n_S - g_frac[1:] / n_T
    return TheorySolution(psi=psi, alpha_star=alpha_star,
                          centroid_a=f_frac[1:] / n_S,
                          centroid_b=g_frac[1:] / n_T)


def theory_report(solution: TheorySolution,
                  homogeneity: HomogeneityReport | None = None) -> dict:
    """JSON-ready report of a theory solution."""
    return {
        "psi": [float(x) for x in solution.psi],
        "alpha_star": None if solution.alpha_star is None else float(solution.alpha_star),
        "centroid_a": [float(x) for x in solution.centroid_a],
        "centroid_b": [float(x) for x in solution.centroid_b],
        "homogeneity_violation": (None if homogeneity is None
                                  else float(homogeneity.max_violation)),
    }


def write_theory_report(path, solution: TheorySolution,
                        homogeneity: HomogeneityReport | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(theory_report(solution, homogeneity), fh, indent=2, sort_keys=True)
        fh.write("\n")
