"""Experiment metrics: label correlation, cumulative recall, quantile bands.

Conventions fixed here so every experiment reports comparably:
class names in a two-block model are arbitrary, so correlations are
maximized over the global label swap (disable with ``swap_symmetric=False``
to get the signed value); recall counts the seed nodes as part of the
returned set and of the true class; score ties always break by ascending
node id.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError


def pearson_correlation(predicted_labels, true_labels,
                        swap_symmetric: bool = True) -> float:
    """Pearson correlation between two binary labelings.

    Labels are encoded +/-1 (any two-valued encoding is accepted: the
    larger value maps to +1).  With ``swap_symmetric`` the value is
    maximized over the global label swap, i.e. |r|, landing in [0, 1]
    with 1 iff the labelings agree up to a swap.  A zero-variance
    prediction has correlation 0 by definition.
    """
    pred = np.asarray(predicted_labels)
    true = np.asarray(true_labels)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ParameterError("labelings must be equal-length vectors")
    t_vals = np.unique(true)
    if t_vals.size != 2:
        raise ParameterError("true labeling must contain exactly two classes")
    t = np.where(true == t_vals[1], 1.0, -1.0)
    p_vals = np.unique(pred)
    if p_vals.size > 2:
        raise ParameterError("predicted labeling must be binary")
    if p_vals.size < 2:
        return 0.0
    p = np.where(pred == p_vals[1], 1.0, -1.0)
    t -= t.mean()
    p -= p.mean()
    r = float((t @ p) / np.sqrt((t @ t) * (p @ p)))
    return abs(r) if swap_symmetric else r


@dataclass
class RecallCurve:
    """recall[m-1] = |top-m set  intersect  true in-class| / n_in-class."""

    m: np.ndarray
    recall: np.ndarray

    def at(self, m: int) -> float:
        if not 1 <= m <= self.m.size:
            raise ParameterError(f"m={m} outside 1..{self.m.size}")
        return float(self.recall[m - 1])


def ranked_nodes(scores: np.ndarray, seed_set=()) -> np.ndarray:
    """Ranking used by every retrieval metric: seed nodes first (by id),
    then the rest by descending score with ties broken by ascending id."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.size
    seed_mask = np.zeros(n, dtype=bool)
    seed_list = sorted(int(s) for s in seed_set)
    seed_mask[seed_list] = True
    rest = np.flatnonzero(~seed_mask)
    order = rest[np.lexsort((rest, -scores[rest]))]
    return np.concatenate([np.array(seed_list, dtype=np.int64), order])


def recall_curve(scores, true_labels, in_class, seed_set=()) -> RecallCurve:
    """Cumulative recall of the true in-class along the score ranking.

    ``in_class`` is the set of block ids forming the hidden community;
    seed nodes count toward both the returned set and the denominator.
    """
    labels = np.asarray(true_labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.size != scores.size:
        raise ParameterError("scores and labels must have equal length")
    truth = np.isin(labels, list(in_class))
    total = int(truth.sum())
    if total == 0:
        raise ParameterError("true in-class is empty")
    order = ranked_nodes(scores, seed_set)
    hits = np.cumsum(truth[order])
    m = np.arange(1, scores.size + 1)
    return RecallCurve(m=m, recall=hits / total)


@dataclass
class QuantileBand:
    """Pointwise empirical quantile envelope over Monte Carlo samples."""

    levels: tuple
    lo: np.ndarray
    hi: np.ndarray


def nearest_rank_quantile(samples: np.ndarray, level: float) -> np.ndarray:
    """Nearest-rank quantile along axis 0: the ceil(level * R)-th smallest
    sample (the minimum for level = 0)."""
    x = np.sort(np.asarray(samples, dtype=np.float64), axis=0)
    R = x.shape[0]
    rank = int(np.ceil(level * R))
    rank = min(max(rank, 1), R)
    return x[rank - 1]


def quantile_bands(samples, levels=(0.0015, 0.9985)) -> QuantileBand:
    """Empirical (lo, hi) quantiles per column of ``samples`` (R x K)."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if samples.shape[0] < 2:
        raise ParameterError("need at least two samples per coordinate")
    lo_level, hi_level = levels
    if not 0.0 <= lo_level <= hi_level <= 1.0:
        raise ParameterError("levels must satisfy 0 <= lo <= hi <= 1")
    return QuantileBand(levels=(float(lo_level), float(hi_level)),
                        lo=nearest_rank_quantile(samples, lo_level),
                        hi=nearest_rank_quantile(samples, hi_level))


def labeling_from_scores(scores, seed_set, size: int) -> np.ndarray:
    """Predicted in-class of a discriminant method: the top ``size`` nodes
    of the ranking (seeds forced in).  Returns a boolean mask."""
    order = ranked_nodes(scores, seed_set)
    mask = np.zeros(len(scores), dtype=bool)
    mask[order[:size]] = True
    return mask


# ---------------------------------------------------------------------------
# CSV writers (schemas shared with the plotting frontend)


def write_correlation_csv(path, rows) -> None:
    """Rows of (trial, method, ratio, r)."""
    with open(Path(path), "w") as fh:
        fh.write("trial,method,ratio,r\n")
        for trial, method, ratio, r in rows:
            fh.write(f"{trial},{method},{ratio:.17g},{r:.17g}\n")


def write_recall_csv(path, rows) -> None:
    """Rows of (method, m, recall_mean, recall_std)."""
    with open(Path(path), "w") as fh:
        fh.write("method,m,recall_mean,recall_std\n")
        for method, m, mean, std in rows:
            fh.write(f"{method},{m},{mean:.17g},{std:.17g}\n")


def write_bands_csv(path, rows) -> None:
    """Rows of (class_name, k, lo, hi, empirical_mean, theory)."""
    with open(Path(path), "w") as fh:
        fh.write("class,k,lo,hi,empirical_mean,theory\n")
        for cls, k, lo, hi, mean, theory in rows:
            fh.write(f"{cls},{k},{lo:.17g},{hi:.17g},{mean:.17g},{theory:.17g}\n")


def write_heatmap_csv(path, rows) -> None:
    """Rows of (method, p_in, p_out, r_mean)."""
    with open(Path(path), "w") as fh:
        fh.write("method,p_in,p_out,r_mean\n")
        for method, p_in, p_out, r_mean in rows:
            fh.write(f"{method},{p_in:.17g},{p_out:.17g},{r_mean:.17g}\n")
