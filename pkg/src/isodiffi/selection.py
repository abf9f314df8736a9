"""Unsupervised feature selection by aggregating global DIFFI rankings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .diffi import global_diffi, rank_features
from .errors import FeatureSelectionError, InvalidArgumentError
from .forest import DataMatrix, as_data_matrix, fit


def rank_update(rank: int, p: int) -> float:
    """Score credited to a feature placed at 1-based ``rank`` among ``p``."""
    if p < 2:
        raise InvalidArgumentError(f"need p >= 2 features, got {p}")
    if not 1 <= rank <= p:
        raise InvalidArgumentError(f"rank must lie in 1..{p}, got {rank}")
    return 1.0 - math.log(rank) / math.log(p)


@dataclass(frozen=True, eq=False)
class AggregatedScores:
    """Aggregated scores plus the per-run ranks they were built from.

    ``per_run_ranks[i, j]`` is the 1-based rank of feature j in run i.
    """

    scores: np.ndarray
    per_run_ranks: np.ndarray
    seeds: tuple[int, ...]
    feature_names: tuple[str, ...]

    @property
    def n_runs(self) -> int:
        return self.per_run_ranks.shape[0]

    @property
    def ranking(self) -> list[int]:
        return rank_features(self.scores, np.ones(self.scores.size, dtype=bool))


def ranks_from_order(order: Sequence[int]) -> np.ndarray:
    """Convert an ordering (most important first) into 1-based ranks."""
    order = list(order)
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(1, len(order) + 1)
    if sorted(order) != list(range(len(order))):
        raise InvalidArgumentError("ordering is not a permutation of the features")
    return ranks


def aggregate_ranks(per_run_ranks, feature_names: Sequence[str] | None = None,
                    seeds: Sequence[int] = ()) -> AggregatedScores:
    """Sum ``rank_update`` over runs. Rows are runs, columns features."""
    R = np.asarray(per_run_ranks, dtype=np.int64)
    if R.ndim != 2 or R.shape[0] < 1:
        raise InvalidArgumentError("per_run_ranks must be a non-empty runs x features matrix")
    p = R.shape[1]
    for row in R:
        if sorted(row.tolist()) != list(range(1, p + 1)):
            raise InvalidArgumentError(f"rank row {row.tolist()} is not a permutation of 1..{p}")
    table = np.array([0.0] + [rank_update(r, p) for r in range(1, p + 1)])
    S = np.zeros(p)
    # column-wise sums in run order; the order of runs only changes S by rounding
    for row in R:
        S += table[row]
    names = tuple(feature_names) if feature_names else tuple(f"f{j + 1}" for j in range(p))
    return AggregatedScores(scores=S, per_run_ranks=R, seeds=tuple(seeds), feature_names=names)


def select_features(data, n_runs: int = 5, psi: int = 256, n_trees: int = 100, seed: int = 0, *,
                    threshold: float | None = None, contamination: float | None = None,
                    n_jobs: int | None = None) -> tuple[list[int], AggregatedScores]:
    """Rank features by aggregating global DIFFI over ``n_runs`` forests.

    Run i uses seed ``seed + i``. A failing run raises
    :class:`FeatureSelectionError` carrying the rank rows completed so far.
    """
    if n_runs < 1:
        raise InvalidArgumentError("n_runs must be >= 1")
    data = as_data_matrix(data)
    if data.p < 2:
        raise InvalidArgumentError("feature selection needs at least 2 features")
    rows, seeds = [], []
    for i in range(n_runs):
        run_seed = seed + i
        try:
            model = fit(data, psi, n_trees, run_seed, threshold=threshold, contamination=contamination, n_jobs=n_jobs)
            report = global_diffi(model, data, n_jobs=n_jobs)
        except Exception as exc:
            raise FeatureSelectionError(f"run {i} (seed {run_seed}) failed: {exc}", completed=list(rows)) from exc
        rows.append(ranks_from_order(rank_features(report)))
        seeds.append(run_seed)
    agg = aggregate_ranks(np.vstack(rows), data.feature_names, seeds)
    return agg.ranking, agg


def f1_score(y_true, y_pred) -> float:
    """Binary F1 with label 1 (outlier) as the positive class."""
    y_true = np.asarray(y_true).astype(bool)
    y_pred = np.asarray(y_pred).astype(bool)
    tp = int(np.sum(y_true & y_pred))
    denom = int(y_true.sum() + y_pred.sum())
    return 0.0 if denom == 0 else 2.0 * tp / denom


@dataclass(frozen=True)
class TopKRow:
    k: int
    features: tuple[int, ...]
    median_f1: float
    f1_values: tuple[float, ...]


def _repeated_f1(data: DataMatrix, labels, n_repeats, psi, n_trees, seed, threshold, contamination, n_jobs):
    values = []
    for r in range(n_repeats):
        model = fit(data, min(psi, data.n), n_trees, seed + r, threshold=threshold,
                    contamination=contamination, n_jobs=n_jobs)
        values.append(f1_score(labels, model.predict_labels(data)))
    return values


def evaluate_topk(data, ranking: Sequence[int], k_values: Sequence[int], n_repeats: int, labels, *,
                  psi: int = 256, n_trees: int = 100, seed: int = 0, threshold: float | None = None,
                  contamination: float | None = None, n_jobs: int | None = None) -> list[TopKRow]:
    """Median F1 of forests trained on the top-k ranked columns, per k.

    ``psi`` is capped at the number of rows. Repeat r uses seed ``seed + r``.
    """
    data = as_data_matrix(data)
    labels = np.asarray(labels)
    if labels.shape != (data.n,):
        raise InvalidArgumentError("labels must have one entry per row")
    if n_repeats < 1:
        raise InvalidArgumentError("n_repeats must be >= 1")
    ranking = list(ranking)
    rows = []
    for k in k_values:
        if not 1 <= k <= data.p - 1:
            raise InvalidArgumentError(f"k must lie in 1..{data.p - 1}, got {k}")
        cols = ranking[:k]
        values = _repeated_f1(data.columns(cols), labels, n_repeats, psi, n_trees, seed, threshold, contamination, n_jobs)
        rows.append(TopKRow(k=int(k), features=tuple(cols), median_f1=float(np.median(values)), f1_values=tuple(values)))
    return rows


def full_feature_f1(data, labels, n_repeats: int, *, psi: int = 256, n_trees: int = 100, seed: int = 0,
                    threshold: float | None = None, contamination: float | None = None,
                    n_jobs: int | None = None) -> TopKRow:
    """Reference row: the same protocol on all p features."""
    data = as_data_matrix(data)
    values = _repeated_f1(data, np.asarray(labels), n_repeats, psi, n_trees, seed, threshold, contamination, n_jobs)
    return TopKRow(k=data.p, features=tuple(range(data.p)), median_f1=float(np.median(values)), f1_values=tuple(values))
