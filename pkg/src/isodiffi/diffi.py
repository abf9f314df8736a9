"""Depth-based feature importance for isolation forests (global and local DIFFI)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from ._parallel import ordered_map
from .errors import DegenerateImportanceError, InvalidArgumentError
from .forest import ForestModel, _values, score_from_depth, tree_depths


class InlierExplanationWarning(UserWarning):
    """Local importances were requested for a point the forest calls an inlier."""


def induced_imbalance(n_left: int, n_right: int) -> float:
    """Induced imbalance coefficient of a split sending n_left/n_right points.

    0 for a useless split (one side empty), 1 for an isolating split (one
    side holds a single point), otherwise the imbalance max/n rescaled so the
    most balanced achievable split maps to 0.5 and the most unbalanced
    non-isolating split maps to 1.
    """
    n_left = int(n_left)
    n_right = int(n_right)
    if n_left < 0 or n_right < 0:
        raise InvalidArgumentError("occupancy counts must be non-negative")
    if n_left == 0 or n_right == 0:
        return 0.0
    if min(n_left, n_right) == 1:
        return 1.0
    n = n_left + n_right
    half = -(-n // 2)
    # (a - lmin) / (lmax - lmin) with a = max/n, lmin = ceil(n/2)/n, lmax = (n-1)/n,
    # cancelled to a single integer ratio
    return (max(n_left, n_right) - half) / (n - 1 - half) * 0.5 + 0.5


def imbalance_array(n_left: np.ndarray, n_right: np.ndarray) -> np.ndarray:
    """Vectorised :func:`induced_imbalance`, same rounding."""
    n_left = np.asarray(n_left, dtype=np.int64)
    n_right = np.asarray(n_right, dtype=np.int64)
    lo = np.minimum(n_left, n_right)
    hi = np.maximum(n_left, n_right)
    n = lo + hi
    half = (n + 1) // 2
    span = n - 1 - half
    graded = lo >= 2
    out = np.where(lo == 1, 1.0, 0.0)
    ratio = np.divide(hi - half, span, out=np.zeros(n.shape), where=graded)
    return np.where(graded, ratio * 0.5 + 0.5, out)


def node_imbalances(tree, occupancy: np.ndarray) -> np.ndarray:
    """IIC of every internal node given per-node occupancy counts (0 on leaves)."""
    lam = np.zeros(tree.n_nodes, dtype=np.float64)
    inner = tree.internal_nodes
    lam[inner] = imbalance_array(occupancy[tree.left[inner]], occupancy[tree.right[inner]])
    return lam


@dataclass(frozen=True, eq=False)
class ImportanceReport:
    """Per-feature importances with the accumulators that produced them.

    ``defined[j]`` is False when feature j never occurred on an outlier path
    (its score is then reported as 0). ``status`` is ``"ok"`` or, for a local
    report on a predicted inlier, ``"inlier"``.
    """

    scores: np.ndarray
    kind: str
    counts_inlier: np.ndarray
    counts_outlier: np.ndarray
    cumulative_inlier: np.ndarray
    cumulative_outlier: np.ndarray
    feature_names: tuple[str, ...]
    defined: np.ndarray
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.scores.size

    @property
    def ranking(self) -> list[int]:
        return rank_features(self)

    def equals(self, other: ImportanceReport) -> bool:
        """Exact (bitwise for floats) equality of every field."""
        arrays = ("scores", "counts_inlier", "counts_outlier", "cumulative_inlier", "cumulative_outlier", "defined")
        return (
            self.kind == other.kind
            and self.status == other.status
            and self.feature_names == other.feature_names
            and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
        )


def _tree_contributions(model: ForestModel, t: int, X: np.ndarray, iic_outlier_scale: float):
    tree = model.trees[t]
    Xb = np.ascontiguousarray(X[tree.bootstrap_indices])
    h = tree_depths(model, t, Xb)
    outlier = score_from_depth(h, model.psi) >= model.score_threshold
    weight = np.where(h > 0, 1.0 / np.maximum(h, 1), 0.0)
    results = []
    for mask, scale in ((~outlier, 1.0), (outlier, iic_outlier_scale)):
        rows = np.ascontiguousarray(Xb[mask])
        # the IIC is measured on the occupancy of this class only
        occ = kernels.tree_occupancy(tree.feature, tree.threshold, tree.left, tree.right, tree.depth, 0, rows)
        lam = node_imbalances(tree, occ)
        if scale != 1.0:
            lam = lam * scale
        results.append(kernels.tree_accumulate(
            tree.feature, tree.threshold, tree.left, tree.right, lam, 0,
            rows, np.ascontiguousarray(weight[mask]), model.p,
        ))
    (I_I, C_I), (I_O, C_O) = results
    return I_I, C_I, I_O, C_O, int(outlier.sum())


def combine_global(I_I, C_I, I_O, C_O) -> tuple[np.ndarray, np.ndarray]:
    """GFI = (I_O / C_O) / (I_I / C_I) with the zero-count conventions.

    Features never seen on an outlier path score 0 and are flagged undefined.
    Where the inlier term is missing (zero count or zero mass) it is replaced
    by the smallest positive inlier term of any feature.
    """
    I_I = np.asarray(I_I, dtype=np.float64)
    I_O = np.asarray(I_O, dtype=np.float64)
    C_I = np.asarray(C_I)
    C_O = np.asarray(C_O)
    defined = C_O > 0
    out_term = np.zeros_like(I_O)
    np.divide(I_O, C_O, out=out_term, where=defined)
    in_term = np.zeros_like(I_I)
    np.divide(I_I, C_I, out=in_term, where=C_I > 0)
    positive = in_term > 0
    if defined.any() and not positive.any():
        raise DegenerateImportanceError("no inlier importance mass: every in-bag point was flagged as outlier")
    if positive.any():
        in_term = np.where(positive, in_term, in_term[positive].min())
    scores = np.zeros_like(out_term)
    np.divide(out_term, in_term, out=scores, where=defined)
    return scores, defined


def global_diffi(model: ForestModel, data, *, n_jobs: int | None = None,
                 iic_outlier_scale: float = 1.0) -> ImportanceReport:
    """Global feature importances from the in-bag samples of every tree.

    ``data`` must be the training matrix the model was fitted on.
    ``iic_outlier_scale`` multiplies every outlier IIC (testing hook).
    """
    X = np.ascontiguousarray(_values(data), dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.p:
        raise InvalidArgumentError(f"expected training rows with {model.p} features, got {X.shape}")
    need = max(int(t.bootstrap_indices.max()) for t in model.trees) + 1
    if X.shape[0] < need:
        raise InvalidArgumentError("data is smaller than the training set referenced by the trees")

    parts = ordered_map(lambda t: _tree_contributions(model, t, X, iic_outlier_scale), range(model.n_trees), n_jobs)
    p = model.p
    I_I, I_O = np.zeros(p), np.zeros(p)
    C_I, C_O = np.zeros(p, dtype=np.int64), np.zeros(p, dtype=np.int64)
    n_outliers = 0
    for ii, ci, io, co, k in parts:  # fixed tree order keeps sums reproducible
        I_I += ii
        C_I += ci
        I_O += io
        C_O += co
        n_outliers += k
    if n_outliers == 0:
        raise DegenerateImportanceError("no tree flagged any in-bag point as outlier")
    scores, defined = combine_global(I_I, C_I, I_O, C_O)
    return ImportanceReport(
        scores=scores, kind="global",
        counts_inlier=C_I, counts_outlier=C_O,
        cumulative_inlier=I_I, cumulative_outlier=I_O,
        feature_names=model.feature_names, defined=defined,
        meta={"n_outlier_visits": n_outliers},
    )


def local_diffi(model: ForestModel, x) -> ImportanceReport:
    """Local feature importances of a single point, over all trees.

    Each tree adds ``1/h_t(x) - 1/h_max`` to every feature split on along the
    path of ``x``; the score is the mean increment per occurrence. Points the
    forest labels as inliers are explained anyway, with a warning.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != model.p:
        raise InvalidArgumentError(f"x must be a vector of {model.p} features, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise InvalidArgumentError("x contains non-finite values")
    pk = model.packed
    I, C = kernels.forest_local(pk["feature"], pk["threshold"], pk["left"], pk["right"], pk["depth"],
                                pk["roots"], x, model.h_max, model.p)
    defined = C > 0
    scores = np.zeros(model.p)
    np.divide(I, C, out=scores, where=defined)
    status = "ok"
    if model.score_samples(x)[0] < model.score_threshold:
        status = "inlier"
        warnings.warn("local importances requested for a predicted inlier", InlierExplanationWarning, stacklevel=2)
    return ImportanceReport(
        scores=scores, kind="local",
        counts_inlier=np.zeros(model.p, dtype=np.int64), counts_outlier=C,
        cumulative_inlier=np.zeros(model.p), cumulative_outlier=I,
        feature_names=model.feature_names, defined=defined, status=status,
    )


def rank_features(report_or_scores, defined=None) -> list[int]:
    """Feature indices by descending score; ties by index; undefined last."""
    if isinstance(report_or_scores, ImportanceReport):
        scores = report_or_scores.scores
        defined = report_or_scores.defined
    else:
        scores = np.asarray(report_or_scores, dtype=np.float64)
    if defined is None:
        defined = np.isfinite(scores)
    return sorted(range(len(scores)), key=lambda j: (not defined[j], -scores[j] if defined[j] else 0.0, j))
