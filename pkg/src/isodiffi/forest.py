"""Isolation Forest: tree induction, path lengths, anomaly scores, predictions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from ._backend import kernels
from ._parallel import ordered_map
from .errors import CorruptFileError, InvalidArgumentError, InvalidDataError, UnsupportedVersionError

EULER_GAMMA = 0.5772156649
DEFAULT_CONTAMINATION = 0.1
MODEL_FORMAT = "isodiffi-forest"
MODEL_VERSION = 1
NODE_FIELDS = ("id", "feature", "threshold", "left", "right", "n_samples", "depth")


def default_feature_names(p: int) -> tuple[str, ...]:
    return tuple(f"f{j + 1}" for j in range(p))


@dataclass(frozen=True)
class DataMatrix:
    """An n x p matrix of finite reals with one name per column."""

    values: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if values.ndim == 1:
            values = values.reshape(1, -1)
        if values.ndim != 2:
            raise InvalidDataError(f"expected a 2-D matrix, got shape {values.shape}")
        n, p = values.shape
        if n < 1 or p < 1:
            raise InvalidDataError(f"empty data matrix of shape {values.shape}")
        if not np.isfinite(values).all():
            bad = np.argwhere(~np.isfinite(values))[0]
            raise InvalidDataError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        names = tuple(self.feature_names) or default_feature_names(p)
        if len(names) != p:
            raise InvalidDataError(f"{len(names)} feature names for {p} columns")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", tuple(str(s) for s in names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def columns(self, indices: Sequence[int]) -> DataMatrix:
        indices = list(indices)
        return DataMatrix(self.values[:, indices], tuple(self.feature_names[j] for j in indices))


def as_data_matrix(data, feature_names: Sequence[str] | None = None) -> DataMatrix:
    if isinstance(data, DataMatrix):
        return data
    return DataMatrix(np.asarray(data), tuple(feature_names or ()))


def depth_limit(psi: int) -> int:
    """ceil(log2(psi)), computed exactly on integers."""
    return (int(psi) - 1).bit_length()


def path_normalizer(psi: int) -> float:
    """Average unsuccessful-search path length c(psi) of a BST on psi points."""
    if psi > 2:
        return 2.0 * (math.log(psi - 1) + EULER_GAMMA) - 2.0 * (psi - 1) / psi
    if psi == 2:
        return 1.0
    return 0.0


def score_from_depth(h, psi: int):
    """2 ** (-h / c(psi)); works on scalars and arrays."""
    return np.power(2.0, -np.asarray(h, dtype=np.float64) / path_normalizer(psi))


@dataclass(frozen=True, eq=False)
class IsolationTree:
    """One isolation tree as flat preorder arrays.

    Leaves have ``feature == -1`` and no children. ``n_samples`` counts the
    in-bag points reaching each node and ``depth`` is the edge count from the
    root. ``bootstrap_indices`` are the training rows the tree was grown on.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    depth: np.ndarray
    bootstrap_indices: np.ndarray

    def __post_init__(self):
        for name, dtype in (
            ("feature", np.int64),
            ("threshold", np.float64),
            ("left", np.int64),
            ("right", np.int64),
            ("n_samples", np.int64),
            ("depth", np.int64),
            ("bootstrap_indices", np.int64),
        ):
            arr = np.array(getattr(self, name), dtype=dtype, order="C", copy=True)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def internal_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.feature >= 0)

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    @property
    def max_depth(self) -> int:
        return int(self.depth[self.leaves].max())

    def path(self, x) -> list[int]:
        """Node ids visited by ``x`` from root to leaf."""
        node = 0
        nodes = [0]
        while self.feature[node] >= 0:
            f = self.feature[node]
            node = self.left[node] if x[f] < self.threshold[node] else self.right[node]
            nodes.append(int(node))
        return nodes

    def same_structure(self, other: IsolationTree) -> bool:
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("feature", "threshold", "left", "right", "n_samples", "depth", "bootstrap_indices")
        )


@dataclass(frozen=True)
class Prediction:
    score: float
    label: int
    per_tree_depths: np.ndarray


@dataclass(frozen=True, eq=False)
class ForestModel:
    """A fitted, immutable isolation forest.

    ``score_threshold`` applies both to forest scores and to single-tree
    scores; ``threshold_mode`` records whether it was fixed by the caller or
    derived from a contamination quantile of the training scores.
    """

    trees: tuple[IsolationTree, ...]
    psi: int
    score_threshold: float
    rng_seed: int
    feature_names: tuple[str, ...]
    threshold_mode: str = "fixed"
    contamination: float | None = None
    n_trees: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "n_trees", len(self.trees))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.n_trees < 1:
            raise InvalidArgumentError("a forest needs at least one tree")
        if self.psi < 2:
            raise InvalidArgumentError(f"psi must be >= 2, got {self.psi}")
        # 1.0 is reachable: a root-only tree gives depth 0 and score 1
        if not 0.0 < self.score_threshold <= 1.0:
            raise InvalidArgumentError(f"score_threshold must lie in (0, 1], got {self.score_threshold}")

    @property
    def p(self) -> int:
        return len(self.feature_names)

    @property
    def h_max(self) -> int:
        return depth_limit(self.psi)

    @property
    def normalizer(self) -> float:
        return path_normalizer(self.psi)

    @cached_property
    def packed(self) -> dict[str, np.ndarray]:
        """All trees concatenated, with absolute child ids and root offsets."""
        sizes = np.array([t.n_nodes for t in self.trees])
        roots = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

        def shift(arrs):
            return np.concatenate([np.where(a >= 0, a + off, -1) for a, off in zip(arrs, roots)])

        return {
            "feature": np.concatenate([t.feature for t in self.trees]),
            "threshold": np.concatenate([t.threshold for t in self.trees]),
            "left": shift([t.left for t in self.trees]),
            "right": shift([t.right for t in self.trees]),
            "depth": np.concatenate([t.depth for t in self.trees]),
            "roots": roots,
        }

    def _check_width(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise InvalidArgumentError(f"expected rows with {self.p} features, got shape {X.shape}")
        return X

    def depths(self, data) -> np.ndarray:
        """Leaf depth h_t(x) of every row in every tree, shape (n, T)."""
        X = self._check_width(_values(data))
        pk = self.packed
        leaves = kernels.forest_apply(pk["feature"], pk["threshold"], pk["left"], pk["right"], pk["roots"], X)
        return pk["depth"][leaves]

    def score_samples(self, data) -> np.ndarray:
        h = self.depths(data)
        mean_depth = h.sum(axis=1) / self.n_trees
        return score_from_depth(mean_depth, self.psi)

    def predict_labels(self, data) -> np.ndarray:
        return (self.score_samples(data) >= self.score_threshold).astype(np.int64)

    def with_threshold(self, score_threshold: float) -> ForestModel:
        return replace(self, score_threshold=float(score_threshold), threshold_mode="fixed", contamination=None)


def _values(data) -> np.ndarray:
    return data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=np.float64)


def _grow(X: np.ndarray, psi: int, seed: int, t: int) -> IsolationTree:
    # per-tree stream keyed by tree index: adding trees never changes earlier ones
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,)))
    idx = np.sort(rng.choice(X.shape[0], size=psi, replace=False))
    uniforms = rng.random((psi - 1, 2))
    arrays = kernels.build_tree(np.ascontiguousarray(X[idx]), uniforms, depth_limit(psi))
    return IsolationTree(*arrays, bootstrap_indices=idx)


def fit(
    data,
    psi: int = 256,
    n_trees: int = 100,
    seed: int = 0,
    *,
    threshold: float | None = None,
    contamination: float | None = None,
    n_jobs: int | None = None,
) -> ForestModel:
    """Train an isolation forest.

    Each tree is grown on ``psi`` rows drawn without replacement. The label
    threshold is either the fixed score ``threshold`` or, when
    ``contamination`` is given (default 0.1 if neither is), the
    (1 - contamination) quantile of the training scores.
    """
    data = as_data_matrix(data)
    n = data.n
    if n < 2:
        raise InvalidDataError("need at least 2 training rows")
    if not 2 <= psi <= n:
        raise InvalidArgumentError(f"psi must satisfy 2 <= psi <= n={n}, got {psi}")
    if n_trees < 1:
        raise InvalidArgumentError(f"n_trees must be >= 1, got {n_trees}")
    if seed < 0:
        raise InvalidArgumentError("seed must be non-negative")
    if threshold is not None and contamination is not None:
        raise InvalidArgumentError("give either threshold or contamination, not both")
    if threshold is not None and not 0.0 < threshold < 1.0:
        raise InvalidArgumentError(f"threshold must lie in (0, 1), got {threshold}")
    if threshold is None and contamination is None:
        contamination = DEFAULT_CONTAMINATION
    if contamination is not None and not 0.0 < contamination < 1.0:
        raise InvalidArgumentError(f"contamination must lie in (0, 1), got {contamination}")

    X = data.values
    trees = ordered_map(lambda t: _grow(X, psi, seed, t), range(n_trees), n_jobs)
    # placeholder threshold until the training scores are known
    model = ForestModel(
        trees=trees,
        psi=psi,
        score_threshold=0.5 if threshold is None else float(threshold),
        rng_seed=seed,
        feature_names=data.feature_names,
    )
    if contamination is None:
        return model
    cut = float(np.quantile(model.score_samples(X), 1.0 - contamination))
    return replace(model, score_threshold=cut, threshold_mode="contamination", contamination=float(contamination))


def path_length(tree: IsolationTree, x) -> int:
    """Number of edges from the root to the leaf reached by ``x``."""
    x = np.asarray(x, dtype=np.float64)
    p_needed = int(tree.feature.max()) + 1 if tree.feature.max() >= 0 else 0
    if x.ndim != 1 or x.size < p_needed:
        raise InvalidArgumentError(f"x has shape {x.shape}")
    return len(tree.path(x)) - 1


def anomaly_score(model: ForestModel, x) -> float:
    return float(model.score_samples(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def predict(model: ForestModel, data) -> list[Prediction]:
    h = model.depths(data)
    scores = score_from_depth(h.sum(axis=1) / model.n_trees, model.psi)
    return [
        Prediction(score=float(s), label=int(s >= model.score_threshold), per_tree_depths=row)
        for s, row in zip(scores, h)
    ]


def tree_depths(model: ForestModel, tree_index: int, data) -> np.ndarray:
    X = model._check_width(_values(data))
    tree = model.trees[tree_index]
    leaves = kernels.forest_apply(tree.feature, tree.threshold, tree.left, tree.right, np.zeros(1, np.int64), X)
    return tree.depth[leaves[:, 0]]


def per_tree_predict(model: ForestModel, tree_index: int, data) -> np.ndarray:
    """Labels of tree ``tree_index``'s in-bag rows from its single-tree scores.

    ``data`` is the training matrix; the in-bag rows are selected here.
    """
    X = _values(data)
    tree = model.trees[tree_index]
    h = tree_depths(model, tree_index, X[tree.bootstrap_indices])
    return (score_from_depth(h, model.psi) >= model.score_threshold).astype(np.int64)


# --- serialization -------------------------------------------------------


def model_to_dict(model: ForestModel) -> dict:
    trees = []
    for t in model.trees:
        nodes = [
            [i, int(t.feature[i]), float(t.threshold[i]), int(t.left[i]), int(t.right[i]),
             int(t.n_samples[i]), int(t.depth[i])]
            for i in range(t.n_nodes)
        ]
        trees.append({"bootstrap_indices": t.bootstrap_indices.tolist(), "nodes": nodes})
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "hyperparameters": {
            "psi": model.psi,
            "n_trees": model.n_trees,
            "rng_seed": model.rng_seed,
            "h_max": model.h_max,
        },
        "threshold": {
            "score_threshold": model.score_threshold,
            "mode": model.threshold_mode,
            "contamination": model.contamination,
        },
        "feature_names": list(model.feature_names),
        "node_fields": list(NODE_FIELDS),
        "trees": trees,
    }


def model_from_dict(doc: dict) -> ForestModel:
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise CorruptFileError("not an isodiffi forest document")
    if doc.get("version") != MODEL_VERSION:
        raise UnsupportedVersionError(f"unsupported model version {doc.get('version')!r}")
    try:
        hp = doc["hyperparameters"]
        th = doc["threshold"]
        if list(doc["node_fields"]) != list(NODE_FIELDS):
            raise CorruptFileError("unexpected node field layout")
        trees = [_tree_from_doc(t, hp["psi"]) for t in doc["trees"]]
        if len(trees) != hp["n_trees"]:
            raise CorruptFileError(f"expected {hp['n_trees']} trees, found {len(trees)}")
        return ForestModel(
            trees=trees,
            psi=int(hp["psi"]),
            score_threshold=float(th["score_threshold"]),
            rng_seed=int(hp["rng_seed"]),
            feature_names=tuple(doc["feature_names"]),
            threshold_mode=th["mode"],
            contamination=th["contamination"],
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, (CorruptFileError, UnsupportedVersionError)):
            raise
        raise CorruptFileError(f"malformed model document: {exc!r}") from exc


def _tree_from_doc(doc: dict, psi: int) -> IsolationTree:
    nodes = doc["nodes"]
    for i, row in enumerate(nodes):
        if len(row) != len(NODE_FIELDS) or row[0] != i:
            raise CorruptFileError(f"node {i} is malformed")
    cols = list(zip(*nodes)) if nodes else [()] * len(NODE_FIELDS)
    tree = IsolationTree(
        feature=cols[1],
        threshold=[float(v) for v in cols[2]],
        left=cols[3],
        right=cols[4],
        n_samples=cols[5],
        depth=cols[6],
        bootstrap_indices=doc["bootstrap_indices"],
    )
    m = tree.n_nodes
    if m == 0 or tree.n_samples[0] != psi or tree.bootstrap_indices.size != psi:
        raise CorruptFileError("tree root does not hold psi samples")
    for v in tree.internal_nodes:
        lc, rc = tree.left[v], tree.right[v]
        if not (0 < lc < m and 0 < rc < m):
            raise CorruptFileError(f"node {v} has dangling children")
        if tree.n_samples[v] != tree.n_samples[lc] + tree.n_samples[rc]:
            raise CorruptFileError(f"node {v} violates child-count conservation")
    return tree
