"""Quality metrics for estimated feature importances."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError


def t_top_k(rankings: Sequence[Sequence[int]], K: int) -> np.ndarray:
    """How many rankings place each feature within their first ``K`` entries.

    Each ranking is a permutation of feature indices, most important first.
    """
    rankings = [list(r) for r in rankings]
    if not rankings:
        raise InvalidArgumentError("need at least one ranking")
    p = len(rankings[0])
    for r in rankings:
        if sorted(r) != list(range(p)):
            raise InvalidArgumentError(f"ranking {r} is not a permutation of 0..{p - 1}")
    if not 1 <= K <= p:
        raise InvalidArgumentError(f"K must lie in 1..{p}, got {K}")
    top = np.array([r[:K] for r in rankings], dtype=np.int64)
    return np.bincount(top.ravel(), minlength=p).astype(np.int64)


def emd_locations(p: int) -> np.ndarray:
    """Cluster positions 0, 2, 5, 9, ...: the gap before cluster i is i (1-based)."""
    if p < 1:
        raise InvalidArgumentError("p must be >= 1")
    gaps = np.arange(1, p + 1, dtype=np.float64)
    gaps[0] = 0.0
    return np.cumsum(gaps)


def _normalize(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidArgumentError(f"{name} must be a vector")
    if not np.isfinite(v).all() or (v < 0).any():
        raise InvalidArgumentError(f"{name} must be finite and non-negative")
    total = v.sum()
    if total <= 0:
        raise InvalidArgumentError(f"{name} is all zeros")
    return v / total


@dataclass(frozen=True)
class Signature:
    """Importances ordered least to most important by the ground truth."""

    locations: np.ndarray
    weights: np.ndarray
    order: np.ndarray


def ordered_signatures(ground_truth, estimated) -> tuple[Signature, Signature]:
    """Build the two signatures sharing the ground-truth ordering.

    Ties in the ground truth keep ascending feature index.
    """
    w = _normalize(ground_truth, "ground_truth")
    w_hat = _normalize(estimated, "estimated")
    if w.size != w_hat.size:
        raise InvalidArgumentError("vectors differ in length")
    if w.size < 2:
        raise InvalidArgumentError("need at least 2 features")
    order = np.argsort(w, kind="stable")
    loc = emd_locations(w.size)
    return Signature(loc, w[order], order), Signature(loc, w_hat[order], order)


def ordered_emd(ground_truth, estimated) -> float:
    """Earth Mover's Distance between importance signatures on ranked locations.

    On a line the optimal transport cost is the sum over consecutive gaps of
    gap length times the absolute cumulative mass difference.
    """
    truth, est = ordered_signatures(ground_truth, estimated)
    cum = np.cumsum(truth.weights - est.weights)[:-1]
    gaps = np.diff(truth.locations)
    return float(np.sum(gaps * np.abs(cum)))


def metric_record(metric: str, value, **meta) -> dict:
    """A JSON-ready result row, e.g. ``{"metric": "emd", "p": 6, "value": 0.4}``."""
    rec = {"metric": metric}
    rec.update(meta)
    rec["value"] = value.tolist() if isinstance(value, np.ndarray) else value
    return rec
