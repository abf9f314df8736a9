"""Synthetic benchmark: two polar-coordinate features plus Gaussian noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .forest import DataMatrix, default_feature_names

INLIER_RADIUS = (0.0, 3.0)
OUTLIER_RADIUS = (4.0, 30.0)
FAMILIES = ("x-axis", "y-axis", "bisector")
NOISE_MODES = ("zero", "resample")


@dataclass(frozen=True)
class SynthSpec:
    n: int = 1000
    anomaly_fraction: float = 0.10
    p_noise: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgumentError("n must be >= 1")
        if not 0.0 < self.anomaly_fraction < 1.0:
            raise InvalidArgumentError("anomaly_fraction must lie in (0, 1)")
        if self.p_noise < 0:
            raise InvalidArgumentError("p_noise must be >= 0")
        if self.seed < 0:
            raise InvalidArgumentError("seed must be non-negative")

    @property
    def p(self) -> int:
        return self.p_noise + 2

    @property
    def n_outliers(self) -> int:
        return math.floor(self.n * self.anomaly_fraction + 0.5)

    @property
    def name(self) -> str:
        return dataset_name(self.n, self.anomaly_fraction, self.p_noise)


def dataset_name(n: int, anomaly_fraction: float, p_noise: int) -> str:
    """``{cardinality}_{anomalies%}_{p_noise}``, e.g. ``1k_10_4``."""
    card = f"{n // 1000}k" if n % 1000 == 0 else str(n)
    pct = anomaly_fraction * 100
    pct_s = str(int(round(pct))) if abs(pct - round(pct)) < 1e-9 else f"{pct:g}"
    return f"{card}_{pct_s}_{p_noise}"


def _streams(seed: int, n_streams: int) -> list[np.random.Generator]:
    # separate streams per quantity: p_noise never perturbs the informative coordinates
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_streams)]


def generate(spec: SynthSpec) -> tuple[DataMatrix, np.ndarray]:
    """Draw the labeled training set described by ``spec``.

    Rows are shuffled; ``labels[i] == 1`` marks an outlier.
    """
    rho_rng, theta_rng, noise_rng, order_rng = _streams(spec.seed, 4)
    n_out = spec.n_outliers
    n_in = spec.n - n_out
    labels = np.concatenate([np.zeros(n_in, dtype=np.int64), np.ones(n_out, dtype=np.int64)])
    rho = np.concatenate([rho_rng.uniform(*INLIER_RADIUS, size=n_in), rho_rng.uniform(*OUTLIER_RADIUS, size=n_out)])
    theta = theta_rng.uniform(0.0, 2.0 * np.pi, size=spec.n)
    noise = noise_rng.standard_normal((spec.n, spec.p_noise))
    X = np.column_stack([rho * np.cos(theta), rho * np.sin(theta), noise])
    perm = order_rng.permutation(spec.n)
    return DataMatrix(X[perm], default_feature_names(spec.p)), labels[perm]


def generate_test_outliers(count_per_family: int = 100, seed: int = 0, p_noise: int = 4,
                           noise: str = "zero") -> tuple[DataMatrix, np.ndarray]:
    """Outliers on the x-axis, on the y-axis and on the diagonal.

    Radii are drawn from the outlier band; signs alternate between the two
    half-lines of each family. Noise columns sit at their mean (``"zero"``),
    so only the informative coordinates are anomalous, or are fresh N(0, 1)
    draws (``"resample"``).
    Returns the matrix and an array of family names, one per row.
    """
    if count_per_family < 1:
        raise InvalidArgumentError("count_per_family must be >= 1")
    if noise not in NOISE_MODES:
        raise InvalidArgumentError(f"noise must be one of {NOISE_MODES}, got {noise!r}")
    k = count_per_family
    rho_rng, noise_rng = _streams(seed, 2)
    sign = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
    blocks = []
    for _ in FAMILIES:
        blocks.append(sign * rho_rng.uniform(*OUTLIER_RADIUS, size=k))
    x_axis, y_axis, diag = blocks
    zeros = np.zeros(k)
    d = diag / np.sqrt(2.0)
    informative = np.concatenate([
        np.column_stack([x_axis, zeros]),
        np.column_stack([zeros, y_axis]),
        np.column_stack([d, d]),
    ])
    if noise == "resample":
        extra = noise_rng.standard_normal((3 * k, p_noise))
    else:
        extra = np.zeros((3 * k, p_noise))
    X = np.column_stack([informative, extra])
    families = np.repeat(np.array(FAMILIES), k)
    return DataMatrix(X, default_feature_names(p_noise + 2)), families
