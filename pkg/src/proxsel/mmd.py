"""Kernel two-sample statistics: RBF kernel, median-heuristic bandwidth,
squared MMD estimators, and the globally normalized pairwise matrix over
dataset groups."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

BIASED = "biased_v_statistic"
UNBIASED = "unbiased_u_statistic"


@dataclass(frozen=True)
class MMDConfig:
    estimator_kind: str = BIASED
    subsample_cap: int = 2000
    bandwidth_cap: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.estimator_kind not in (BIASED, UNBIASED):
            raise ValueError(f"unknown estimator kind {self.estimator_kind!r}")
        if self.subsample_cap < 2 or self.bandwidth_cap < 2:
            raise ValueError("subsample and bandwidth caps must be >= 2")


@dataclass(frozen=True)
class MMDMatrix:
    labels: list[str]
    raw: np.ndarray
    normalized: np.ndarray
    sigma: float
    config: MMDConfig = field(default=MMDConfig())

    def to_json_dict(self) -> dict:
        return {
            "labels": self.labels,
            "sigma": self.sigma,
            "raw": self.raw.tolist(),
            "normalized": self.normalized.tolist(),
            "config": {
                "estimator_kind": self.config.estimator_kind,
                "subsample_cap": self.config.subsample_cap,
                "bandwidth_cap": self.config.bandwidth_cap,
                "seed": self.config.seed,
            },
        }


def _as_matrix(points) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D point set, got shape {X.shape}")
    return X


def _sq_dists(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    xx = np.einsum("ij,ij->i", X, X)[:, None]
    yy = np.einsum("ij,ij->i", Y, Y)[None, :]
    return np.maximum(xx + yy - 2.0 * (X @ Y.T), 0.0)


def rbf_kernel(x, y, sigma: float) -> float:
    """Gaussian RBF kernel exp(-||x-y||^2 / (2 sigma^2)); 1.0 iff x == y."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = x - y
    return float(np.exp(-(d @ d) / (2.0 * sigma * sigma)))


def median_bandwidth(features, cap: int = 1000, seed: int = 0) -> float:
    """Median of pairwise Euclidean distances over a seeded subsample.

    Zero distances are excluded; raises if every pair coincides. At most
    ``cap`` points enter the O(cap^2) distance computation.
    """
    X = _as_matrix(features)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 points for the median heuristic")
    if X.shape[0] > cap:
        idx = np.sort(np.random.default_rng(seed).choice(X.shape[0], cap, replace=False))
        X = X[idx]
    dists = np.sqrt(_sq_dists(X, X)[np.triu_indices(X.shape[0], k=1)])
    dists = dists[dists > 0]
    if dists.size == 0:
        raise ValueError("degenerate bandwidth: all points identical")
    return float(np.median(dists))


def mmd_squared(P, Q, sigma: float, kind: str = BIASED) -> float:
    """Squared MMD between two point sets under the RBF kernel.

    ``biased_v_statistic`` keeps the i=j terms (always >= 0, exactly 0 for
    element-wise identical inputs); ``unbiased_u_statistic`` drops them and
    may be slightly negative. Exactly symmetric in (P, Q).
    """
    P = _as_matrix(P)
    Q = _as_matrix(Q)
    if P.shape[1] != Q.shape[1]:
        raise ValueError(f"dimension mismatch: {P.shape[1]} vs {Q.shape[1]}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    min_size = 1 if kind == BIASED else 2
    if kind not in (BIASED, UNBIASED):
        raise ValueError(f"unknown estimator kind {kind!r}")
    if P.shape[0] < min_size or Q.shape[0] < min_size:
        raise ValueError(f"{kind} needs at least {min_size} points per set")

    denom = 2.0 * sigma * sigma
    Kpp = np.exp(-_sq_dists(P, P) / denom)
    Kqq = np.exp(-_sq_dists(Q, Q) / denom)
    # Cross term computed in a canonical argument orientation so that
    # mmd_squared(P, Q) == mmd_squared(Q, P) bit-exactly.
    if (P.shape[0], P.tobytes()) <= (Q.shape[0], Q.tobytes()):
        Kpq = np.exp(-_sq_dists(P, Q) / denom)
    else:
        Kpq = np.exp(-_sq_dists(Q, P) / denom)

    if kind == BIASED:
        within_p = Kpp.mean()
        within_q = Kqq.mean()
    else:
        n, m = P.shape[0], Q.shape[0]
        within_p = (Kpp.sum() - np.trace(Kpp)) / (n * (n - 1))
        within_q = (Kqq.sum() - np.trace(Kqq)) / (m * (m - 1))
    return float(within_p + within_q - 2.0 * Kpq.mean())


def _subsample(X: np.ndarray, cap: int, seed_parts: tuple[int, ...]) -> np.ndarray:
    if X.shape[0] <= cap:
        return X
    rng = np.random.default_rng(list(seed_parts))
    return X[np.sort(rng.choice(X.shape[0], cap, replace=False))]


def pairwise_mmd_matrix(
    groups: Mapping[str, np.ndarray] | Sequence[tuple[str, np.ndarray]],
    config: MMDConfig = MMDConfig(),
) -> MMDMatrix:
    """Squared-MMD matrix across named dataset groups, min-max normalized.

    One shared bandwidth comes from the median heuristic over the pooled
    (seeded) subsamples, so entries are comparable across pairs. The
    normalized matrix maps off-diagonal entries onto [0, 1]; the diagonal
    is reported as 0.
    """
    items = list(groups.items()) if isinstance(groups, Mapping) else list(groups)
    if len(items) < 2:
        raise ValueError("need at least 2 groups")
    labels = [name for name, _ in items]
    subs = []
    for i, (name, pts) in enumerate(items):
        X = _as_matrix(pts)
        if X.shape[0] == 0:
            raise ValueError(f"group {name!r} is empty")
        subs.append(_subsample(X, config.subsample_cap, (config.seed, i)))

    sigma = median_bandwidth(
        np.vstack(subs), cap=config.bandwidth_cap, seed=config.seed
    )

    k = len(subs)
    raw = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(i, k):
            raw[i, j] = mmd_squared(subs[i], subs[j], sigma, kind=config.estimator_kind)
            raw[j, i] = raw[i, j]

    off = ~np.eye(k, dtype=bool)
    lo, hi = raw[off].min(), raw[off].max()
    normalized = np.zeros_like(raw)
    if hi > lo:
        normalized[off] = (raw[off] - lo) / (hi - lo)

    return MMDMatrix(labels=labels, raw=raw, normalized=normalized, sigma=sigma, config=config)
