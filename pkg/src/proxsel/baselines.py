"""Hand-crafted proximity baselines: feature-space average distance and the
two perplexity-derived scorers over precomputed log-probability aux channels.

All three emit ScoreTables that feed top-K selection exactly like the
learned estimator does, differing only in ranking direction.
"""

from __future__ import annotations

import math

import numpy as np

from .mmd import _sq_dists
from .scores import LOWER_IS_CLOSER, ScoreTable
from .store import FeatureStore

AUX_LOGPROB_TARGET = "logprob_sum_target"
AUX_LOGPROB_BASE = "logprob_sum_base"
AUX_TOKEN_COUNT = "token_count"

_BLOCK = 2048


def avg_distance_score(x, target_set, cap: int = 2000, seed: int = 0) -> float:
    """Mean Euclidean distance from ``x`` to the target set (lower is closer).

    When the target set exceeds ``cap`` points, a seeded uniform subsample
    of ``cap`` points is used instead.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    T = np.asarray(target_set, dtype=np.float64)
    if T.ndim == 1:
        T = T[:, None]
    if T.shape[0] == 0:
        raise ValueError("empty target set")
    if T.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {T.shape[1]}")
    if T.shape[0] > cap:
        idx = np.sort(np.random.default_rng(seed).choice(T.shape[0], cap, replace=False))
        T = T[idx]
    return float(np.sqrt(_sq_dists(x[None, :], T)).mean())


def perplexity(logprob_sum: float, token_count: int) -> float:
    """exp(-logprob_sum / token_count); 1.0 when every token has probability 1."""
    if token_count < 1:
        raise ValueError("token_count must be >= 1")
    if not math.isfinite(logprob_sum) or logprob_sum > 0:
        raise ValueError("logprob_sum must be finite and <= 0")
    return float(math.exp(-logprob_sum / token_count))


def delta_perplexity(ppl_target: float, ppl_base: float) -> float:
    """Target-minus-base perplexity; more negative means closer."""
    if ppl_target < 1 or ppl_base < 1:
        raise ValueError("perplexities must be >= 1")
    return float(ppl_target - ppl_base)


def _aux_required(store: FeatureStore, names: list[str]) -> list[np.ndarray]:
    missing = [n for n in names if not store.has_aux(n)]
    if missing:
        raise ValueError(
            f"store {store.path} is missing aux channels {missing}; "
            f"available: {store.aux_schema}"
        )
    return [store.aux_column(n) for n in names]


def _perplexity_column(lps: np.ndarray, tokens: np.ndarray, path) -> np.ndarray:
    if np.any(tokens < 1):
        raise ValueError(f"store {path}: token_count must be >= 1 for every record")
    if np.any(lps > 0):
        raise ValueError(f"store {path}: logprob sums must be <= 0")
    return np.exp(-lps / tokens)


def score_store_baseline(
    store: FeatureStore,
    scorer: str,
    target_store: FeatureStore | None = None,
    cap: int = 2000,
    seed: int = 0,
) -> ScoreTable:
    """Score a whole store with one of the baseline proximity measurements.

    ``avg_distance`` needs a target store; the perplexity scorers need the
    precomputed aux channels. Missing inputs raise rather than skip.
    """
    if scorer == "avg_distance":
        if target_store is None:
            raise ValueError("avg_distance requires a target store")
        if store.count and store.dim != target_store.dim:
            raise ValueError(
                f"dimension mismatch: pool dim {store.dim}, target dim {target_store.dim}"
            )
        T = target_store.matrix()
        if T.shape[0] == 0:
            raise ValueError("empty target set")
        if T.shape[0] > cap:
            idx = np.sort(np.random.default_rng(seed).choice(T.shape[0], cap, replace=False))
            T = T[idx]
        values = np.empty(store.count, dtype=np.float64)
        for start in range(0, store.count, _BLOCK):
            block = store.matrix(np.arange(start, min(start + _BLOCK, store.count)))
            values[start : start + block.shape[0]] = np.sqrt(
                _sq_dists(block, T)
            ).mean(axis=1)
    elif scorer == "target_ppl":
        lps, tokens = _aux_required(store, [AUX_LOGPROB_TARGET, AUX_TOKEN_COUNT])
        values = _perplexity_column(lps, tokens, store.path)
    elif scorer == "delta_ppl":
        lps_t, lps_b, tokens = _aux_required(
            store, [AUX_LOGPROB_TARGET, AUX_LOGPROB_BASE, AUX_TOKEN_COUNT]
        )
        values = _perplexity_column(lps_t, tokens, store.path) - _perplexity_column(
            lps_b, tokens, store.path
        )
    else:
        raise ValueError(f"unknown baseline scorer {scorer!r}")

    return ScoreTable(
        scorer=scorer,
        direction=LOWER_IS_CLOSER,
        ids=np.asarray(store.ids),
        datasets=list(store.datasets),
        values=values,
    )
