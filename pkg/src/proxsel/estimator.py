"""Learnable proximity estimator: a logistic probe on frozen features.

A linear layer plus sigmoid is trained to separate target-domain samples
(positives) from candidate-pool samples (negatives) with balanced batches
and early stopping at a validation-accuracy threshold. Its score is a
monotone transform of the target/pool density ratio, so ranking candidates
by score ranks them by domain proximity.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .scores import HIGHER_IS_CLOSER, ScoreTable
from .store import FeatureStore

_EPS = 1e-12
_SCORE_BLOCK = 8192


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    max_steps: int = 1000
    step_size: float = 0.1
    momentum: float = 0.9
    early_stop_accuracy: float = 0.90
    val_fraction: float = 0.1
    eval_every: int = 5
    standardize_features: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 2 or self.batch_size % 2:
            raise ValueError("batch_size must be even and >= 2 (balanced halves)")
        if self.max_steps < 1 or self.eval_every < 1:
            raise ValueError("max_steps and eval_every must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0.0 < self.early_stop_accuracy <= 1.0:
            raise ValueError("early_stop_accuracy must lie in (0, 1]")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")


@dataclass
class TrainHistory:
    steps_run: int
    loss_curve: list[float]
    val_acc_curve: list[float]
    stopped_early: bool


@dataclass
class ProximityEstimator:
    """Linear scoring function over feature space: sigmoid(w . x + b).

    When ``standardize`` is present it holds (mean, scale) vectors applied
    to inputs before the dot product, so scoring is self-contained.
    """

    weights: np.ndarray
    bias: float
    dim: int
    standardize: tuple[np.ndarray, np.ndarray] | None = None
    train_config: dict = field(default_factory=dict)
    history: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if self.weights.shape[0] != self.dim:
            raise ValueError("weights length must equal dim")
        if not np.all(np.isfinite(self.weights)) or not np.isfinite(self.bias):
            raise ValueError("estimator parameters must be finite")
        if self.standardize is not None:
            mean, scale = self.standardize
            mean = np.asarray(mean, dtype=np.float64).ravel()
            scale = np.asarray(scale, dtype=np.float64).ravel()
            if mean.shape[0] != self.dim or scale.shape[0] != self.dim:
                raise ValueError("standardization vectors must have length dim")
            if np.any(scale <= 0):
                raise ValueError("every standardization scale entry must be > 0")
            self.standardize = (mean, scale)

    def _transform(self, X: np.ndarray) -> np.ndarray:
        if self.standardize is None:
            return X
        mean, scale = self.standardize
        return (X - mean) / scale

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: got {X.shape[1]}, expected {self.dim}")
        return self._transform(X) @ self.weights + self.bias

    def scores(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.logits(X))

    def to_json_dict(self) -> dict:
        std = None
        if self.standardize is not None:
            std = {"mean": self.standardize[0].tolist(), "scale": self.standardize[1].tolist()}
        return {
            "dim": self.dim,
            "bias": float(self.bias),
            "weights": self.weights.tolist(),
            "standardize": std,
            "train_config": self.train_config,
            "history": self.history,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ProximityEstimator":
        std = obj.get("standardize")
        standardize = None
        if std is not None:
            standardize = (np.asarray(std["mean"]), np.asarray(std["scale"]))
        return cls(
            weights=np.asarray(obj["weights"], dtype=np.float64),
            bias=float(obj["bias"]),
            dim=int(obj["dim"]),
            standardize=standardize,
            train_config=dict(obj.get("train_config", {})),
            history=dict(obj.get("history", {})),
        )


def save_estimator(est: ProximityEstimator, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(est.to_json_dict(), indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def load_estimator(path: str | Path) -> ProximityEstimator:
    with open(path, "r", encoding="utf-8") as fh:
        return ProximityEstimator.from_json_dict(json.load(fh))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Branch form keeps exp() arguments non-positive on both sides.
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def score_sample(est: ProximityEstimator, x) -> float:
    """Sigmoid proximity score for one sample; saturation is not an error."""
    return float(est.scores(np.asarray(x, dtype=np.float64))[0])


def bce_loss(scores, labels) -> float:
    """Mean binary cross-entropy; probabilities clamped to [1e-12, 1-1e-12]."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValueError("bce_loss on empty input")
    if s.shape != y.shape:
        raise ValueError("scores and labels must have equal length")
    s = np.clip(s, _EPS, 1.0 - _EPS)
    return float(-np.mean(y * np.log(s) + (1.0 - y) * np.log(1.0 - s)))


def bce_gradient(
    est: ProximityEstimator, X: np.ndarray, labels
) -> tuple[np.ndarray, float]:
    """Gradient of the batch BCE through the sigmoid: mean (s - y) x and (s - y)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    y = np.asarray(labels, dtype=np.float64).ravel()
    if X.shape[0] == 0:
        raise ValueError("bce_gradient on empty batch")
    if X.shape[0] != y.shape[0]:
        raise ValueError("batch and labels must have equal length")
    Xt = est._transform(X)
    residual = _sigmoid(Xt @ est.weights + est.bias) - y
    grad_w = Xt.T @ residual / X.shape[0]
    grad_b = float(residual.mean())
    return grad_w, grad_b


def _sample_balanced_batch(
    rng: np.random.Generator, n_pos: int, n_neg: int, batch_size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Exactly batch_size/2 indices per class, uniform with replacement."""
    half = batch_size // 2
    return rng.integers(0, n_pos, half), rng.integers(0, n_neg, half)


def _split(rng: np.random.Generator, n: int, val_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    n_val = max(1, int(n * val_fraction))
    if n_val >= n:
        raise ValueError("validation split leaves an empty training class")
    perm = rng.permutation(n)
    return perm[n_val:], perm[:n_val]


def _balanced_accuracy(est_w, est_b, X_pos, X_neg) -> float:
    # Mean of per-class accuracies: the held-out evaluation is balanced
    # regardless of raw class sizes.
    acc_pos = float(np.mean(_sigmoid(X_pos @ est_w + est_b) >= 0.5))
    acc_neg = float(np.mean(_sigmoid(X_neg @ est_w + est_b) < 0.5))
    return 0.5 * (acc_pos + acc_neg)


def train_estimator(
    target_store: FeatureStore | np.ndarray,
    candidate_store: FeatureStore | np.ndarray,
    cfg: TrainConfig = TrainConfig(),
) -> tuple[ProximityEstimator, TrainHistory]:
    """Train the proximity estimator on target positives vs pool negatives.

    Momentum SGD on the BCE loss from zero-initialized parameters, balanced
    batches sampled with replacement per class, and a seeded per-class
    hold-out evaluated every ``eval_every`` steps. Training stops as soon as
    balanced validation accuracy reaches ``early_stop_accuracy``.
    Deterministic given the seed.
    """
    X_pos = target_store.matrix() if isinstance(target_store, FeatureStore) else np.asarray(target_store, dtype=np.float64)
    X_neg = candidate_store.matrix() if isinstance(candidate_store, FeatureStore) else np.asarray(candidate_store, dtype=np.float64)
    if X_pos.shape[0] == 0 or X_neg.shape[0] == 0:
        raise ValueError("both classes must be nonempty")
    if X_pos.shape[1] != X_neg.shape[1]:
        raise ValueError(
            f"dimension mismatch: target dim {X_pos.shape[1]}, pool dim {X_neg.shape[1]}"
        )
    dim = X_pos.shape[1]
    rng = np.random.default_rng(cfg.seed)

    pos_train_idx, pos_val_idx = _split(rng, X_pos.shape[0], cfg.val_fraction)
    neg_train_idx, neg_val_idx = _split(rng, X_neg.shape[0], cfg.val_fraction)

    standardize = None
    if cfg.standardize_features:
        train_all = np.vstack([X_pos[pos_train_idx], X_neg[neg_train_idx]])
        mean = train_all.mean(axis=0)
        std = train_all.std(axis=0)
        scale = np.where(std > 0, std, 1.0)
        standardize = (mean, scale)
        X_pos = (X_pos - mean) / scale
        X_neg = (X_neg - mean) / scale

    Xp, Xp_val = X_pos[pos_train_idx], X_pos[pos_val_idx]
    Xn, Xn_val = X_neg[neg_train_idx], X_neg[neg_val_idx]

    w = np.zeros(dim, dtype=np.float64)
    b = 0.0
    vel_w = np.zeros(dim, dtype=np.float64)
    vel_b = 0.0
    half = cfg.batch_size // 2
    y_batch = np.concatenate([np.ones(half), np.zeros(half)])

    loss_curve: list[float] = []
    acc_curve: list[float] = []
    stopped_early = False
    steps_run = 0

    for step in range(1, cfg.max_steps + 1):
        steps_run = step
        pos_idx, neg_idx = _sample_balanced_batch(
            rng, Xp.shape[0], Xn.shape[0], cfg.batch_size
        )
        Xb = np.vstack([Xp[pos_idx], Xn[neg_idx]])
        s = _sigmoid(Xb @ w + b)
        residual = s - y_batch
        grad_w = Xb.T @ residual / cfg.batch_size
        grad_b = residual.mean()
        vel_w = cfg.momentum * vel_w - cfg.step_size * grad_w
        vel_b = cfg.momentum * vel_b - cfg.step_size * grad_b
        w = w + vel_w
        b = b + vel_b

        if step % cfg.eval_every == 0:
            loss_curve.append(bce_loss(s, y_batch))
            acc = _balanced_accuracy(w, b, Xp_val, Xn_val)
            acc_curve.append(acc)
            if acc >= cfg.early_stop_accuracy:
                stopped_early = True
                break

    history = TrainHistory(
        steps_run=steps_run,
        loss_curve=loss_curve,
        val_acc_curve=acc_curve,
        stopped_early=stopped_early,
    )
    est = ProximityEstimator(
        weights=w,
        bias=float(b),
        dim=dim,
        standardize=standardize,
        train_config=asdict(cfg),
        history=asdict(history),
    )
    return est, history


def score_store(est: ProximityEstimator, store: FeatureStore, threads: int = 1) -> ScoreTable:
    """Score every record in a store, order-aligned with the store's ids.

    Record blocks may be scored by worker threads; each block writes its own
    output slice, so the result never depends on the thread count.
    """
    if store.count and store.dim != est.dim:
        raise ValueError(
            f"dimension mismatch: estimator dim {est.dim}, store dim {store.dim}"
        )
    values = np.empty(store.count, dtype=np.float64)

    def run_block(start: int) -> None:
        block = store.matrix(np.arange(start, min(start + _SCORE_BLOCK, store.count)))
        values[start : start + block.shape[0]] = est.scores(block)

    starts = range(0, store.count, _SCORE_BLOCK)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_block, starts))
    else:
        for start in starts:
            run_block(start)

    return ScoreTable(
        scorer="learned_estimator",
        direction=HIGHER_IS_CLOSER,
        ids=np.asarray(store.ids),
        datasets=list(store.datasets),
        values=values,
    )
