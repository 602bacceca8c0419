"""Top-K selection and post-hoc analytics: curated manifests, mixture
composition, score histograms, the uniformity diversity metric, and the
pool-vs-selected distribution-shift report."""

from __future__ import annotations

import heapq
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .scores import HIGHER_IS_CLOSER, LOWER_IS_CLOSER, ScoreTable

_DEFAULT_BINS = 50
_EXACT_BLOCK_FLOATS = 8_000_000


class ManifestEntry(NamedTuple):
    rank: int
    id: int
    dataset: str
    value: float


@dataclass
class SelectionManifest:
    k_requested: int
    entries: list[ManifestEntry]
    scorer: str
    direction: str
    pool_size: int
    config: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[int]:
        return [e.id for e in self.entries]


@dataclass(frozen=True)
class DiversityConfig:
    t: float = 2.0
    exact_threshold: int = 4096
    pair_samples: int = 200_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.t <= 0:
            raise ValueError("t must be positive")
        if self.pair_samples < 1:
            raise ValueError("pair_samples must be >= 1")


@dataclass(frozen=True)
class CompositionReport:
    rows: list[dict]
    total: int

    def to_json_dict(self) -> dict:
        return {"total": self.total, "rows": self.rows}


def top_k_select(table: ScoreTable, k: int, config: dict | None = None) -> SelectionManifest:
    """Best-k entries by the table's direction, ties broken by ascending id.

    Streams through the table with a bounded heap, so memory is O(k) beyond
    the table itself. ``k`` larger than the table returns everything.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    higher = table.direction == HIGHER_IS_CLOSER

    # Heap keys order so the weakest kept entry pops first: by value in the
    # keep direction, then by id (larger id is weaker on equal values).
    heap: list[tuple[float, float, int]] = []
    if k > 0:
        for pos, (rid, val) in enumerate(zip(table.ids.tolist(), table.values.tolist())):
            key = (val, -rid) if higher else (-val, -rid)
            if len(heap) < k:
                heapq.heappush(heap, (key[0], key[1], pos))
            elif (heap[0][0], heap[0][1]) < key:
                heapq.heapreplace(heap, (key[0], key[1], pos))

    kept = [pos for _, _, pos in heap]
    vals = table.values
    ids = table.ids
    kept.sort(key=lambda p: ((-vals[p] if higher else vals[p]), ids[p]))

    entries = [
        ManifestEntry(rank=r + 1, id=int(ids[p]), dataset=table.datasets[p], value=float(vals[p]))
        for r, p in enumerate(kept)
    ]
    return SelectionManifest(
        k_requested=k,
        entries=entries,
        scorer=table.scorer,
        direction=table.direction,
        pool_size=len(table),
        config=dict(config or {}),
    )


def write_manifest(manifest: SelectionManifest, path: str | Path) -> None:
    path = Path(path)
    header = {
        "k": manifest.k_requested,
        "scorer": manifest.scorer,
        "direction": manifest.direction,
        "pool_size": manifest.pool_size,
        "config": manifest.config,
    }
    lines = [json.dumps(header)]
    for e in manifest.entries:
        lines.append(
            json.dumps({"rank": e.rank, "id": e.id, "dataset": e.dataset, "value": e.value})
        )
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    os.replace(tmp, path)


def read_manifest(path: str | Path) -> SelectionManifest:
    header: dict | None = None
    entries: list[ManifestEntry] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if header is None:
                header = obj
                continue
            entries.append(
                ManifestEntry(
                    rank=int(obj["rank"]),
                    id=int(obj["id"]),
                    dataset=obj.get("dataset", ""),
                    value=float(obj["value"]),
                )
            )
    if header is None:
        raise ValueError(f"{path}: missing manifest header line")
    return SelectionManifest(
        k_requested=int(header["k"]),
        entries=entries,
        scorer=header["scorer"],
        direction=header["direction"],
        pool_size=int(header["pool_size"]),
        config=dict(header.get("config", {})),
    )


def mixture_composition(manifest: SelectionManifest) -> CompositionReport:
    """Per-dataset counts and percentage shares, largest share first."""
    counts: dict[str, int] = {}
    for e in manifest.entries:
        counts[e.dataset] = counts.get(e.dataset, 0) + 1
    total = len(manifest.entries)
    rows = [
        {"dataset": ds, "count": n, "percentage": 100.0 * n / total}
        for ds, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ]
    return CompositionReport(rows=rows, total=total)


def score_histogram(
    table: ScoreTable, bins: int = _DEFAULT_BINS, group_by_dataset: bool = False
) -> dict:
    """Equal-width histogram of scores; [0, 1] range for learned scores,
    observed min-max otherwise. Bin counts sum to the table size."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if table.scorer == "learned_estimator":
        lo, hi = 0.0, 1.0
    elif len(table) == 0:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = float(table.values.min()), float(table.values.max())
        if lo == hi:
            hi = lo + 1.0
    counts, edges = np.histogram(table.values, bins=bins, range=(lo, hi))
    out = {
        "bin_edges": edges.tolist(),
        "counts": counts.tolist(),
        "total": int(len(table)),
    }
    if group_by_dataset:
        series: dict[str, np.ndarray] = {}
        labels = np.asarray(table.datasets)
        for ds in sorted(set(table.datasets)):
            c, _ = np.histogram(table.values[labels == ds], bins=bins, range=(lo, hi))
            series[ds] = c
        out["series"] = {ds: c.tolist() for ds, c in series.items()}
    return out


def _pair_kernel_mean_exact(X: np.ndarray, t: float) -> float:
    # Difference-based distances keep coincident points at exactly zero, so
    # a store of identical vectors yields a kernel mean of exactly 1.
    n = X.shape[0]
    block = max(1, _EXACT_BLOCK_FLOATS // max(1, n * X.shape[1]))
    total = 0.0
    for start in range(0, n, block):
        d2 = ((X[start : start + block, None, :] - X[None, :, :]) ** 2).sum(axis=-1)
        total += float(np.exp(-t * d2).sum())
    return (total - n) / (n * (n - 1))


def _pair_kernel_mean_sampled(X: np.ndarray, cfg: DiversityConfig) -> float:
    n = X.shape[0]
    rng = np.random.default_rng(cfg.seed)
    i = rng.integers(0, n, cfg.pair_samples)
    # j uniform over indices != i.
    j = (i + 1 + rng.integers(0, n - 1, cfg.pair_samples)) % n
    d2 = ((X[i] - X[j]) ** 2).sum(axis=1)
    return float(np.exp(-cfg.t * d2).mean())


def diversity(features, cfg: DiversityConfig = DiversityConfig()) -> float:
    """Uniformity-style spread: 1 / E[exp(-t ||u - v||^2)] over pairs u != v.

    Exact double loop up to ``exact_threshold`` points, seeded Monte-Carlo
    over ``pair_samples`` ordered pairs above it. Always >= 1; exactly 1
    when every point coincides.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError("diversity needs at least 2 points")
    if X.shape[0] <= cfg.exact_threshold:
        mean = _pair_kernel_mean_exact(X, cfg.t)
    else:
        mean = _pair_kernel_mean_sampled(X, cfg)
    if mean == 0.0:
        # Every pair kernel underflowed: the spread exceeds float range.
        return float("inf")
    return float(1.0 / mean)


def _summary_stats(values: np.ndarray) -> dict:
    qs = [0.1, 0.25, 0.5, 0.75, 0.9]
    return {
        "count": int(values.size),
        "mean": float(values.mean()),
        "median": float(np.median(values)),
        "quantiles": {str(q): float(np.quantile(values, q)) for q in qs},
    }


def selection_shift_report(
    pool_table: ScoreTable, manifest: SelectionManifest, bins: int = _DEFAULT_BINS
) -> dict:
    """Pool vs selected-subset score statistics and histograms.

    Every manifest id must appear in the pool table. For higher-is-closer
    scorers the selected mean can never fall below the pool mean; the report
    carries that check as ``shift_ok``.
    """
    if len(pool_table) == 0:
        raise ValueError("empty pool table")
    index = {int(rid): pos for pos, rid in enumerate(pool_table.ids.tolist())}
    positions = []
    for e in manifest.entries:
        if e.id not in index:
            raise ValueError(f"manifest id {e.id} missing from pool table")
        positions.append(index[e.id])
    selected_vals = pool_table.values[positions] if positions else np.empty(0)

    selected_table = ScoreTable(
        scorer=pool_table.scorer,
        direction=pool_table.direction,
        ids=pool_table.ids[positions] if positions else np.empty(0, dtype=np.uint64),
        datasets=[pool_table.datasets[p] for p in positions],
        values=selected_vals,
    )

    pool_stats = _summary_stats(pool_table.values)
    sel_stats = _summary_stats(selected_vals) if positions else {"count": 0}
    if positions:
        if pool_table.direction == HIGHER_IS_CLOSER:
            shift_ok = sel_stats["mean"] >= pool_stats["mean"]
        else:
            shift_ok = sel_stats["mean"] <= pool_stats["mean"]
    else:
        shift_ok = True

    return {
        "scorer": pool_table.scorer,
        "direction": pool_table.direction,
        "pool": pool_stats,
        "selected": sel_stats,
        "pool_histogram": score_histogram(pool_table, bins=bins),
        "selected_histogram": score_histogram(selected_table, bins=bins),
        "shift_ok": bool(shift_ok),
    }
