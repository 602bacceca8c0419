"""Per-sample score tables: the common currency between scorers and selection.

Serialized as JSON lines: one header object ``{"scorer", "direction", ...}``
followed by one ``{"id", "dataset", "value"}`` object per record.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HIGHER_IS_CLOSER = "higher_is_closer"
LOWER_IS_CLOSER = "lower_is_closer"

SCORER_KINDS = ("learned_estimator", "avg_distance", "target_ppl", "delta_ppl")


@dataclass
class ScoreTable:
    scorer: str
    direction: str
    ids: np.ndarray
    datasets: list[str]
    values: np.ndarray
    config: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.ids = np.asarray(self.ids, dtype=np.uint64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.direction not in (HIGHER_IS_CLOSER, LOWER_IS_CLOSER):
            raise ValueError(f"unknown direction {self.direction!r}")
        if not (len(self.ids) == len(self.datasets) == len(self.values)):
            raise ValueError("ids, datasets and values must have equal length")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("score table contains non-finite values")

    def __len__(self) -> int:
        return len(self.values)


def write_score_table(table: ScoreTable, path: str | Path) -> None:
    path = Path(path)
    header = {"scorer": table.scorer, "direction": table.direction}
    if table.config:
        header["config"] = table.config
    lines = [json.dumps(header)]
    for rid, ds, val in zip(table.ids, table.datasets, table.values):
        lines.append(json.dumps({"id": int(rid), "dataset": ds, "value": float(val)}))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    os.replace(tmp, path)


def read_score_table(path: str | Path) -> ScoreTable:
    ids: list[int] = []
    datasets: list[str] = []
    values: list[float] = []
    header: dict | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if header is None:
                header = obj
                continue
            ids.append(int(obj["id"]))
            datasets.append(obj.get("dataset", ""))
            values.append(float(obj["value"]))
    if header is None:
        raise ValueError(f"{path}: missing score-table header line")
    return ScoreTable(
        scorer=header["scorer"],
        direction=header["direction"],
        ids=np.asarray(ids, dtype=np.uint64),
        datasets=datasets,
        values=np.asarray(values, dtype=np.float64),
        config=dict(header.get("config", {})),
    )
