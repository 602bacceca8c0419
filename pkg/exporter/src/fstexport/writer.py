"""Standalone writer for the engine's binary feature-store format.

Layout (little-endian): header = magic "FSTR", version u32=1, dim u32,
count u64, aux_count u32, reserved u32=0; then count x u64 ids, then
count x dim x f32 vectors (row-major), then count x aux_count x f32 aux.
Metadata goes to ``<stem>.meta.jsonl``: one object per record with
``{"id", "dataset", "key"}`` plus ``"aux_names"`` on the first line.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FSTR"
VERSION = 1
_HEADER = struct.Struct("<4sIIQII")


class StoreWriter:
    """Streams vector batches into a .fst file; count and dim fixed upfront.

    Writes go to temp files and are renamed into place on ``finalize`` so a
    crashed export never leaves a partial store behind.
    """

    def __init__(self, path: str | Path, count: int, dim: int, aux_names: tuple[str, ...] = ()):
        self.path = Path(path)
        self.count = count
        self.dim = dim
        self.aux_names = tuple(aux_names)
        self._tmp = self.path.with_name(self.path.name + ".tmp")
        self._fh = open(self._tmp, "wb")
        self._fh.write(_HEADER.pack(MAGIC, VERSION, dim, count, len(self.aux_names), 0))
        self._fh.write(np.arange(count, dtype="<u8").tobytes())
        self._rows_written = 0
        self._aux_rows: list[np.ndarray] = []
        self._meta_rows: list[dict] = []

    def append(
        self,
        vectors: np.ndarray,
        datasets: list[str],
        keys: list[str],
        aux: np.ndarray | None = None,
    ) -> None:
        vectors = np.ascontiguousarray(vectors, dtype="<f4")
        if vectors.ndim != 2 or vectors.shape[1] != self.dim:
            raise ValueError(
                f"batch dim {vectors.shape[1] if vectors.ndim == 2 else '?'} "
                f"does not match store dim {self.dim}"
            )
        if not (len(datasets) == len(keys) == vectors.shape[0]):
            raise ValueError("vectors, datasets and keys must align")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("non-finite embedding value in batch")
        if self.aux_names:
            if aux is None or aux.shape != (vectors.shape[0], len(self.aux_names)):
                raise ValueError("aux batch missing or misshapen")
            if not np.all(np.isfinite(aux)):
                raise ValueError("non-finite aux value in batch")
            self._aux_rows.append(np.ascontiguousarray(aux, dtype="<f4"))
        self._fh.write(vectors.tobytes())
        for dataset, key in zip(datasets, keys):
            self._meta_rows.append(
                {"id": self._rows_written, "dataset": dataset, "key": key}
            )
            self._rows_written += 1

    def abort(self) -> None:
        if not self._fh.closed:
            self._fh.close()
        if self._tmp.exists():
            os.unlink(self._tmp)

    def finalize(self) -> dict:
        if self._rows_written != self.count:
            self.abort()
            raise ValueError(
                f"wrote {self._rows_written} rows, declared {self.count}"
            )
        if self.aux_names:
            self._fh.write(np.vstack(self._aux_rows).tobytes() if self._aux_rows else b"")
        self._fh.close()
        os.replace(self._tmp, self.path)

        meta_path = self.path.with_name(self.path.stem + ".meta.jsonl")
        lines = []
        for i, row in enumerate(self._meta_rows):
            obj = dict(row)
            if i == 0:
                obj["aux_names"] = list(self.aux_names)
            lines.append(json.dumps(obj))
        meta_tmp = meta_path.with_name(meta_path.name + ".tmp")
        meta_tmp.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        os.replace(meta_tmp, meta_path)
        return {"count": self.count, "dim": self.dim, "path": str(self.path)}
