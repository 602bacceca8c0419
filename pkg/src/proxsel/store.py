"""On-disk feature store: fixed-stride binary vectors plus a JSONL metadata sidecar.

Binary layout of a ``.fst`` file (all little-endian):

    header:  magic "FSTR" | version u32 | dim u32 | count u64 | aux_count u32 | reserved u32
    ids:     count x u64
    vectors: count x dim x f32, row-major
    aux:     count x aux_count x f32

Vectors are stored as float32; every computation downstream promotes to
float64. Metadata (dataset label, source key, aux channel names) lives in
``<stem>.meta.jsonl``, one JSON object per record, so the binary file stays
fixed-stride and memory-mappable.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

MAGIC = b"FSTR"
VERSION = 1
_HEADER = struct.Struct("<4sIIQII")

_SCAN_BLOCK = 65536


class StoreError(Exception):
    """Base error for feature-store failures."""


class StoreFormatError(StoreError):
    """The on-disk file does not conform to the binary format."""


@dataclass
class FeatureRecord:
    """One sample: id, dataset label, feature vector, optional aux scalars."""

    id: int
    dataset: str
    vector: np.ndarray
    aux: dict[str, float] = field(default_factory=dict)
    key: str = ""


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: list[dict]


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.jsonl")


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_store(
    records: Sequence[FeatureRecord],
    path: str | Path,
    dim: int | None = None,
) -> dict:
    """Write records to a ``.fst`` file plus its ``.meta.jsonl`` sidecar.

    All records must share one vector dimension and carry unique ids; any
    non-finite vector or aux value is rejected. ``dim`` is only needed for
    an empty record sequence (defaults to 0 there). Returns a summary dict
    with ``count`` and ``dim``. Writes are atomic (temp file then rename).
    """
    path = Path(path)
    records = list(records)

    if records:
        inferred = int(np.asarray(records[0].vector).shape[-1])
        if dim is not None and dim != inferred:
            raise ValueError(f"declared dim {dim} does not match records (dim {inferred})")
        dim = inferred
    elif dim is None:
        dim = 0

    aux_names = list(records[0].aux.keys()) if records else []
    aux_count = len(aux_names)

    ids = np.empty(len(records), dtype="<u8")
    vectors = np.empty((len(records), dim), dtype="<f4")
    aux = np.empty((len(records), aux_count), dtype="<f4")

    seen: set[int] = set()
    for i, rec in enumerate(records):
        vec = np.asarray(rec.vector, dtype=np.float64).ravel()
        if vec.shape[0] != dim:
            raise ValueError(
                f"dimension mismatch at record id {rec.id}: got {vec.shape[0]}, expected {dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"non-finite vector value at record id {rec.id}")
        if rec.id in seen:
            raise ValueError(f"duplicate record id {rec.id}")
        if rec.id < 0:
            raise ValueError(f"negative record id {rec.id}")
        seen.add(rec.id)
        if list(rec.aux.keys()) != aux_names:
            raise ValueError(
                f"aux schema mismatch at record id {rec.id}: "
                f"got {list(rec.aux.keys())}, expected {aux_names}"
            )
        row_aux = np.asarray([rec.aux[name] for name in aux_names], dtype=np.float64)
        if row_aux.size and not np.all(np.isfinite(row_aux)):
            raise ValueError(f"non-finite aux value at record id {rec.id}")
        ids[i] = rec.id
        vectors[i] = vec.astype("<f4")
        aux[i] = row_aux.astype("<f4")

    header = _HEADER.pack(MAGIC, VERSION, dim, len(records), aux_count, 0)
    _atomic_write_bytes(path, header + ids.tobytes() + vectors.tobytes() + aux.tobytes())

    meta_lines = []
    for i, rec in enumerate(records):
        obj: dict = {"id": int(rec.id), "dataset": rec.dataset, "key": rec.key}
        if i == 0:
            obj["aux_names"] = aux_names
        meta_lines.append(json.dumps(obj))
    _atomic_write_text(_meta_path(path), "".join(line + "\n" for line in meta_lines))

    return {"count": len(records), "dim": dim}


class FeatureStore:
    """Read-only, lazily mapped view of a ``.fst`` file.

    Opening touches only the header and sidecar; vector bytes are read on
    access through a memory map. Instances are immutable and safe to share
    across concurrent readers.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        if not self.path.exists():
            raise StoreError(f"no such store: {self.path}")
        size = self.path.stat().st_size
        if size < _HEADER.size:
            raise StoreFormatError(f"{self.path}: file shorter than header")
        with open(self.path, "rb") as fh:
            magic, version, dim, count, aux_count, _ = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != MAGIC:
            raise StoreFormatError(f"{self.path}: bad magic {magic!r}")
        if version != VERSION:
            raise StoreFormatError(f"{self.path}: unsupported version {version}")
        if count > 0 and dim == 0:
            raise StoreFormatError(f"{self.path}: nonempty store with dim 0")

        expected = _HEADER.size + count * 8 + count * dim * 4 + count * aux_count * 4
        if size < expected:
            raise StoreFormatError(
                f"{self.path}: truncated payload (need {expected} bytes, have {size})"
            )

        self.dim = int(dim)
        self.count = int(count)
        self._aux_count = int(aux_count)
        offset = _HEADER.size
        if count:
            self.ids = np.memmap(self.path, dtype="<u8", mode="r", offset=offset, shape=(count,))
            offset += count * 8
            self.vectors = np.memmap(
                self.path, dtype="<f4", mode="r", offset=offset, shape=(count, dim)
            )
            offset += count * dim * 4
            if aux_count:
                self._aux = np.memmap(
                    self.path, dtype="<f4", mode="r", offset=offset, shape=(count, aux_count)
                )
            else:
                self._aux = None
        else:
            self.ids = np.empty(0, dtype="<u8")
            self.vectors = np.empty((0, dim), dtype="<f4")
            self._aux = None

        # Sidecar metadata loads lazily so opening stays O(1) in count.
        self._meta: tuple[list[str], list[str], list[str]] | None = None

    def _read_meta(self) -> tuple[list[str], list[str], list[str]]:
        if self._meta is not None:
            return self._meta
        meta = _meta_path(self.path)
        datasets = [""] * self.count
        keys = [""] * self.count
        aux_names = [f"aux{i}" for i in range(self._aux_count)]
        if meta.exists():
            by_id: dict[int, tuple[str, str]] = {}
            with open(meta, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh):
                    line = line.strip()
                    if not line:
                        continue
                    obj = json.loads(line)
                    if lineno == 0 and "aux_names" in obj:
                        aux_names = list(obj["aux_names"])
                    by_id[int(obj["id"])] = (obj.get("dataset", ""), obj.get("key", ""))
            for i, rid in enumerate(self.ids):
                ds, key = by_id.get(int(rid), ("", ""))
                datasets[i] = ds
                keys[i] = key
        if len(aux_names) != self._aux_count:
            raise StoreFormatError(
                f"{self.path}: sidecar lists {len(aux_names)} aux names, "
                f"header says {self._aux_count}"
            )
        self._meta = (aux_names, datasets, keys)
        return self._meta

    @property
    def aux_schema(self) -> list[str]:
        return self._read_meta()[0]

    @property
    def datasets(self) -> list[str]:
        return self._read_meta()[1]

    @property
    def keys(self) -> list[str]:
        return self._read_meta()[2]

    def __len__(self) -> int:
        return self.count

    def matrix(self, indices: np.ndarray | None = None) -> np.ndarray:
        """Vectors as a float64 array, optionally gathered by row indices."""
        if indices is None:
            return np.asarray(self.vectors, dtype=np.float64)
        return np.asarray(self.vectors[indices], dtype=np.float64)

    def vector(self, i: int) -> np.ndarray:
        return np.asarray(self.vectors[i], dtype=np.float64)

    def aux_column(self, name: str) -> np.ndarray:
        """One aux channel as float64; raises if the channel is absent."""
        if self._aux is None or name not in self.aux_schema:
            raise ValueError(f"store {self.path} has no aux channel {name!r}")
        return np.asarray(self._aux[:, self.aux_schema.index(name)], dtype=np.float64)

    def has_aux(self, name: str) -> bool:
        return self._aux is not None and name in self.aux_schema

    def record(self, i: int) -> FeatureRecord:
        aux = {}
        if self._aux is not None:
            aux = {name: float(self._aux[i, j]) for j, name in enumerate(self.aux_schema)}
        return FeatureRecord(
            id=int(self.ids[i]),
            dataset=self.datasets[i],
            vector=np.array(self.vectors[i]),
            aux=aux,
            key=self.keys[i],
        )

    def iter_records(self) -> Iterator[FeatureRecord]:
        for i in range(self.count):
            yield self.record(i)


def open_store(path: str | Path) -> FeatureStore:
    """Open a ``.fst`` file as a read-only view, validating the header only."""
    return FeatureStore(path)


def validate_store(store: FeatureStore) -> ValidationReport:
    """Full scan: report non-finite entries and duplicate ids, never raise."""
    issues: list[dict] = []

    for start in range(0, store.count, _SCAN_BLOCK):
        block = store.vectors[start : start + _SCAN_BLOCK]
        bad = ~np.all(np.isfinite(block), axis=1)
        for off in np.nonzero(bad)[0]:
            issues.append(
                {"kind": "non_finite_vector", "id": int(store.ids[start + off])}
            )
        if store._aux is not None:
            aux_block = store._aux[start : start + _SCAN_BLOCK]
            bad_aux = ~np.all(np.isfinite(aux_block), axis=1)
            for off in np.nonzero(bad_aux)[0]:
                issues.append(
                    {"kind": "non_finite_aux", "id": int(store.ids[start + off])}
                )

    uniq, counts = np.unique(np.asarray(store.ids), return_counts=True)
    for rid in uniq[counts > 1]:
        issues.append({"kind": "duplicate_id", "id": int(rid)})

    return ValidationReport(ok=not issues, issues=issues)


def ingest_jsonl(in_path: str | Path, out_path: str | Path) -> dict:
    """Convert a JSON-lines vector dump into a ``.fst`` store.

    Each input line is ``{"id": int, "dataset": str, "vector": [...]}`` with
    optional ``"aux"`` (name -> value mapping) and ``"key"``.
    """
    records: list[FeatureRecord] = []
    with open(in_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(
                FeatureRecord(
                    id=int(obj["id"]),
                    dataset=obj.get("dataset", ""),
                    vector=np.asarray(obj["vector"], dtype=np.float64),
                    aux=dict(obj.get("aux", {})),
                    key=obj.get("key", ""),
                )
            )
    return write_store(records, out_path)
