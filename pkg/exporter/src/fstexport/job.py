"""Export jobs: the input manifest, its fail-fast scan, and job parameters."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

POOLINGS = ("last_token", "mean_tokens")


class ExportError(Exception):
    """Raised for unresolvable samples, dimension drift, or bad job config."""


@dataclass(frozen=True)
class Sample:
    key: str
    dataset: str
    image: str
    text: str


@dataclass(frozen=True)
class ExportJob:
    manifest_path: str | Path
    output_stem: str | Path
    provider_id: str = "stub"
    provider_options: dict = field(default_factory=dict)
    pooling: str = "last_token"
    batch_size: int = 64

    def __post_init__(self) -> None:
        if self.pooling not in POOLINGS:
            raise ExportError(f"unknown pooling {self.pooling!r}; expected one of {POOLINGS}")
        if self.batch_size < 1:
            raise ExportError("batch_size must be >= 1")


def read_manifest(path: str | Path) -> list[Sample]:
    samples: list[Sample] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            samples.append(
                Sample(
                    key=str(obj.get("key", "")),
                    dataset=str(obj.get("dataset", "")),
                    image=str(obj.get("image", "")),
                    text=str(obj.get("text", "")),
                )
            )
    return samples


def scan_samples(samples: list[Sample], needs_images: bool) -> None:
    """Fail fast before any embedding: collect every offender, then raise."""
    offenders: list[str] = []
    for i, sample in enumerate(samples):
        if not sample.key:
            offenders.append(f"index {i}: missing key")
        if not sample.dataset:
            offenders.append(f"index {i} (key {sample.key!r}): missing dataset")
        if needs_images:
            if not sample.image:
                offenders.append(f"index {i} (key {sample.key!r}): missing image")
            elif "://" not in sample.image and not Path(sample.image).exists():
                offenders.append(
                    f"index {i} (key {sample.key!r}): unreadable image {sample.image!r}"
                )
    if offenders:
        raise ExportError(
            "unresolvable samples:\n  " + "\n  ".join(offenders)
        )
