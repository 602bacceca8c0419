"""Export orchestration: manifest -> provider batches -> .fst store."""

from __future__ import annotations

from pathlib import Path

from .job import ExportError, ExportJob, read_manifest, scan_samples
from .providers import get_provider
from .writer import StoreWriter


def export(job: ExportJob) -> dict:
    """Embed every manifest sample and write the store plus meta sidecar.

    Ids are assigned sequentially in manifest order. The whole manifest is
    scanned before any embedding starts, and a provider whose output
    dimension changes mid-job aborts the export.
    """
    provider = get_provider(job.provider_id, job.provider_options)
    samples = read_manifest(job.manifest_path)
    scan_samples(samples, needs_images=provider.needs_images)

    out_path = Path(job.output_stem)
    if out_path.suffix != ".fst":
        out_path = out_path.with_name(out_path.name + ".fst")

    if not samples:
        writer = StoreWriter(out_path, count=0, dim=0)
        return writer.finalize()

    first = provider.embed_batch(samples[: job.batch_size], job.pooling)
    dim = first.shape[1]
    writer = StoreWriter(out_path, count=len(samples), dim=dim, aux_names=provider.aux_names)

    try:
        start = 0
        batch_vectors = first
        while True:
            batch = samples[start : start + job.batch_size]
            if batch_vectors.shape[0] != len(batch):
                raise ExportError("provider returned a misshapen batch")
            if batch_vectors.shape[1] != dim:
                raise ExportError(
                    f"provider dimension drift mid-job: batch at index {start} has dim "
                    f"{batch_vectors.shape[1]}, job established {dim}"
                )
            writer.append(
                batch_vectors,
                datasets=[s.dataset for s in batch],
                keys=[s.key for s in batch],
                aux=provider.aux_batch(batch) if provider.aux_names else None,
            )
            start += len(batch)
            if start >= len(samples):
                break
            batch_vectors = provider.embed_batch(
                samples[start : start + job.batch_size], job.pooling
            )
    except Exception:
        writer.abort()
        raise

    return writer.finalize()
