"""fstexport: embed image-text sample manifests into .fst feature stores."""

from .export import export
from .job import ExportError, ExportJob, Sample, read_manifest, scan_samples
from .providers import EmbeddingProvider, StubProvider, get_provider
from .writer import StoreWriter

__version__ = "0.1.0"
