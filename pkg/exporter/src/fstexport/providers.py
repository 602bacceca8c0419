"""Embedding providers behind one interface.

Real-model adapters (a frozen VLM's hidden states) plug in here; only the
deterministic stub provider is exercised in CI, so the exporter is fully
testable offline with no model downloads.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .job import ExportError, Sample


class EmbeddingProvider:
    """One batch of samples in, one float32 matrix of embeddings out.

    Subclasses set ``provider_id``, ``needs_images``, and ``aux_names``
    (empty when the provider supplies no aux channels).
    """

    provider_id: str = ""
    needs_images: bool = False
    aux_names: tuple[str, ...] = ()

    def embed_batch(self, samples: list[Sample], pooling: str) -> np.ndarray:
        raise NotImplementedError

    def aux_batch(self, samples: list[Sample]) -> np.ndarray | None:
        return None


class StubProvider(EmbeddingProvider):
    """Seeded random projection of text bytes; deterministic and offline.

    Each whitespace token maps to a byte histogram projected into the output
    space; pooling picks the last token state or the mean over tokens. With
    ``emit_logprobs`` the provider also derives pseudo log-prob aux channels
    from a stable text hash, enabling downstream perplexity scoring paths.
    """

    provider_id = "stub"
    needs_images = False

    def __init__(self, dim: int = 64, seed: int = 0, emit_logprobs: bool = False):
        if dim < 1:
            raise ExportError("stub provider dim must be >= 1")
        self.dim = dim
        rng = np.random.default_rng(seed)
        self._projection = rng.standard_normal((256, dim)) / np.sqrt(256.0)
        self.aux_names = (
            ("logprob_sum_target", "logprob_sum_base", "token_count")
            if emit_logprobs
            else ()
        )

    def _token_states(self, text: str) -> np.ndarray:
        tokens = text.split() or [""]
        hist = np.zeros((len(tokens), 256), dtype=np.float64)
        for row, token in enumerate(tokens):
            data = token.encode("utf-8")
            for byte in data:
                hist[row, byte] += 1.0
            if data:
                hist[row] /= len(data)
        return hist @ self._projection

    def embed_batch(self, samples: list[Sample], pooling: str) -> np.ndarray:
        out = np.empty((len(samples), self.dim), dtype=np.float32)
        for i, sample in enumerate(samples):
            states = self._token_states(sample.text)
            pooled = states[-1] if pooling == "last_token" else states.mean(axis=0)
            out[i] = pooled.astype(np.float32)
        return out

    def aux_batch(self, samples: list[Sample]) -> np.ndarray | None:
        if not self.aux_names:
            return None
        out = np.empty((len(samples), 3), dtype=np.float64)
        for i, sample in enumerate(samples):
            token_count = len(sample.text.split() or [""])
            digest = hashlib.sha256(sample.text.encode("utf-8")).digest()
            h1 = int.from_bytes(digest[:8], "big") / 2**64
            h2 = int.from_bytes(digest[8:16], "big") / 2**64
            out[i, 0] = -(0.5 + 2.0 * h1) * token_count
            out[i, 1] = -(0.5 + 2.0 * h2) * token_count
            out[i, 2] = float(token_count)
        return out


def get_provider(provider_id: str, options: dict) -> EmbeddingProvider:
    if provider_id == "stub":
        return StubProvider(
            dim=int(options.get("dim", 64)),
            seed=int(options.get("seed", 0)),
            emit_logprobs=bool(options.get("emit_logprobs", False)),
        )
    raise ExportError(f"unknown provider {provider_id!r}")
