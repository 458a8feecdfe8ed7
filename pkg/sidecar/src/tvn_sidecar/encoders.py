"""Encoder backends for the sidecar.

Model strings select the backend:

* ``st:<checkpoint>``  - a sentence-transformers checkpoint (needs the
  ``st`` extra and either network access or a local cache),
* ``hash:<dim>:<seed>`` - a dependency-free deterministic trigram-hashing
  encoder, useful for protocol development, CI, and air-gapped runs.

Every backend returns unit-norm float vectors; the HTTP layer normalizes
again anyway, so client code can rely on unit norm regardless of backend
conventions.
"""

from __future__ import annotations

from hashlib import blake2b

import numpy as np

__all__ = ["load_encoder", "HashingTextEncoder"]


class HashingTextEncoder:
    """Seeded character-trigram hashing into signed buckets."""

    def __init__(self, dim: int = 384, seed: int = 0):
        if dim < 8:
            raise ValueError("dim must be >= 8")
        self.dim = dim
        self.seed = seed
        self.name = f"hash:{dim}:{seed}"

    def _trigrams(self, text: str):
        for word in text.lower().split():
            padded = f"^{word}$"
            if len(padded) < 3:
                yield padded
            else:
                for i in range(len(padded) - 2):
                    yield padded[i : i + 3]

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            for tg in self._trigrams(text):
                digest = blake2b(
                    f"{self.seed}\x1f{tg}".encode("utf-8"), digest_size=8
                ).digest()
                h = int.from_bytes(digest, "big")
                sign = 1.0 if (h >> 63) & 1 else -1.0
                out[row, h % self.dim] += sign
            norm = np.linalg.norm(out[row])
            if norm == 0.0:  # blank or whitespace-only text
                out[row, 0] = 1.0
            else:
                out[row] /= norm
        return out


class SentenceTransformerEncoder:
    def __init__(self, checkpoint: str):
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(checkpoint)
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.name = checkpoint

    def encode(self, texts: list[str]) -> np.ndarray:
        vectors = self._model.encode(
            texts, convert_to_numpy=True, normalize_embeddings=True
        )
        return np.asarray(vectors, dtype=np.float64)


def load_encoder(model: str):
    """Instantiate the backend named by a model string."""
    if model.startswith("hash:"):
        parts = model.split(":")
        if len(parts) != 3:
            raise ValueError("hash backend expects hash:<dim>:<seed>")
        return HashingTextEncoder(dim=int(parts[1]), seed=int(parts[2]))
    if model.startswith("st:"):
        return SentenceTransformerEncoder(model[3:])
    # Bare names default to sentence-transformers checkpoints.
    return SentenceTransformerEncoder(model)
