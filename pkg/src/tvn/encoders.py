"""Text-encoder providers: unit-vector embeddings, cosine, synthetic zoo
encoders, and a client for remote encoders speaking the wire protocol.

Synthetic encoders stand in for a family of production text encoders that
were all fine-tuned from one pretrained backbone. Each encoder mixes a
shared semantic map (identical across the family) with a model-specific
map, which gives the family three properties the experiments rely on:

* distinct encoders agree on ordinary text (shared component dominates),
* appending a short nonsense word barely moves any encoder (rare tokens
  are downweighted in the linear map, like rare subwords in a real model),
* each encoder has its own set of rare trigger tokens that rotate its
  model-specific component violently, so a per-model adversarial surface
  exists, plus a sparse set of "promiscuous" tokens that trigger every
  encoder at once, which is what makes single-objective attacks transfer.

All randomness inside an encoder derives from integer hashing of
(seed, word) material, so a fixed spec and text produce a byte-identical
vector on every run and platform.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from hashlib import blake2b

import numpy as np
import requests

from .errors import ConfigError, EncoderProtocolError, EncoderTransportError

__all__ = [
    "EncoderId",
    "SyntheticEncoderSpec",
    "SyntheticEncoder",
    "RemoteEncoder",
    "cosine",
    "normalize",
    "reference_spec",
    "REFERENCE_SEED",
]

# Mixing weight of the shared semantic map. 0.7 keeps clean prompts scoring
# alike across the family while leaving a per-model adversarial direction.
DEFAULT_ALPHA = 0.7
DEFAULT_DIM = 256

# Linear-map word weights: a word containing a digit counts as a rare token.
RARE_WORD_WEIGHT = 0.3
COMMON_WORD_WEIGHT = 1.0

# Context anchor: a constant direction per hash space that dominates every
# text's linear part, so one appended word shifts the embedding only a little
# (mirrors how much of a sentence embedding is shared sentence context).
ANCHOR_WEIGHT = 15.0 ** 0.5

# Trigger lottery over rare (digit-bearing) words. A "surgical" trigger fires
# for one encoder only; a "promiscuous" word fires for every encoder, each
# with its own strength. Rotation cosine is -strength.
SURGICAL_TRIGGER_PROB = 0.003
PROMISCUOUS_WORD_PROB = 0.003
TRIGGER_STRENGTH_MIN = 0.2
TRIGGER_STRENGTH_MAX = 1.0

# Seed of the shared hash space and of the designated reference encoder.
SHARED_SPACE_SEED = 0x5EED_CA5E
REFERENCE_SEED = 0x0C11_905E


def normalize(values: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm; rejects zero and non-finite vectors."""
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("embedding contains non-finite values")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ConfigError("cannot normalize a zero vector")
    return arr / norm


def _unit(arr: np.ndarray) -> np.ndarray:
    # Hot-path normalize for internally built vectors (known finite).
    return arr / np.sqrt(arr @ arr)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of unit vectors, clamped into [-1, 1] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


@dataclass(frozen=True)
class EncoderId:
    name: str
    kind: str  # "synthetic" | "remote"

    def __post_init__(self):
        if self.kind not in ("synthetic", "remote"):
            raise ConfigError(f"unknown encoder kind {self.kind!r}")


@dataclass(frozen=True)
class SyntheticEncoderSpec:
    """Deterministic recipe for one synthetic encoder."""

    seed: int
    dim: int = DEFAULT_DIM
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.dim < 8:
            raise ConfigError(f"dim must be >= 8, got {self.dim}")
        if self.dim % 2 != 0:
            raise ConfigError("dim must be even (shared/specific halves)")


def reference_spec(dim: int = DEFAULT_DIM) -> SyntheticEncoderSpec:
    """Spec of the designated pretrained-reference encoder (alpha = 1)."""
    return SyntheticEncoderSpec(seed=REFERENCE_SEED, dim=dim, alpha=1.0)


# ---------------------------------------------------------------------------
# Integer hashing utilities (stable across processes and platforms).
# ---------------------------------------------------------------------------

def _digest(*parts, size: int = 8) -> bytes:
    material = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return blake2b(material, digest_size=size).digest()


def _h64(*parts) -> int:
    return int.from_bytes(_digest(*parts), "big")


def _hu(*parts) -> float:
    """Hash-uniform float in [0, 1)."""
    return _h64(*parts) / 2.0 ** 64


def _sign_vector(dim: int, *parts) -> np.ndarray:
    """Unit vector of +-1/sqrt(dim) entries derived from hash bits."""
    signs = np.empty(dim, dtype=np.float64)
    filled = 0
    block = 0
    while filled < dim:
        chunk = _digest(*parts, "block", block, size=64)
        bits = np.unpackbits(np.frombuffer(chunk, dtype=np.uint8))
        take = min(dim - filled, bits.size)
        signs[filled:filled + take] = bits[:take] * 2.0 - 1.0
        filled += take
        block += 1
    return signs / dim ** 0.5


def _is_rare_word(word: str) -> bool:
    return any(ch.isdigit() for ch in word)


def _word_trigrams(word: str) -> list[str]:
    padded = f"^{word}$"
    if len(padded) < 3:
        return [padded]
    return [padded[i:i + 3] for i in range(len(padded) - 2)]


class _HashSpace:
    """One half of the embedding: a seeded linear map plus trigger table."""

    def __init__(self, seed: int, half_dim: int):
        self.seed = seed
        self.half = half_dim
        self.anchor = _sign_vector(half_dim, seed, "anchor")
        self._word_cache: dict[str, np.ndarray] = {}
        self._trigger_cache: dict[str, tuple[float, np.ndarray] | None] = {}
        self._prefix_cache: dict[tuple[str, ...], np.ndarray] = {}

    def word_vector(self, word: str) -> np.ndarray:
        vec = self._word_cache.get(word)
        if vec is None:
            acc = np.zeros(self.half, dtype=np.float64)
            for tg in _word_trigrams(word):
                h = _h64(self.seed, "tri", tg)
                idx = h % self.half
                sign = 1.0 if (h >> 63) & 1 else -1.0
                acc[idx] += sign
            if not acc.any():
                # Trigrams of a short word can cancel bucket-for-bucket;
                # fall back to hashing the whole word.
                acc = _sign_vector(self.half, self.seed, "whole", word)
            vec = _unit(acc)
            self._word_cache[word] = vec
        return vec

    def _word_term(self, word: str) -> np.ndarray:
        weight = RARE_WORD_WEIGHT if _is_rare_word(word) else COMMON_WORD_WEIGHT
        return weight * self.word_vector(word)

    def _prefix_sum(self, words: tuple[str, ...]) -> np.ndarray:
        """Unnormalized linear sum over a word prefix, memoized.

        Candidate texts in a run share long base-prompt prefixes, so this
        turns each encode into a single vector add. Entries are treated as
        immutable by callers.
        """
        cached = self._prefix_cache.get(words)
        if cached is None:
            if not words:
                cached = ANCHOR_WEIGHT * self.anchor
            else:
                cached = self._prefix_sum(words[:-1]) + self._word_term(words[-1])
            self._prefix_cache[words] = cached
        return cached

    def linear(self, words: list[str]) -> np.ndarray:
        if not words:
            return _unit(ANCHOR_WEIGHT * self.anchor)
        prefix = tuple(words[:-1])
        # The full tuple is not memoized: last words are usually unique
        # candidate suffixes, and the add below allocates a fresh array.
        return _unit(self._prefix_sum(prefix) + self._word_term(words[-1]))

    def trigger(self, word: str) -> tuple[float, np.ndarray] | None:
        """Rotation (cosine, direction) this space applies for ``word``.

        Only rare (digit-bearing) words can trigger; ordinary vocabulary
        never perturbs the space beyond its linear contribution.
        """
        if word in self._trigger_cache:
            return self._trigger_cache[word]
        result = None
        if _is_rare_word(word):
            promiscuous = _hu("promiscuous", word) < PROMISCUOUS_WORD_PROB
            surgical = (
                _hu("surgical", self.seed, word) < SURGICAL_TRIGGER_PROB
            )
            if promiscuous or surgical:
                # Squaring the uniform draw thins out near-maximal
                # strengths, so wider searches find measurably stronger
                # triggers instead of everyone saturating the ceiling.
                span = TRIGGER_STRENGTH_MAX - TRIGGER_STRENGTH_MIN
                strength = TRIGGER_STRENGTH_MIN + span * _hu(
                    "strength", self.seed, word
                ) ** 2
                direction = _sign_vector(self.half, self.seed, "dir", word)
                result = (-strength, direction)
        self._trigger_cache[word] = result
        return result

    def encode(self, words: list[str], apply_triggers: bool) -> np.ndarray:
        vec = self.linear(words)
        if apply_triggers:
            for word in words:
                fire = self.trigger(word)
                if fire is None:
                    continue
                rot_cos, direction = fire
                vec = _rotate(vec, rot_cos, direction)
        return vec


def _rotate(unit: np.ndarray, target_cos: float, direction: np.ndarray) -> np.ndarray:
    """Rotate ``unit`` in the (unit, direction) plane to the given cosine."""
    ortho = direction - np.dot(direction, unit) * unit
    norm = float(np.linalg.norm(ortho))
    if norm < 1e-12:
        return unit
    ortho /= norm
    sin = (1.0 - target_cos * target_cos) ** 0.5
    return target_cos * unit + sin * ortho


_SHARED_SPACES: dict[int, _HashSpace] = {}


def _shared_space(half_dim: int) -> _HashSpace:
    # Shared across every encoder of a given dimension; triggers in the
    # shared space are disabled (the pretrained backbone has no per-model
    # idiosyncrasy by definition).
    space = _SHARED_SPACES.get(half_dim)
    if space is None:
        space = _HashSpace(SHARED_SPACE_SEED, half_dim)
        _SHARED_SPACES[half_dim] = space
    return space


class SyntheticEncoder:
    """Deterministic text encoder: unit vectors over R^dim.

    Layout: the shared map occupies coordinates [0, dim/2), the
    model-specific map [dim/2, dim). Keeping the halves orthogonal makes
    the mixture cosine an exact convex combination of the two maps'
    cosines, which the experiment suite leans on.
    """

    kind = "synthetic"

    def __init__(self, spec: SyntheticEncoderSpec, name: str = ""):
        self.spec = spec
        self.name = name or f"synthetic-{spec.seed}"
        self.dim = spec.dim
        self._half = spec.dim // 2
        self._personal = _HashSpace(spec.seed, self._half)

    @property
    def encoder_id(self) -> EncoderId:
        return EncoderId(self.name, "synthetic")

    def encode(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise ConfigError("encode requires at least one text")
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        alpha = self.spec.alpha
        shared = _shared_space(self._half)
        for i, text in enumerate(texts):
            if not text:
                raise ConfigError("cannot encode an empty text")
            words = text.lower().split()
            if alpha > 0.0:
                out[i, : self._half] = alpha * shared.encode(
                    words, apply_triggers=False
                )
            if alpha < 1.0:
                out[i, self._half :] = (1.0 - alpha) * self._personal.encode(
                    words, apply_triggers=True
                )
            out[i] = _unit(out[i])
        return out

    def encode_one(self, text: str) -> np.ndarray:
        return self.encode([text])[0]


class RemoteEncoder:
    """Client for encoders behind the JSON-over-HTTP wire protocol.

    GET /health       -> {"status": "ok", "dim": <int>, "model": <str>}
    POST /encode      -> {"embeddings": [[...], ...]} for {"texts": [...]}

    Transient failures are retried with bounded backoff (max_attempts
    total tries). Replies are validated against the handshake dimension
    and renormalized client-side. Large inputs are split into batches of
    ``batch_size``; up to ``max_inflight`` batches run concurrently, and
    results are reassembled in request order (responses are matched to
    requests within each batch, never across batches).
    """

    kind = "remote"

    def __init__(
        self,
        endpoint: str,
        name: str = "",
        timeout: float = 10.0,
        max_attempts: int = 3,
        backoff: float = 0.2,
        batch_size: int = 64,
        max_inflight: int = 4,
        session: requests.Session | None = None,
    ):
        if max_inflight < 1:
            raise ConfigError("max_inflight must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.batch_size = batch_size
        self.max_inflight = max_inflight
        self._session = session or requests.Session()
        self.name = name or endpoint
        info = self._handshake()
        self.dim = int(info["dim"])
        self.model = str(info.get("model", ""))
        if self.model:
            self.name = f"{self.name} ({self.model})"

    @property
    def encoder_id(self) -> EncoderId:
        return EncoderId(self.name, "remote")

    def _handshake(self) -> dict:
        reply = self._request("GET", "/health")
        if reply.get("status") != "ok" or "dim" not in reply:
            raise EncoderProtocolError(
                self.name, f"bad health reply: {reply!r}"
            )
        return reply

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = self.endpoint + path
        last_error = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._session.request(
                    method, url, json=payload, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code >= 500:
                last_error = f"server error {resp.status_code}"
                continue
            if resp.status_code != 200:
                detail = ""
                try:
                    detail = resp.json().get("error", "")
                except ValueError:
                    pass
                raise EncoderProtocolError(
                    self.name, f"status {resp.status_code}: {detail}"
                )
            try:
                return resp.json()
            except ValueError:
                raise EncoderProtocolError(self.name, "reply is not JSON")
        raise EncoderTransportError(
            self.name, f"gave up after {self.max_attempts} attempts: {last_error}"
        )

    def encode(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise ConfigError("encode requires at least one text")
        if any(not t for t in texts):
            raise ConfigError("cannot encode an empty text")
        chunks = [
            texts[start : start + self.batch_size]
            for start in range(0, len(texts), self.batch_size)
        ]
        if len(chunks) == 1:
            return np.vstack(self._encode_chunk(chunks[0]))
        from concurrent.futures import ThreadPoolExecutor

        workers = min(self.max_inflight, len(chunks))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(self._encode_chunk, chunks))
        return np.vstack([row for part in parts for row in part])

    def _encode_chunk(self, chunk: list[str]) -> list[np.ndarray]:
        reply = self._request("POST", "/encode", {"texts": chunk})
        return self._validate(chunk, reply)

    def encode_one(self, text: str) -> np.ndarray:
        return self.encode([text])[0]

    def _validate(self, chunk: list[str], reply: dict) -> list[np.ndarray]:
        vectors = reply.get("embeddings")
        if not isinstance(vectors, list) or len(vectors) != len(chunk):
            raise EncoderProtocolError(
                self.name,
                f"expected {len(chunk)} embeddings, got "
                f"{len(vectors) if isinstance(vectors, list) else type(vectors)}",
            )
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1 or arr.shape[0] != self.dim:
                raise EncoderProtocolError(
                    self.name,
                    f"embedding dim {arr.shape} != declared {self.dim}",
                )
            if not np.all(np.isfinite(arr)):
                raise EncoderProtocolError(
                    self.name, "embedding contains non-finite values"
                )
            out.append(normalize(arr))
        return out
