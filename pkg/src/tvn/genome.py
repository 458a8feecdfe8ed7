"""Suffix genomes: the perturbation appended to a base prompt.

A perturbation is a fixed-length word over a closed alphabet, stored as a
tuple of alphabet indices. All variation operators (random init, uniform
crossover, per-position mutation) are pure functions of their inputs and an
explicit random source, so whole runs replay exactly from a seed.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidGenomeError

__all__ = [
    "Alphabet",
    "Suffix",
    "AdversarialPrompt",
    "DEFAULT_ALPHABET",
    "compose",
    "random_suffix",
    "crossover",
    "mutate",
]


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of characters a suffix may use.

    Whitespace is excluded by construction: the joining space between the
    base prompt and the suffix is added at composition time, never stored
    in the genome.
    """

    chars: str

    def __post_init__(self):
        if not self.chars:
            raise ConfigError("alphabet must be non-empty")
        if len(set(self.chars)) != len(self.chars):
            raise ConfigError("alphabet characters must be unique")
        for ch in self.chars:
            if ch.isspace() or not ch.isprintable():
                raise ConfigError(f"alphabet character {ch!r} not allowed")

    @property
    def size(self) -> int:
        return len(self.chars)

    def char_at(self, index: int) -> str:
        if not 0 <= index < self.size:
            raise InvalidGenomeError(
                f"gene index {index} outside alphabet of size {self.size}"
            )
        return self.chars[index]

    def index_of(self, ch: str) -> int:
        pos = self.chars.find(ch)
        if pos < 0:
            raise InvalidGenomeError(f"character {ch!r} not in alphabet")
        return pos

    def encode_word(self, word: str) -> "Suffix":
        return Suffix(tuple(self.index_of(ch) for ch in word))


# The 62 alphanumerics. Small enough to keep the search space tractable,
# rich enough (mixed case + digits) for per-model rare-token behaviour.
DEFAULT_ALPHABET = Alphabet(
    string.ascii_lowercase + string.ascii_uppercase + string.digits
)


@dataclass(frozen=True)
class Suffix:
    """Fixed-length sequence of alphabet indices; the evolvable genome."""

    genes: tuple[int, ...]

    def __post_init__(self):
        if any(g < 0 for g in self.genes):
            raise InvalidGenomeError("gene indices must be non-negative")

    def __len__(self) -> int:
        return len(self.genes)

    def decode(self, alphabet: Alphabet) -> str:
        return "".join(alphabet.char_at(g) for g in self.genes)


@dataclass(frozen=True)
class AdversarialPrompt:
    """Base prompt plus its suffix; renders deterministically."""

    base: str
    suffix: Suffix
    alphabet: Alphabet = field(default=DEFAULT_ALPHABET)

    def render(self) -> str:
        return compose(self.base, self.suffix, self.alphabet)


def compose(base: str, suffix: Suffix, alphabet: Alphabet) -> str:
    """Render ``base`` + single space + decoded suffix.

    The space delimiter makes "remove the perturbation" well defined for
    scoring: the clean text is always recoverable by dropping the last word.
    """
    return base + " " + suffix.decode(alphabet)


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def random_suffix(
    rng_seed, alphabet: Alphabet, k: int, allow_empty: bool = False
) -> Suffix:
    """Draw ``k`` independent uniform gene indices.

    ``rng_seed`` may be an integer seed or an existing numpy Generator so
    engines can pass substreams. K = 0 is permitted only when explicitly
    requested via ``allow_empty``.
    """
    if k < 0:
        raise ConfigError(f"suffix length must be non-negative, got {k}")
    if k == 0 and not allow_empty:
        raise ConfigError("zero-length suffix requires allow_empty=True")
    rng = _as_rng(rng_seed)
    genes = tuple(int(g) for g in rng.integers(0, alphabet.size, size=k))
    return Suffix(genes)


def crossover(
    a: Suffix, b: Suffix, rng: np.random.Generator
) -> tuple[Suffix, Suffix]:
    """Uniform crossover: each position independently swaps with p = 0.5."""
    if len(a) != len(b):
        raise InvalidGenomeError(
            f"crossover length mismatch: {len(a)} vs {len(b)}"
        )
    if len(a) == 0:
        return a, b
    ga = np.array(a.genes)
    gb = np.array(b.genes)
    swap = rng.random(len(a)) < 0.5
    child1 = np.where(swap, gb, ga)
    child2 = np.where(swap, ga, gb)
    return Suffix(tuple(int(g) for g in child1)), Suffix(
        tuple(int(g) for g in child2)
    )


def mutate(
    s: Suffix, rate: float, rng: np.random.Generator, alphabet: Alphabet
) -> Suffix:
    """Resample each position uniformly from the alphabet with prob ``rate``.

    The replacement draw may repeat the current character, so rate = 1 on a
    one-character alphabet is the identity.
    """
    if not 0.0 <= rate <= 1.0:
        raise ConfigError(f"mutation rate must lie in [0, 1], got {rate}")
    if len(s) == 0:
        return s
    genes = np.array(s.genes)
    # Draws happen unconditionally so the stream advances identically
    # regardless of which positions mutate.
    hits = rng.random(len(s)) < rate
    fresh = rng.integers(0, alphabet.size, size=len(s))
    out = np.where(hits, fresh, genes)
    return Suffix(tuple(int(g) for g in out))
