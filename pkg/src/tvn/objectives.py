"""The three crafting objectives over a candidate suffix.

For a perturbed prompt the engine tracks how similar each encoder finds it
to the clean prompt: similarity under the target (to be minimized), mean
similarity under the substitutes and under the reference encoder (both to
be maximized). Everything is packed into a single minimization vector
(g1, g2, g3) = (f1, -f2, -f3) so the evolutionary engine has one convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoders import cosine
from .errors import ConfigError
from .genome import Alphabet, DEFAULT_ALPHABET, Suffix, compose

__all__ = [
    "ObjectiveVector",
    "ObjectiveContext",
    "eval_f1",
    "eval_f2",
    "eval_f3",
    "eval_vector",
    "eval_vectors",
]


@dataclass(frozen=True)
class ObjectiveVector:
    """Minimization triple (g1, g2, g3) = (f1, -f2, -f3)."""

    g1: float
    g2: float
    g3: float

    @property
    def f1(self) -> float:
        return self.g1

    @property
    def f2(self) -> float:
        return -self.g2

    @property
    def f3(self) -> float:
        return -self.g3

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.g1, self.g2, self.g3)


class ObjectiveContext:
    """Immutable evaluation context: one base prompt, one encoder lineup.

    Base-prompt encodings are computed once at construction and cached;
    recomputing them never changes an objective value.
    """

    def __init__(
        self,
        base_prompt: str,
        target,
        substitutes: list,
        reference,
        alphabet: Alphabet = DEFAULT_ALPHABET,
        f2_mode: str = "mean",
    ):
        if not base_prompt:
            raise ConfigError("base prompt must be non-empty")
        if not substitutes:
            raise ConfigError("at least one substitute encoder is required")
        names = [e.name for e in substitutes]
        if len(set(names)) != len(names):
            raise ConfigError("substitute encoder names must be unique")
        if target.name in names:
            raise ConfigError("target encoder cannot appear in substitutes")
        if f2_mode not in ("mean", "min"):
            raise ConfigError(f"unknown f2 aggregation {f2_mode!r}")

        self.base_prompt = base_prompt
        self.target = target
        self.substitutes = list(substitutes)
        self.reference = reference
        self.alphabet = alphabet
        self.f2_mode = f2_mode
        self.reference_is_substitute = reference.name in names
        self.base_encodings = {
            enc.name: enc.encode_one(base_prompt) for enc in self._encoders()
        }

    def _encoders(self):
        seen = {}
        for enc in [self.target, *self.substitutes, self.reference]:
            seen.setdefault(enc.name, enc)
        return list(seen.values())

    def render(self, suffix: Suffix) -> str:
        return compose(self.base_prompt, suffix, self.alphabet)

    # Batched evaluation: exactly one encode call per encoder per batch.
    def evaluate(self, suffixes: list[Suffix]) -> list[ObjectiveVector]:
        if not suffixes:
            return []
        texts = [self.render(s) for s in suffixes]
        sims: dict[str, np.ndarray] = {}
        for enc in self._encoders():
            base = self.base_encodings[enc.name]
            encoded = enc.encode(texts)
            sims[enc.name] = np.clip(encoded @ base, -1.0, 1.0)
        f1 = sims[self.target.name]
        sub_block = np.stack([sims[e.name] for e in self.substitutes])
        if self.f2_mode == "mean":
            f2 = sub_block.mean(axis=0)
        else:
            f2 = sub_block.min(axis=0)
        f3 = sims[self.reference.name]
        return [
            ObjectiveVector(float(a), -float(b), -float(c))
            for a, b, c in zip(f1, f2, f3)
        ]

    def target_similarity(self, suffixes: list[Suffix]) -> np.ndarray:
        """f1 only, for search paths that never touch the other encoders."""
        texts = [self.render(s) for s in suffixes]
        base = self.base_encodings[self.target.name]
        return np.clip(self.target.encode(texts) @ base, -1.0, 1.0)

    def substitute_similarities(self, suffix: Suffix) -> list[float]:
        text = self.render(suffix)
        return [
            cosine(enc.encode_one(text), self.base_encodings[enc.name])
            for enc in self.substitutes
        ]


def eval_f1(ctx: ObjectiveContext, suffix: Suffix) -> float:
    """Target-encoder similarity between perturbed and clean prompt."""
    return float(ctx.target_similarity([suffix])[0])


def eval_f2(ctx: ObjectiveContext, suffix: Suffix) -> float:
    """Aggregate substitute-encoder similarity (mean by default)."""
    sims = ctx.substitute_similarities(suffix)
    if ctx.f2_mode == "min":
        return min(sims)
    return sum(sims) / len(sims)


def eval_f3(ctx: ObjectiveContext, suffix: Suffix) -> float:
    """Reference-encoder similarity between perturbed and clean prompt."""
    text = ctx.render(suffix)
    return cosine(
        ctx.reference.encode_one(text),
        ctx.base_encodings[ctx.reference.name],
    )


def eval_vector(ctx: ObjectiveContext, suffix: Suffix) -> ObjectiveVector:
    return ctx.evaluate([suffix])[0]


def eval_vectors(
    ctx: ObjectiveContext, suffixes: list[Suffix]
) -> list[ObjectiveVector]:
    return ctx.evaluate(suffixes)
