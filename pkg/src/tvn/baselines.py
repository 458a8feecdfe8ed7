"""Comparison attacks: random character insertion and greedy search.

Both share the genome and objective machinery. Greedy optimizes the target
similarity only, with no non-transferability terms, which is exactly why
its suffixes tend to damage the other models as well.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import ConfigError
from .genome import Alphabet, Suffix, random_suffix
from .objectives import ObjectiveContext

__all__ = ["BaselineKind", "random_attack", "greedy_attack"]


class BaselineKind(str, Enum):
    NO_ATTACK = "no_attack"
    RANDOM = "random"
    GREEDY = "greedy"


def random_attack(alphabet: Alphabet, k: int, seed: int) -> Suffix:
    """A single uniformly random suffix; named for reporting parity."""
    return random_suffix(seed, alphabet, k)


def greedy_attack(
    ctx: ObjectiveContext,
    alphabet: Alphabet,
    k: int,
    iterations: int = 100,
    seed: int = 0,
) -> Suffix:
    """Coordinate descent on target similarity only.

    Starting from a random suffix, each iteration revisits one position
    (round-robin) and installs the alphabet character minimizing f1 given
    the other positions. Stops after ``iterations`` position updates or
    after a full pass produces no strict improvement.
    """
    if iterations < 1:
        raise ConfigError("greedy search needs at least one iteration")
    if k < 1:
        raise ConfigError("suffix length must be >= 1")
    rng = np.random.default_rng(seed)
    current = random_suffix(rng, alphabet, k)
    best_f1 = float(ctx.target_similarity([current])[0])

    pass_improved = False
    for it in range(iterations):
        pos = it % k
        candidates = [
            Suffix(current.genes[:pos] + (g,) + current.genes[pos + 1 :])
            for g in range(alphabet.size)
        ]
        sims = ctx.target_similarity(candidates)
        idx = int(np.argmin(sims))
        if float(sims[idx]) < best_f1:
            best_f1 = float(sims[idx])
            current = candidates[idx]
            pass_improved = True
        if pos == k - 1:
            if not pass_improved:
                break
            pass_improved = False
    return current
