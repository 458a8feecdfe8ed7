"""NSGA-II over suffix genomes: fast non-dominated sorting, crowding
distance, binary tournament selection, and the generational loop.

The engine owns a single seeded random stream per run; given identical
context and config it reproduces the same Pareto set bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PipelineError
from .genome import Alphabet, DEFAULT_ALPHABET, Suffix, crossover, mutate, random_suffix
from .objectives import ObjectiveContext, ObjectiveVector

__all__ = [
    "Individual",
    "Nsga2Config",
    "dominates",
    "fast_nondominated_sort",
    "crowding_distance",
    "tournament_select",
    "evolve",
    "final_selection",
]


@dataclass
class Individual:
    suffix: Suffix
    objectives: ObjectiveVector
    rank: int | None = None
    crowding: float | None = None


@dataclass(frozen=True)
class Nsga2Config:
    population: int = 50
    generations: int = 100
    mutation_rate: float = 0.3
    crossover_rate: float = 0.9
    tournament_size: int = 2
    suffix_len: int = 5
    seed: int = 0
    alphabet: Alphabet = field(default=DEFAULT_ALPHABET)

    def __post_init__(self):
        if self.population < 2 or self.population % 2 != 0:
            raise ConfigError("population must be even and >= 2")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        for name in ("mutation_rate", "crossover_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.tournament_size < 2:
            raise ConfigError("tournament size must be >= 2")
        if self.suffix_len < 1:
            raise ConfigError("suffix length must be >= 1")


def dominates(a, b) -> bool:
    """True iff ``a`` is no worse in every component and better in one."""
    ta = a.as_tuple() if isinstance(a, ObjectiveVector) else tuple(a)
    tb = b.as_tuple() if isinstance(b, ObjectiveVector) else tuple(b)
    if len(ta) != len(tb):
        raise ConfigError("objective arity mismatch")
    return all(x <= y for x, y in zip(ta, tb)) and any(
        x < y for x, y in zip(ta, tb)
    )


def fast_nondominated_sort(objectives: list[tuple]) -> list[list[int]]:
    """Deb's O(n^2 m) front construction; returns index lists per front.

    The pairwise dominance matrix is built with numpy broadcasting; front
    peeling then follows the textbook domination-count recipe.
    """
    n = len(objectives)
    if n == 0:
        return []
    arr = np.asarray(objectives, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigError("objective arity mismatch")
    le = (arr[:, None, :] <= arr[None, :, :]).all(axis=2)
    lt = (arr[:, None, :] < arr[None, :, :]).any(axis=2)
    dom = le & lt  # dom[p, q]: p dominates q
    count = dom.sum(axis=0).astype(np.int64)
    assigned = np.zeros(n, dtype=bool)
    fronts: list[list[int]] = []
    while not assigned.all():
        current = np.flatnonzero((count == 0) & ~assigned)
        if current.size == 0:  # unreachable; guards float oddities
            raise PipelineError("non-dominated sort failed to make progress")
        fronts.append([int(i) for i in current])
        assigned[current] = True
        count -= dom[current].sum(axis=0)
    return fronts


def crowding_distance(objectives: list[tuple]) -> list[float]:
    """Per-front diversity measure; boundary members get +inf.

    For each objective the front is sorted by that objective; interior
    members accumulate (next - prev) / (max - min). Zero-range objectives
    contribute nothing rather than dividing by zero.
    """
    n = len(objectives)
    if n == 0:
        raise ConfigError("crowding distance of an empty front")
    if n <= 2:
        return [math.inf] * n
    arity = len(objectives[0])
    distance = [0.0] * n
    for m in range(arity):
        order = sorted(range(n), key=lambda i: objectives[i][m])
        lo = objectives[order[0]][m]
        hi = objectives[order[-1]][m]
        distance[order[0]] = math.inf
        distance[order[-1]] = math.inf
        if hi == lo:
            continue
        for pos in range(1, n - 1):
            idx = order[pos]
            if distance[idx] == math.inf:
                continue
            gap = objectives[order[pos + 1]][m] - objectives[order[pos - 1]][m]
            distance[idx] += gap / (hi - lo)
    return distance


def _assign(pop: list[Individual]) -> list[list[int]]:
    fronts = fast_nondominated_sort([ind.objectives.as_tuple() for ind in pop])
    for rank, front in enumerate(fronts):
        dists = crowding_distance([pop[i].objectives.as_tuple() for i in front])
        for i, d in zip(front, dists):
            pop[i].rank = rank
            pop[i].crowding = d
    return fronts


def prefer(a: Individual, b: Individual, rng: np.random.Generator) -> Individual:
    """Tournament comparison: lower rank wins; ties go to larger crowding,
    then to a fair coin."""
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a if rng.random() < 0.5 else b


def tournament_select(
    pop: list[Individual], rng: np.random.Generator, size: int = 2
) -> Individual:
    """Draw ``size`` candidates (with replacement) and keep the preferred."""
    picks = rng.integers(0, len(pop), size=size)
    best = pop[int(picks[0])]
    for raw in picks[1:]:
        best = prefer(best, pop[int(raw)], rng)
    return best


def _offspring(
    pop: list[Individual], cfg: Nsga2Config, rng: np.random.Generator
) -> list[Suffix]:
    children: list[Suffix] = []
    while len(children) < cfg.population:
        p1 = tournament_select(pop, rng, cfg.tournament_size)
        p2 = tournament_select(pop, rng, cfg.tournament_size)
        if rng.random() < cfg.crossover_rate:
            c1, c2 = crossover(p1.suffix, p2.suffix, rng)
        else:
            c1, c2 = p1.suffix, p2.suffix
        children.append(mutate(c1, cfg.mutation_rate, rng, cfg.alphabet))
        if len(children) < cfg.population:
            children.append(mutate(c2, cfg.mutation_rate, rng, cfg.alphabet))
    return children


def _select_next(
    merged: list[Individual], n: int
) -> list[Individual]:
    fronts = _assign(merged)
    chosen: list[Individual] = []
    for front in fronts:
        if len(chosen) + len(front) <= n:
            chosen.extend(merged[i] for i in front)
            continue
        # Split front: keep the most spread-out members. Stable order on
        # ties keeps the run deterministic.
        remaining = n - len(chosen)
        by_crowding = sorted(
            front, key=lambda i: (-(merged[i].crowding), i)
        )
        chosen.extend(merged[i] for i in by_crowding[:remaining])
        break
    return chosen


def evolve(
    ctx: ObjectiveContext,
    cfg: Nsga2Config,
    trace_path=None,
) -> list[Individual]:
    """Run the generational loop; returns the final first front.

    The returned Pareto set is deduplicated by genome. When ``trace_path``
    is given, one JSON line per generation records the best objective
    values and front sizes.
    """
    if ctx.alphabet is not cfg.alphabet and ctx.alphabet.chars != cfg.alphabet.chars:
        raise ConfigError("context and config alphabets differ")
    rng = np.random.default_rng(cfg.seed)
    try:
        suffixes = [
            random_suffix(rng, cfg.alphabet, cfg.suffix_len)
            for _ in range(cfg.population)
        ]
        pop = _evaluate(ctx, suffixes)
        _assign(pop)
        trace = _Trace(trace_path)
        trace.record(0, pop)
        for gen in range(1, cfg.generations + 1):
            children = _offspring(pop, cfg, rng)
            merged = pop + _evaluate(ctx, children)
            pop = _select_next(merged, cfg.population)
            _assign(pop)
            trace.record(gen, pop)
        trace.close()
    except (ConfigError, PipelineError):
        raise
    except Exception as exc:  # attach progress info to encoder failures
        raise PipelineError(f"evolution aborted: {exc}") from exc
    front0 = [ind for ind in pop if ind.rank == 0]
    seen: set[tuple[int, ...]] = set()
    unique: list[Individual] = []
    for ind in front0:
        if ind.suffix.genes not in seen:
            seen.add(ind.suffix.genes)
            unique.append(ind)
    return unique


def _evaluate(ctx: ObjectiveContext, suffixes: list[Suffix]) -> list[Individual]:
    vectors = ctx.evaluate(suffixes)
    return [Individual(s, v) for s, v in zip(suffixes, vectors)]


class _Trace:
    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8") if path else None
        self._best_constrained = math.inf

    def record(self, gen: int, pop: list[Individual]):
        if self._fh is None:
            return
        f1s = [ind.objectives.f1 for ind in pop]
        f2s = [ind.objectives.f2 for ind in pop]
        f3s = [ind.objectives.f3 for ind in pop]
        # Best f1 so far among members whose substitutes stayed near the
        # clean level; monitored for the elitism regression check.
        constrained = [
            ind.objectives.f1 for ind in pop if ind.objectives.f2 >= 0.95
        ]
        if constrained:
            self._best_constrained = min(self._best_constrained, min(constrained))
        sizes: dict[int, int] = {}
        for ind in pop:
            sizes[ind.rank] = sizes.get(ind.rank, 0) + 1
        row = {
            "generation": gen,
            "best_f1": min(f1s),
            "best_f2": max(f2s),
            "best_f3": max(f3s),
            "best_constrained_f1": None
            if self._best_constrained == math.inf
            else self._best_constrained,
            "front_sizes": [sizes[r] for r in sorted(sizes)],
        }
        self._fh.write(json.dumps(row, sort_keys=True) + "\n")

    def close(self):
        if self._fh is not None:
            self._fh.close()


def final_selection(
    pareto: list[Individual],
    alphabet: Alphabet = DEFAULT_ALPHABET,
    tau2: float = 0.9,
    tau3: float = 0.9,
    relax_step: float = 0.05,
) -> Suffix:
    """Pick the best attacker among Pareto members that spare the others.

    Members must keep substitute and reference similarity above the
    (tau2, tau3) floors; among those the minimal-f1 member wins. Empty
    filters relax both floors in 0.05 steps until someone qualifies.
    Ties break on the decoded suffix string.
    """
    if not pareto:
        raise PipelineError("final selection over an empty Pareto set")
    t2, t3 = tau2, tau3
    while True:
        eligible = [
            ind
            for ind in pareto
            if ind.objectives.f2 >= t2 and ind.objectives.f3 >= t3
        ]
        if eligible:
            break
        t2 -= relax_step
        t3 -= relax_step
    best = min(
        eligible,
        key=lambda ind: (ind.objectives.f1, ind.suffix.decode(alphabet)),
    )
    return best.suffix
