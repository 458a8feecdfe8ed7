"""Verification: candidate pooling and final-prompt selection, 3-sigma
threshold fitting, k-shot decisions, and closed/open-set metric evaluation.

A claimant passes when the mean of its k scores lies inside the acceptance
band mu +- 3 sigma fitted from the target's own score distribution on the
crafted prompt; both boundaries are inclusive.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PipelineError
from .genome import AdversarialPrompt, Suffix, mutate
from .nsga2 import Individual
from .objectives import ObjectiveContext
from .simzoo import ScoreModelConfig, SimModel, generate, clip_text_score, score_sample

__all__ = [
    "ThresholdBand",
    "VerificationDecision",
    "MetricsReport",
    "SelectedPrompt",
    "fit_threshold",
    "decide",
    "select_final_prompt",
    "evaluate",
    "fit_band",
]


@dataclass(frozen=True)
class ThresholdBand:
    mu: float
    sigma: float
    low: float
    high: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if self.low > self.high:
            raise ConfigError("band low must not exceed high")

    @classmethod
    def from_stats(cls, mu: float, sigma: float) -> "ThresholdBand":
        return cls(mu=mu, sigma=sigma, low=mu - 3.0 * sigma, high=mu + 3.0 * sigma)

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


def fit_threshold(scores: list[float]) -> ThresholdBand:
    """Sample mean and unbiased (n-1) standard deviation, banded at 3 sigma."""
    if len(scores) < 2:
        raise ConfigError("threshold fitting needs at least two scores")
    mu = statistics.fmean(scores)
    sigma = statistics.stdev(scores)
    return ThresholdBand.from_stats(mu, sigma)


@dataclass(frozen=True)
class VerificationDecision:
    claimed: str
    observed_scores: tuple[float, ...]
    shot: int
    verdict: bool
    band: ThresholdBand

    @property
    def mean_score(self) -> float:
        return statistics.fmean(self.observed_scores)


def decide(band: ThresholdBand, scores: list[float], k: int, claimed: str = "") -> VerificationDecision:
    """Accept iff the mean of the k scores lies inside the closed band."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    if len(scores) != k:
        raise ConfigError(f"expected {k} scores, got {len(scores)}")
    mean = statistics.fmean(scores)
    return VerificationDecision(
        claimed=claimed,
        observed_scores=tuple(scores),
        shot=k,
        verdict=band.contains(mean),
        band=band,
    )


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1_score: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "MetricsReport":
        if min(tp, fp, tn, fn) < 0:
            raise ConfigError("confusion counts must be non-negative")
        total = tp + fp + tn + fn
        if total == 0:
            raise ConfigError("metrics need at least one trial")
        accuracy = 100.0 * (tp + tn) / total
        precision = 100.0 * tp / (tp + fp) if (tp + fp) else 0.0
        recall = 100.0 * tp / (tp + fn) if (tp + fn) else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if (precision + recall)
            else 0.0
        )
        return cls(tp, fp, tn, fn, accuracy, precision, recall, f1)


# Score-drop differences below this are within one measurement's noise.
DROP_RESOLUTION = 0.5


def drop_rank(drop: float) -> int:
    """Quantize a score drop to the resolution of the scoring channel."""
    return int(round(drop / DROP_RESOLUTION))


@dataclass(frozen=True)
class SelectedPrompt:
    prompt: AdversarialPrompt
    f1: float
    f2: float
    f3: float
    attacked_score: float
    no_attack_score: float
    drop: float


def select_final_prompt(
    target: SimModel,
    ctx: ObjectiveContext,
    pareto_suffixes: list[Suffix] | list[Individual],
    pool_size: int = 1000,
    rng: np.random.Generator | None = None,
    score_cfg: ScoreModelConfig | None = None,
    mutation_rate: float = 0.3,
    f2_floor: float = 0.9,
    relax_step: float = 0.05,
) -> SelectedPrompt:
    """Pick the deployed prompt from the Pareto set plus mutated variants.

    Candidates are scored on the target (one generation each, scored in the
    target's own frame against the clean prompt; zero-mean score noise is
    excluded so selection ranks expected drops). Candidates whose mean
    substitute similarity falls below ``f2_floor`` are discarded; if the
    filter empties the pool the floor relaxes in 0.05 steps. The surviving
    candidate with the largest drop versus the no-attack score wins. Drops
    within half a percent point of each other are indistinguishable under
    the scoring noise of a real protocol, so such near-ties resolve toward
    the candidate that disturbs the substitutes least, then by suffix.
    """
    suffixes = [
        ind.suffix if isinstance(ind, Individual) else ind
        for ind in pareto_suffixes
    ]
    if not suffixes:
        raise PipelineError("candidate selection needs a non-empty Pareto set")
    if rng is None:
        rng = np.random.default_rng(0)
    score_cfg = score_cfg or ScoreModelConfig()

    pool: list[Suffix] = []
    seen: set[tuple[int, ...]] = set()
    for s in suffixes:
        if s.genes not in seen:
            seen.add(s.genes)
            pool.append(s)
    i = 0
    while len(pool) < pool_size:
        variant = mutate(suffixes[i % len(suffixes)], mutation_rate, rng, ctx.alphabet)
        if variant.genes not in seen:
            seen.add(variant.genes)
            pool.append(variant)
        i += 1
        if i > pool_size * 20:  # tiny alphabets can exhaust distinct genomes
            break

    vectors = ctx.evaluate(pool)
    no_attack = clip_text_score(
        score_cfg,
        generate(target, ctx.base_prompt),
        ctx.base_prompt,
        target.encoder,
        rng=None,
    )
    scored = []
    for suffix, vec in zip(pool, vectors):
        image = generate(target, ctx.render(suffix))
        score = clip_text_score(
            score_cfg, image, ctx.base_prompt, target.encoder, rng=None
        )
        scored.append((suffix, vec, score))

    floor = f2_floor
    while True:
        survivors = [row for row in scored if row[1].f2 >= floor]
        if survivors:
            break
        if floor <= -1.0:
            raise PipelineError(
                "no candidate passed the non-transferability filter; "
                "re-run crafting with a different seed"
            )
        floor -= relax_step

    best = max(
        survivors,
        key=lambda row: (
            drop_rank(no_attack - row[2]),
            row[1].f2,
            row[0].decode(ctx.alphabet),
        ),
    )
    suffix, vec, score = best
    return SelectedPrompt(
        prompt=AdversarialPrompt(ctx.base_prompt, suffix, ctx.alphabet),
        f1=vec.f1,
        f2=vec.f2,
        f3=vec.f3,
        attacked_score=score,
        no_attack_score=no_attack,
        drop=no_attack - score,
    )


def fit_band(
    target: SimModel,
    prompt: AdversarialPrompt,
    samples: int,
    score_cfg: ScoreModelConfig,
    rng: np.random.Generator,
) -> ThresholdBand:
    """Fit the acceptance band from the target's own scored generations."""
    if samples < 2:
        raise ConfigError("band fitting needs at least two samples")
    rendered = prompt.render()
    scores = [
        score_sample(score_cfg, target, target, rendered, prompt.base, rng)
        for _ in range(samples)
    ]
    return fit_threshold(scores)


def evaluate(
    target: SimModel,
    impostors: list[SimModel],
    prompt: AdversarialPrompt,
    band: ThresholdBand,
    trials: int,
    k: int,
    rng: np.random.Generator,
    score_cfg: ScoreModelConfig | None = None,
) -> MetricsReport:
    """Balanced verification trials against a claimant pool.

    Each trial draws a claimant (half the trials the true target, half an
    impostor chosen uniformly), scores k generations in the claimed frame,
    and applies the band decision. Metrics are percentages recomputable
    from the emitted confusion counts.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if k < 1:
        raise ConfigError("k must be >= 1")
    if not impostors:
        raise ConfigError("evaluation needs at least one impostor model")
    score_cfg = score_cfg or ScoreModelConfig()
    rendered = prompt.render()

    labels = np.zeros(trials, dtype=bool)
    labels[: trials // 2 + trials % 2] = True
    labels = labels[rng.permutation(trials)]

    tp = fp = tn = fn = 0
    for positive in labels:
        if positive:
            actual = target
        else:
            actual = impostors[int(rng.integers(0, len(impostors)))]
        scores = [
            score_sample(score_cfg, target, actual, rendered, prompt.base, rng)
            for _ in range(k)
        ]
        verdict = decide(band, scores, k, claimed=target.name).verdict
        if positive and verdict:
            tp += 1
        elif positive:
            fn += 1
        elif verdict:
            fp += 1
        else:
            tn += 1
    return MetricsReport.from_counts(tp, fp, tn, fn)
