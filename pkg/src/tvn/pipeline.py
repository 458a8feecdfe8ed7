"""End-to-end experiment flows shared by the CLI, the scripts, and the
acceptance suite: craft a prompt per target across a prompt set, measure
drops, run baselines, fit bands, and evaluate verification metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import greedy_attack, random_attack
from .encoders import _h64
from .errors import ConfigError
from .genome import AdversarialPrompt, Alphabet, DEFAULT_ALPHABET, Suffix
from .nsga2 import Nsga2Config, evolve
from .objectives import ObjectiveContext
from .prompts import DEFAULT_PROMPTS, PromptSet
from .simzoo import ScoreModelConfig, SimModel, Zoo, clip_text_score, generate
from .verify import (
    MetricsReport,
    SelectedPrompt,
    ThresholdBand,
    drop_rank,
    evaluate,
    fit_band,
    select_final_prompt,
)

__all__ = [
    "CraftResult",
    "PromptCraft",
    "craft_for_target",
    "own_frame_drop",
    "off_target_drops",
    "baseline_suffix_drop",
    "run_verification",
]


@dataclass(frozen=True)
class PromptCraft:
    prompt_id: str
    selection: SelectedPrompt
    unevolved: bool = False


@dataclass(frozen=True)
class CraftResult:
    target: str
    substitutes: tuple[str, ...]
    reference: str
    seed: int
    per_prompt: tuple[PromptCraft, ...]
    best: PromptCraft

    @property
    def prompt(self) -> AdversarialPrompt:
        return self.best.selection.prompt


def _reference_encoder(zoo: Zoo, reference: str):
    if reference == "reference":
        return zoo.reference
    return zoo.model(reference).encoder


def _context(
    zoo: Zoo,
    target: SimModel,
    base_prompt: str,
    alphabet: Alphabet,
    f2_mode: str,
    reference: str = "reference",
) -> ObjectiveContext:
    substitutes = zoo.substitutes_for(target.name)
    return ObjectiveContext(
        base_prompt,
        target.encoder,
        [m.encoder for m in substitutes],
        _reference_encoder(zoo, reference),
        alphabet=alphabet,
        f2_mode=f2_mode,
    )


def craft_for_target(
    zoo: Zoo,
    target_id: str,
    prompts: PromptSet = DEFAULT_PROMPTS,
    cfg: Nsga2Config | None = None,
    pool_size: int = 1000,
    seed: int = 0,
    f2_mode: str = "mean",
    trace_dir=None,
    reference: str = "reference",
) -> CraftResult:
    """Craft one deployed prompt: evolve and select per base prompt, then
    keep the prompt with the largest target drop across the set (near-ties
    resolve toward the least transferable candidate). With ``trace_dir``
    set, each evolution run writes a JSON-lines generation trace there.
    ``reference`` names the out-of-family encoder: the zoo's designated
    reference by default, or any zoo model's encoder by id."""
    cfg = cfg or Nsga2Config()
    target = zoo.model(target_id)
    if reference == target_id:
        raise ConfigError("reference encoder cannot be the target")
    crafts: list[PromptCraft] = []
    for pid, text in prompts:
        ctx = _context(zoo, target, text, cfg.alphabet, f2_mode, reference)
        run_cfg = Nsga2Config(
            population=cfg.population,
            generations=cfg.generations,
            mutation_rate=cfg.mutation_rate,
            crossover_rate=cfg.crossover_rate,
            tournament_size=cfg.tournament_size,
            suffix_len=cfg.suffix_len,
            seed=_h64(seed, "evolve", target_id, pid),
            alphabet=cfg.alphabet,
        )
        trace_path = None
        if trace_dir is not None:
            from pathlib import Path

            trace_path = Path(trace_dir) / f"trace-{target_id}-{pid}.jsonl"
        front = evolve(ctx, run_cfg, trace_path=trace_path)
        selection = select_final_prompt(
            target,
            ctx,
            front,
            pool_size=pool_size,
            rng=np.random.default_rng(_h64(seed, "pool", target_id, pid)),
            score_cfg=zoo.score_cfg,
            mutation_rate=cfg.mutation_rate,
        )
        crafts.append(
            PromptCraft(pid, selection, unevolved=cfg.generations == 0)
        )
    best = max(
        crafts,
        key=lambda c: (
            drop_rank(c.selection.drop),
            c.selection.f2,
            c.selection.prompt.suffix.decode(cfg.alphabet),
        ),
    )
    return CraftResult(
        target=target_id,
        substitutes=tuple(m.name for m in zoo.substitutes_for(target_id)),
        reference=reference,
        seed=seed,
        per_prompt=tuple(crafts),
        best=best,
    )


def own_frame_drop(
    zoo: Zoo, model: SimModel, prompt: AdversarialPrompt
) -> float:
    """Noise-free score drop of ``model`` on the prompt, measured in its
    own frame (clean score minus attacked score)."""
    cfg = zoo.score_cfg
    clean = clip_text_score(
        cfg, generate(model, prompt.base), prompt.base, model.encoder
    )
    attacked = clip_text_score(
        cfg, generate(model, prompt.render()), prompt.base, model.encoder
    )
    return clean - attacked


def off_target_drops(
    zoo: Zoo, target_id: str, prompt: AdversarialPrompt, pool: str = "closed"
) -> dict[str, float]:
    """Own-frame drops of every non-target model in the chosen pool."""
    if pool == "closed":
        models = zoo.substitutes_for(target_id)
    elif pool == "open":
        models = zoo.open
    else:
        raise ConfigError(f"unknown pool {pool!r}")
    return {m.name: own_frame_drop(zoo, m, prompt) for m in models}


def baseline_suffix_drop(
    zoo: Zoo,
    target_id: str,
    suffix_for_prompt,
    prompts: PromptSet = DEFAULT_PROMPTS,
    alphabet: Alphabet = DEFAULT_ALPHABET,
) -> tuple[AdversarialPrompt, float]:
    """Evaluate a baseline attack under the same best-across-prompts
    protocol as crafting. ``suffix_for_prompt(ctx, pid)`` returns the
    baseline's suffix for one base prompt."""
    target = zoo.model(target_id)
    best: tuple[AdversarialPrompt, float] | None = None
    for pid, text in prompts:
        ctx = _context(zoo, target, text, alphabet, "mean")
        suffix = suffix_for_prompt(ctx, pid)
        prompt = AdversarialPrompt(text, suffix, alphabet)
        drop = own_frame_drop(zoo, target, prompt)
        if best is None or drop > best[1]:
            best = (prompt, drop)
    return best


def greedy_for_target(
    zoo: Zoo,
    target_id: str,
    prompts: PromptSet = DEFAULT_PROMPTS,
    iterations: int = 100,
    seed: int = 0,
    suffix_len: int = 5,
    alphabet: Alphabet = DEFAULT_ALPHABET,
) -> tuple[AdversarialPrompt, float]:
    return baseline_suffix_drop(
        zoo,
        target_id,
        lambda ctx, pid: greedy_attack(
            ctx,
            alphabet,
            suffix_len,
            iterations=iterations,
            seed=_h64(seed, "greedy", target_id, pid),
        ),
        prompts,
        alphabet,
    )


def random_for_target(
    zoo: Zoo,
    target_id: str,
    prompts: PromptSet = DEFAULT_PROMPTS,
    seed: int = 0,
    suffix_len: int = 5,
    alphabet: Alphabet = DEFAULT_ALPHABET,
) -> tuple[AdversarialPrompt, float]:
    return baseline_suffix_drop(
        zoo,
        target_id,
        lambda ctx, pid: random_attack(
            alphabet, suffix_len, seed=_h64(seed, "random", target_id, pid)
        ),
        prompts,
        alphabet,
    )


@dataclass(frozen=True)
class VerificationRun:
    target: str
    setting: str
    shots: int
    band: ThresholdBand
    report: MetricsReport


def run_verification(
    zoo: Zoo,
    target_id: str,
    prompt: AdversarialPrompt,
    setting: str = "closed",
    trials: int = 200,
    shots: int = 1,
    fit_samples: int = 10,
    seed: int = 0,
) -> VerificationRun:
    """Fit a 3-sigma band from the target's scores, then run balanced
    verification trials against the chosen impostor pool."""
    target = zoo.model(target_id)
    if setting == "closed":
        impostors = zoo.substitutes_for(target_id)
    elif setting == "open":
        impostors = zoo.open
    else:
        raise ConfigError(f"unknown setting {setting!r}")
    band = fit_band(
        target,
        prompt,
        fit_samples,
        zoo.score_cfg,
        np.random.default_rng(_h64(seed, "fit", target_id)),
    )
    report = evaluate(
        target,
        impostors,
        prompt,
        band,
        trials,
        shots,
        np.random.default_rng(_h64(seed, "trials", target_id, setting, shots)),
        zoo.score_cfg,
    )
    return VerificationRun(target_id, setting, shots, band, report)
