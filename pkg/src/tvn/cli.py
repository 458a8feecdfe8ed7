"""Operator surface: craft prompts, fit thresholds, verify claimants, run
closed/open-set evaluations, build zoos, and render reports.

Every command writes its run manifest before doing work, takes its defaults
from an optional JSON config file (flags win), and exits with a distinct
code per error class: 2 config, 3 artifact/io, 4 transport, 5 pipeline.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from pathlib import Path

import numpy as np

from .artifacts import (
    OutputLock,
    dump_artifact,
    finish_manifest,
    load_artifact,
    write_manifest,
)
from .encoders import RemoteEncoder, _h64
from .errors import (
    ArtifactError,
    ConfigError,
    EncoderProtocolError,
    EncoderTransportError,
    PipelineError,
    TvnError,
)
from .genome import Alphabet, AdversarialPrompt, DEFAULT_ALPHABET
from .nsga2 import Nsga2Config
from .pipeline import craft_for_target, run_verification
from .prompts import DEFAULT_PROMPTS, PromptSet
from .simzoo import RemoteScoreClient, Zoo, build_zoo, score_sample
from .verify import ThresholdBand, decide, fit_threshold

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ARTIFACT = 3
EXIT_TRANSPORT = 4
EXIT_PIPELINE = 5


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get("TVN_OUT_DIR", "tvn-out"))


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _setting(args, config: dict, key: str, default):
    """Flag beats config file beats default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _zoo_for(args, config) -> Zoo:
    zoo_path = _setting(args, config, "zoo", None)
    if zoo_path:
        body = load_artifact(zoo_path, "tvn.zoo/1")
        return Zoo.from_manifest(body)
    return build_zoo(seed=int(_setting(args, config, "zoo_seed", 0)))


def _prompts(args, config) -> PromptSet:
    path = _setting(args, config, "prompts", None)
    if not path:
        return DEFAULT_PROMPTS
    try:
        rows = json.loads(Path(path).read_text(encoding="utf-8"))
        return PromptSet(tuple((r["id"], r["text"]) for r in rows))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad prompt file {path}: {exc}")


def _zoo_manifest_or_none(zoo: Zoo | None) -> dict | None:
    return zoo.manifest() if zoo is not None else None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_zoo(args) -> int:
    config = _load_config_file(args.config)
    if args.action == "build":
        out = _out_dir(args)
        seed = int(_setting(args, config, "seed", 0))
        with OutputLock(out):
            manifest = write_manifest(out, "zoo", sys.argv[1:], {"seed": seed}, seed, None)
            zoo = build_zoo(seed=seed)
            path = dump_artifact(out / "zoo.json", "tvn.zoo/1", zoo.manifest())
            finish_manifest(manifest, [str(path)])
        print(f"zoo written to {path}")
        return EXIT_OK
    # inspect
    body = load_artifact(args.zoo, "tvn.zoo/1")
    zoo = Zoo.from_manifest(body)
    print(f"zoo seed {zoo.seed}")
    for group, models in (("closed", zoo.closed), ("open", zoo.open)):
        for m in models:
            print(
                f"  {group:6s} {m.name:4s} encoder_seed={m.encoder.spec.seed} "
                f"alpha={m.encoder.spec.alpha} noise_sigma={m.noise_sigma}"
            )
    print(f"  reference seed={zoo.reference.spec.seed} alpha={zoo.reference.spec.alpha}")
    return EXIT_OK


def cmd_craft(args) -> int:
    config = _load_config_file(args.config)
    out = _out_dir(args)
    zoo = _zoo_for(args, config)
    prompts = _prompts(args, config)
    seed = int(_setting(args, config, "seed", 0))
    target = _setting(args, config, "target", "c1")
    alphabet = Alphabet(_setting(args, config, "alphabet", DEFAULT_ALPHABET.chars))
    cfg = Nsga2Config(
        population=int(_setting(args, config, "population", 50)),
        generations=int(_setting(args, config, "generations", 100)),
        mutation_rate=float(_setting(args, config, "mutation_rate", 0.3)),
        suffix_len=int(_setting(args, config, "suffix_len", 5)),
        alphabet=alphabet,
    )
    substitutes = _setting(args, config, "substitutes", None)
    if substitutes:
        wanted = substitutes.split(",") if isinstance(substitutes, str) else substitutes
        have = {m.name for m in zoo.substitutes_for(target)}
        missing = set(wanted) - have
        if missing:
            raise ConfigError(f"unknown substitutes {sorted(missing)}")
        zoo = Zoo(
            seed=zoo.seed,
            closed=[m for m in zoo.closed if m.name == target or m.name in wanted],
            open=zoo.open,
            reference=zoo.reference,
            score_cfg=zoo.score_cfg,
        )
    pool_size = int(_setting(args, config, "pool_size", 1000))
    reference = _setting(args, config, "reference", "reference")

    with OutputLock(out):
        manifest = write_manifest(
            out,
            "craft",
            sys.argv[1:],
            {
                "target": target,
                "reference": reference,
                "population": cfg.population,
                "generations": cfg.generations,
                "mutation_rate": cfg.mutation_rate,
                "suffix_len": cfg.suffix_len,
                "pool_size": pool_size,
                "seed": seed,
            },
            seed,
            zoo.manifest(),
        )
        result = craft_for_target(
            zoo, target, prompts, cfg, pool_size=pool_size, seed=seed,
            trace_dir=out if args.trace else None, reference=reference,
        )
        best = result.best
        payload = {
            "target": target,
            "substitutes": list(result.substitutes),
            "reference": result.reference,
            "seed": seed,
            "zoo_seed": zoo.seed,
            "base_id": best.prompt_id,
            "base": best.selection.prompt.base,
            "suffix": best.selection.prompt.suffix.decode(alphabet),
            "alphabet": alphabet.chars,
            "suffix_len": cfg.suffix_len,
            "f1": best.selection.f1,
            "f2": best.selection.f2,
            "f3": best.selection.f3,
            "attacked_score": best.selection.attacked_score,
            "no_attack_score": best.selection.no_attack_score,
            "target_drop": best.selection.drop,
            "unevolved": best.unevolved,
            "per_prompt": [
                {
                    "id": c.prompt_id,
                    "suffix": c.selection.prompt.suffix.decode(alphabet),
                    "drop": c.selection.drop,
                    "f1": c.selection.f1,
                    "f2": c.selection.f2,
                    "f3": c.selection.f3,
                }
                for c in result.per_prompt
            ],
        }
        path = dump_artifact(out / f"prompt-{target}.json", "tvn.prompt/1", payload)
        finish_manifest(manifest, [str(path)])
    print(
        f"crafted {target}: base={best.prompt_id!r} suffix={payload['suffix']!r} "
        f"drop={payload['target_drop']:.2f}"
    )
    return EXIT_OK


def _prompt_from_artifact(body: dict) -> AdversarialPrompt:
    alphabet = Alphabet(body["alphabet"])
    return AdversarialPrompt(body["base"], alphabet.encode_word(body["suffix"]), alphabet)


def cmd_fit(args) -> int:
    config = _load_config_file(args.config)
    out = _out_dir(args)
    body = load_artifact(args.prompt, "tvn.prompt/1")
    zoo = _zoo_for(args, config)
    samples = int(_setting(args, config, "samples", 10))
    seed = int(_setting(args, config, "seed", 0))
    if samples < 2:
        raise ConfigError("--samples must be >= 2")
    prompt = _prompt_from_artifact(body)
    target = zoo.model(body["target"])

    with OutputLock(out):
        manifest = write_manifest(
            out,
            "fit",
            sys.argv[1:],
            {"samples": samples, "seed": seed, "prompt": str(args.prompt)},
            seed,
            zoo.manifest(),
        )
        rng = np.random.default_rng(_h64(seed, "fit", target.name))
        rendered = prompt.render()
        scores = [
            score_sample(zoo.score_cfg, target, target, rendered, prompt.base, rng)
            for _ in range(samples)
        ]
        band = fit_threshold(scores)
        payload = {
            "target": target.name,
            "mu": band.mu,
            "sigma": band.sigma,
            "low": band.low,
            "high": band.high,
            "samples": samples,
            "seed": seed,
            "zoo_seed": zoo.seed,
            "prompt_artifact": Path(args.prompt).name,
            "base": prompt.base,
            "suffix": body["suffix"],
            "alphabet": body["alphabet"],
        }
        path = dump_artifact(out / f"band-{target.name}.json", "tvn.band/1", payload)
        finish_manifest(manifest, [str(path)])
    print(
        f"band for {target.name}: mean={band.mu:.2f} sd={band.sigma:.2f} "
        f"threshold={band.high:.2f}"
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    config = _load_config_file(args.config)
    out = _out_dir(args)
    body = load_artifact(args.band, "tvn.band/1")
    band = ThresholdBand(body["mu"], body["sigma"], body["low"], body["high"])
    shots = int(_setting(args, config, "shots", 1))
    seed = int(_setting(args, config, "seed", 0))
    alphabet = Alphabet(body["alphabet"])
    prompt = AdversarialPrompt(body["base"], alphabet.encode_word(body["suffix"]), alphabet)
    rendered = prompt.render()

    if args.endpoint:
        client = RemoteScoreClient(args.endpoint)
        scores = [client.score(rendered, prompt.base) for _ in range(shots)]
        actual = args.endpoint
    else:
        zoo = _zoo_for(args, config)
        claimant = args.zoo_model or body["target"]
        model = zoo.model(claimant)
        rng = np.random.default_rng(_h64(seed, "verify", claimant))
        target = zoo.model(body["target"])
        scores = [
            score_sample(zoo.score_cfg, target, model, rendered, prompt.base, rng)
            for _ in range(shots)
        ]
        actual = claimant

    decision = decide(band, scores, shots, claimed=body["target"])
    with OutputLock(out):
        manifest = write_manifest(
            out,
            "verify",
            sys.argv[1:],
            {"shots": shots, "seed": seed, "band": str(args.band)},
            seed,
            None,
        )
        payload = {
            "claimed": body["target"],
            "actual": actual,
            "shot": shots,
            "scores": list(decision.observed_scores),
            "mean_score": decision.mean_score,
            "verdict": decision.verdict,
            "band": {
                "mu": band.mu,
                "sigma": band.sigma,
                "low": band.low,
                "high": band.high,
            },
            "seed": seed,
        }
        path = dump_artifact(
            out / f"decision-{body['target']}-{shots}shot.json",
            "tvn.decision/1",
            payload,
        )
        finish_manifest(manifest, [str(path)])
    print(
        f"claimed={body['target']} actual={actual} {shots}-shot "
        f"mean={decision.mean_score:.2f} verdict={'True' if decision.verdict else 'False'}"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _load_config_file(args.config)
    out = _out_dir(args)
    zoo = _zoo_for(args, config)
    setting = _setting(args, config, "setting", "closed")
    trials = int(_setting(args, config, "trials", 200))
    shots = int(_setting(args, config, "shots", 1))
    seed = int(_setting(args, config, "seed", 0))
    if trials < 1:
        raise ConfigError("--trials must be >= 1")
    prompts = _prompts(args, config)
    targets = (
        [args.target]
        if args.target
        else [m.name for m in zoo.closed]
    )
    cfg = Nsga2Config(
        population=int(_setting(args, config, "population", 50)),
        generations=int(_setting(args, config, "generations", 100)),
        mutation_rate=float(_setting(args, config, "mutation_rate", 0.3)),
        suffix_len=int(_setting(args, config, "suffix_len", 5)),
    )
    pool_size = int(_setting(args, config, "pool_size", 1000))

    with OutputLock(out):
        manifest = write_manifest(
            out,
            "evaluate",
            sys.argv[1:],
            {
                "setting": setting,
                "trials": trials,
                "shots": shots,
                "seed": seed,
                "targets": targets,
            },
            seed,
            zoo.manifest(),
        )
        per_target = []
        for tid in targets:
            craft = craft_for_target(
                zoo, tid, prompts, cfg, pool_size=pool_size, seed=seed
            )
            run = run_verification(
                zoo,
                tid,
                craft.prompt,
                setting=setting,
                trials=trials,
                shots=shots,
                seed=seed,
            )
            per_target.append(
                {
                    "target": tid,
                    "accuracy": run.report.accuracy,
                    "precision": run.report.precision,
                    "recall": run.report.recall,
                    "f1_score": run.report.f1_score,
                    "tp": run.report.tp,
                    "fp": run.report.fp,
                    "tn": run.report.tn,
                    "fn": run.report.fn,
                }
            )
        average = {
            key: statistics.fmean(row[key] for row in per_target)
            for key in ("accuracy", "precision", "recall", "f1_score")
        }
        payload = {
            "setting": setting,
            "shots": shots,
            "trials": trials,
            "seed": seed,
            "zoo_seed": zoo.seed,
            "per_target": per_target,
            "average": average,
        }
        path = dump_artifact(
            out / f"metrics-{setting}-{shots}shot.json", "tvn.metrics/1", payload
        )
        finish_manifest(manifest, [str(path)])
    print(render_metrics_markdown(payload))
    return EXIT_OK


def cmd_report(args) -> int:
    if str(args.artifact).endswith(".jsonl"):
        print(render_trace_markdown(Path(args.artifact)))
        return EXIT_OK
    body = load_artifact(args.artifact)
    raw = json.loads(Path(args.artifact).read_text(encoding="utf-8"))
    schema = raw["schema"]
    if schema == "tvn.metrics/1":
        print(render_metrics_markdown(body))
    elif schema == "tvn.band/1":
        print(render_band_markdown([body]))
    elif schema == "tvn.decision/1":
        print(render_decision_markdown(body))
    elif schema == "tvn.prompt/1":
        print(render_prompt_markdown(body))
    else:
        print(json.dumps({"schema": schema, **body}, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Markdown rendering
# ---------------------------------------------------------------------------

def render_metrics_markdown(payload: dict) -> str:
    head = (
        f"Verification metrics ({payload['setting']}-set, {payload['shots']}-shot, "
        f"{payload['trials']} balanced trials per target)\n\n"
        "| Model | Accuracy | Precision | Recall | F1-Score |\n"
        "|---|---|---|---|---|"
    )
    rows = [
        "| {target} | {accuracy:.2f} | {precision:.2f} | {recall:.2f} | {f1_score:.2f} |".format(**row)
        for row in payload["per_target"]
    ]
    avg = payload["average"]
    rows.append(
        "| Average | {accuracy:.2f} | {precision:.2f} | {recall:.2f} | {f1_score:.2f} |".format(**avg)
    )
    return "\n".join([head, *rows])


def render_band_markdown(bodies: list[dict]) -> str:
    head = (
        "| Model | Mean | SD | Threshold |\n"
        "|---|---|---|---|"
    )
    rows = [
        f"| {b['target']} | {b['mu']:.2f} | {b['sigma']:.2f} | {b['high']:.2f} |"
        for b in bodies
    ]
    return "\n".join([head, *rows])


def render_decision_markdown(body: dict) -> str:
    band = body["band"]
    head = (
        "| Claimed | Mean | SD | Threshold | {k}-shot Mean | {k}-shot True/False |\n"
        "|---|---|---|---|---|---|"
    ).format(k=body["shot"])
    row = (
        f"| {body['claimed']} | {band['mu']:.2f} | {band['sigma']:.2f} | "
        f"{band['high']:.2f} | {body['mean_score']:.2f} | "
        f"{'True' if body['verdict'] else 'False'} |"
    )
    return "\n".join([head, row])


def render_trace_markdown(path: Path) -> str:
    try:
        rows = [json.loads(line) for line in path.read_text().splitlines() if line]
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"unreadable trace {path}: {exc}")
    head = (
        "| Generation | Best f1 | Best f2 | Best f3 | Front sizes |\n"
        "|---|---|---|---|---|"
    )
    lines = [
        f"| {r['generation']} | {r['best_f1']:.4f} | {r['best_f2']:.4f} | "
        f"{r['best_f3']:.4f} | {' '.join(str(s) for s in r['front_sizes'])} |"
        for r in rows
    ]
    return "\n".join([head, *lines])


def render_prompt_markdown(body: dict) -> str:
    lines = [
        f"Crafted prompt for `{body['target']}` (seed {body['seed']})",
        "",
        f"* base prompt: {body['base']!r} ({body['base_id']})",
        f"* suffix: `{body['suffix']}`",
        f"* target drop: {body['target_drop']:.2f} points "
        f"(no-attack {body['no_attack_score']:.2f} -> {body['attacked_score']:.2f})",
        f"* objectives: f1={body['f1']:.4f} f2={body['f2']:.4f} f3={body['f3']:.4f}",
    ]
    if body.get("unevolved"):
        lines.append("* flagged: unevolved (zero generations)")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvn",
        description="Craft non-transferable adversarial prompts and verify "
        "black-box text-to-image models with them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags win")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output directory (default $TVN_OUT_DIR or ./tvn-out)")
        p.add_argument("--zoo", help="zoo artifact to load instead of building")
        p.add_argument("--zoo-seed", dest="zoo_seed", type=int, default=None)

    p = sub.add_parser("zoo", help="build or inspect a simulated model zoo")
    p.add_argument("action", choices=["build", "inspect"])
    common(p)
    p.set_defaults(func=cmd_zoo)

    p = sub.add_parser("craft", help="craft an adversarial prompt for a target")
    common(p)
    p.add_argument("--target", default=None)
    p.add_argument("--substitutes", default=None, help="comma-separated ids")
    p.add_argument("--reference", default=None,
                   help="'reference' (designated encoder) or a zoo model id")
    p.add_argument("--alphabet", default=None)
    p.add_argument("--suffix-len", dest="suffix_len", type=int, default=None)
    p.add_argument("--population", type=int, default=None)
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--mutation-rate", dest="mutation_rate", type=float, default=None)
    p.add_argument("--pool-size", dest="pool_size", type=int, default=None)
    p.add_argument("--prompts", help="JSON file of {id, text} rows")
    p.add_argument("--trace", action="store_true",
                   help="write per-generation JSONL traces next to artifacts")
    p.set_defaults(func=cmd_craft)

    p = sub.add_parser("fit", help="fit a 3-sigma threshold band from target scores")
    common(p)
    p.add_argument("--prompt", required=True, help="prompt artifact path")
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", help="verify one claimant against a band")
    common(p)
    p.add_argument("--band", required=True, help="band artifact path")
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--zoo-model", dest="zoo_model", help="claimant zoo model id")
    p.add_argument("--endpoint", help="remote scoring endpoint")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evaluate", help="closed/open-set verification metrics")
    common(p)
    p.add_argument("--setting", choices=["closed", "open"], default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--target", help="evaluate a single target instead of all")
    p.add_argument("--population", type=int, default=None)
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--mutation-rate", dest="mutation_rate", type=float, default=None)
    p.add_argument("--pool-size", dest="pool_size", type=int, default=None)
    p.add_argument("--suffix-len", dest="suffix_len", type=int, default=None)
    p.add_argument("--prompts", help="JSON file of {id, text} rows")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render an artifact as markdown")
    p.add_argument("--artifact", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except (EncoderTransportError, EncoderProtocolError) as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except TvnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
