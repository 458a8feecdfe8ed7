#!/usr/bin/env python3
"""Full closed-set and open-set verification experiment on the simulated
zoo: craft a prompt per closed model, fit its acceptance band, evaluate
balanced trials in both settings, and print the metric tables.

Usage: python scripts/run_closed_set.py [--seed 42] [--trials 200]
"""

import argparse
import statistics
import sys

sys.path.insert(0, "src")

from tvn import build_zoo
from tvn.cli import render_metrics_markdown
from tvn.pipeline import craft_for_target, off_target_drops, run_verification


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--generations", type=int, default=100)
    ap.add_argument("--population", type=int, default=50)
    args = ap.parse_args()

    zoo = build_zoo(seed=args.seed)
    from tvn.nsga2 import Nsga2Config

    cfg = Nsga2Config(population=args.population, generations=args.generations)

    crafted = {}
    print("crafting adversarial prompts (best across the bundled prompt set)")
    for model in zoo.closed:
        crafted[model.name] = craft_for_target(
            zoo, model.name, cfg=cfg, seed=args.seed
        )
        sel = crafted[model.name].best.selection
        subs = off_target_drops(zoo, model.name, crafted[model.name].prompt)
        print(
            f"  {model.name}: {sel.prompt.render()!r} "
            f"drop={sel.drop:.2f} worst substitute drop={max(subs.values()):.2f}"
        )

    for setting in ("closed", "open"):
        for shots in (1, 5):
            rows = []
            for tid, craft in crafted.items():
                run = run_verification(
                    zoo, tid, craft.prompt, setting,
                    trials=args.trials, shots=shots, seed=args.seed,
                )
                rows.append(
                    {
                        "target": tid,
                        "accuracy": run.report.accuracy,
                        "precision": run.report.precision,
                        "recall": run.report.recall,
                        "f1_score": run.report.f1_score,
                    }
                )
            payload = {
                "setting": setting,
                "shots": shots,
                "trials": args.trials,
                "per_target": rows,
                "average": {
                    k: statistics.fmean(r[k] for r in rows)
                    for k in ("accuracy", "precision", "recall", "f1_score")
                },
            }
            print()
            print(render_metrics_markdown(payload))


if __name__ == "__main__":
    main()
