#!/usr/bin/env python3
"""Attack-method comparison on the simulated zoo: no-attack, random
characters, greedy search, and the evolutionary crafting pipeline, each
reported as target-score drop and mean off-target drop.

Usage: python scripts/compare_baselines.py [--seed 42]
"""

import argparse
import statistics
import sys

sys.path.insert(0, "src")

from tvn import build_zoo
from tvn.pipeline import (
    craft_for_target,
    greedy_for_target,
    off_target_drops,
    random_for_target,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    zoo = build_zoo(seed=args.seed)

    print("| Target | Method | Target drop | Mean off-target drop |")
    print("|---|---|---|---|")
    summary = {"tvn": [], "greedy": [], "random": []}
    off_summary = {"tvn": [], "greedy": []}
    for model in zoo.closed:
        tid = model.name
        craft = craft_for_target(zoo, tid, seed=args.seed)
        tvn_drop = craft.best.selection.drop
        tvn_off = statistics.fmean(
            off_target_drops(zoo, tid, craft.prompt).values()
        )
        g_prompt, g_drop = greedy_for_target(zoo, tid, seed=args.seed)
        g_off = statistics.fmean(
            off_target_drops(zoo, tid, g_prompt).values()
        )
        _, r_drop = random_for_target(zoo, tid, seed=args.seed)
        print(f"| {tid} | no-attack | 0.00 | 0.00 |")
        print(f"| {tid} | random | {r_drop:.2f} | - |")
        print(f"| {tid} | greedy | {g_drop:.2f} | {g_off:.2f} |")
        print(f"| {tid} | crafted | {tvn_drop:.2f} | {tvn_off:.2f} |")
        summary["tvn"].append(tvn_drop)
        summary["greedy"].append(g_drop)
        summary["random"].append(r_drop)
        off_summary["tvn"].append(tvn_off)
        off_summary["greedy"].append(g_off)

    print()
    print(
        f"mean target drops: crafted {statistics.fmean(summary['tvn']):.2f} "
        f"> greedy {statistics.fmean(summary['greedy']):.2f} "
        f"> random {statistics.fmean(summary['random']):.2f} > no-attack 0"
    )
    print(
        f"mean off-target drops: greedy {statistics.fmean(off_summary['greedy']):.2f} "
        f"vs crafted {statistics.fmean(off_summary['tvn']):.2f}"
    )


if __name__ == "__main__":
    main()
