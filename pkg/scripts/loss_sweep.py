#!/usr/bin/env python3
"""Sweep random-loss rates over the shipped scenarios.

For each (scenario, loss rate) cell, replays the scenario over several seeds
and reports mean word retention, mean transcript confidence, and how often
the severity level matched the scenario's expected label. Writes a CSV next
to the console table when --out is given.
"""

import argparse
import csv

from calltriage.config import ServiceConfig
from calltriage.knowledge import KnowledgeBase
from calltriage.media_gateway import load_scenario
from calltriage.netsim import ChannelConfig
from calltriage.orchestrator import run_scenario

SCENARIOS = ("fire", "noise_complaint", "gun_school", "medical")
LOSS_RATES = (0.0, 0.05, 0.1, 0.2, 0.35, 0.5)


def sweep(seeds: int):
    config = ServiceConfig()
    kb = KnowledgeBase.from_corpus_csv(config.corpus_path)
    rows = []
    for name in SCENARIOS:
        scenario = load_scenario(config.scenario_path(name))
        total_words = len(scenario.words)
        for loss in LOSS_RATES:
            retained, confidence, level_hits = 0.0, 0.0, 0
            for seed in range(seeds):
                channel = ChannelConfig(p_random=loss, seed=seed)
                report, _ = run_scenario(scenario, channel, config, kb)
                retained += len(report.final_transcript.split()) / total_words
                confidence += report.confidence
                if scenario.expected_severity and report.severity_level == scenario.expected_severity:
                    level_hits += 1
            rows.append(
                {
                    "scenario": name,
                    "loss": loss,
                    "word_retention": retained / seeds,
                    "confidence": confidence / seeds,
                    "expected_level_rate": level_hits / seeds,
                }
            )
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--out", default=None, help="optional CSV path")
    args = parser.parse_args()

    rows = sweep(args.seeds)
    header = f"{'scenario':<16} {'loss':>5} {'words':>7} {'conf':>6} {'level ok':>8}"
    print(header)
    print("-" * len(header))
    for r in rows:
        print(
            f"{r['scenario']:<16} {r['loss']:>5.2f} {r['word_retention']:>7.2%} "
            f"{r['confidence']:>6.2f} {r['expected_level_rate']:>8.2%}"
        )
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
