#!/usr/bin/env python3
"""Compare bursty against random loss at the same effective loss rate.

The mock transcriber drops a word once it loses half the word's frames, so
correlated losses should wipe out whole words where independent losses of
the same total volume only dent many words. This script measures that gap.
"""

import argparse

from calltriage.config import ServiceConfig
from calltriage.knowledge import KnowledgeBase
from calltriage.media_gateway import load_scenario
from calltriage.netsim import ChannelConfig, effective_loss_probability
from calltriage.orchestrator import run_scenario


def mean_retention(scenario, channel_for_seed, config, kb, seeds):
    total = 0.0
    for seed in range(seeds):
        report, _ = run_scenario(scenario, channel_for_seed(seed), config, kb)
        total += len(report.final_transcript.split()) / len(scenario.words)
    return total / seeds


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default="fire")
    parser.add_argument("--seeds", type=int, default=50)
    parser.add_argument("--burst-exit", type=float, default=0.25, help="1/mean burst length")
    args = parser.parse_args()

    config = ServiceConfig()
    kb = KnowledgeBase.from_corpus_csv(config.corpus_path)
    scenario = load_scenario(config.scenario_path(args.scenario))

    print(f"{'target loss':>11} {'random words':>13} {'bursty words':>13} {'gap':>7}")
    for target in (0.1, 0.2, 0.3, 0.4):
        # choose burst_enter so the stationary bursty rate equals the target:
        # target = enter / (enter + exit)  =>  enter = exit * target / (1 - target)
        enter = args.burst_exit * target / (1 - target)
        bursty_cfg = lambda seed: ChannelConfig(
            burst_enter=enter, burst_exit=args.burst_exit, burst_loss=1.0, seed=seed
        )
        random_cfg = lambda seed: ChannelConfig(p_random=target, seed=seed)
        assert abs(effective_loss_probability(bursty_cfg(0)) - target) < 1e-9

        random_words = mean_retention(scenario, random_cfg, config, kb, args.seeds)
        bursty_words = mean_retention(scenario, bursty_cfg, config, kb, args.seeds)
        print(
            f"{target:>11.2f} {random_words:>13.2%} {bursty_words:>13.2%} "
            f"{random_words - bursty_words:>7.2%}"
        )


if __name__ == "__main__":
    main()
