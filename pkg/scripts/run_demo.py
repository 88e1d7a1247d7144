#!/usr/bin/env python3
"""Replay every shipped scenario into one dispatcher queue and print the
resulting triage view, the way a dispatcher would see it after a busy minute.
"""

import argparse

from calltriage.config import ServiceConfig
from calltriage.knowledge import KnowledgeBase
from calltriage.media_gateway import load_scenario
from calltriage.netsim import ChannelConfig
from calltriage.orchestrator import run_scenario
from calltriage.prioritizer import DispatchQueue
from calltriage.triage import level_for_score

SCENARIOS = ("medical", "noise_complaint", "gun_school", "fire")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--loss", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    config = ServiceConfig()
    kb = KnowledgeBase.from_corpus_csv(config.corpus_path)
    queue = DispatchQueue(config.priority_weights)

    for order, name in enumerate(SCENARIOS):
        scenario = load_scenario(config.scenario_path(name))
        channel = ChannelConfig(p_random=args.loss, seed=args.seed + order)
        report, _ = run_scenario(
            scenario, channel, config, kb, queue=queue, session_id=name, enqueued_at=float(order)
        )
        print(f"call {name!r}: heard {report.final_transcript!r}")
        print(f"  reconstructed: {report.predicted_text!r}")
        print(f"  intent={report.intent} severity={report.severity_level} ({report.severity_score:.2f})")

    print("\ndispatcher queue (highest priority first):")
    print(f"{'#':>2} {'session':<16} {'priority':>8} {'severity':>9} {'level':<9} {'status'}")
    for rank, entry in enumerate(queue.snapshot(), start=1):
        level = level_for_score(entry.severity_score, config.severity_weights).value
        print(
            f"{rank:>2} {entry.session_id:<16} {entry.priority:>8.3f} "
            f"{entry.severity_score:>9.2f} {level:<9} {entry.status}"
        )


if __name__ == "__main__":
    main()
