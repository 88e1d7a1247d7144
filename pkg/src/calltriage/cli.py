"""Command-line entry points.

serve      run the dispatcher API and media gateway
simulate   one-shot scenario replay, prints a deterministic report
prep-data  raw conversation dump -> retrieval corpus CSV
eval       score a prediction file against golds
index      build and persist the TF-IDF index for a corpus
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import evalkit, knowledge, media_gateway, orchestrator
from .config import load_config
from .knowledge import KnowledgeBase
from .netsim import ChannelConfig


def _add_channel_args(p: argparse.ArgumentParser):
    p.add_argument("--loss", type=float, default=None, help="random per-packet loss probability")
    p.add_argument("--burst-enter", type=float, default=None)
    p.add_argument("--burst-exit", type=float, default=None)
    p.add_argument("--burst-loss", type=float, default=None)
    p.add_argument("--jitter", type=float, default=None, help="jitter stddev in ms")
    p.add_argument("--seed", type=int, default=0)


def _channel_from_args(base: ChannelConfig, args) -> ChannelConfig:
    overrides = {"seed": args.seed}
    if args.loss is not None:
        overrides["p_random"] = args.loss
    if args.burst_enter is not None:
        overrides["burst_enter"] = args.burst_enter
    if args.burst_exit is not None:
        overrides["burst_exit"] = args.burst_exit
    if args.burst_loss is not None:
        overrides["burst_loss"] = args.burst_loss
    if args.jitter is not None:
        overrides["jitter_std_ms"] = args.jitter
    return replace(base, **overrides)


def _resolve_scenario(cfg, name_or_path: str) -> media_gateway.Scenario:
    path = Path(name_or_path)
    if not path.exists():
        path = cfg.scenario_path(name_or_path)
    return media_gateway.load_scenario(path)


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceState, create_api_app, create_media_app

    cfg = load_config(args.config)
    if args.api_port:
        cfg.api_port = args.api_port
    if args.media_port:
        cfg.media_port = args.media_port
    state = ServiceState(cfg)
    api = uvicorn.Server(
        uvicorn.Config(create_api_app(state), host=args.host, port=cfg.api_port, log_level="info")
    )
    media = uvicorn.Server(
        uvicorn.Config(create_media_app(state), host=args.host, port=cfg.media_port, log_level="info")
    )

    async def run_both():
        await asyncio.gather(api.serve(), media.serve())

    print(f"dispatcher API on :{cfg.api_port}, media gateway on :{cfg.media_port}")
    asyncio.run(run_both())
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    scenario = _resolve_scenario(cfg, args.scenario)
    channel = _channel_from_args(cfg.channel, args)
    kb = KnowledgeBase.from_corpus_csv(cfg.corpus_path)
    report, _runner = orchestrator.run_scenario(scenario, channel, cfg, kb)
    payload = report.to_json()
    if not args.events:
        payload.pop("events")
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_prep_data(args) -> int:
    conversations = knowledge.load_raw_csv(args.infile)
    records = knowledge.preprocess_dataset(conversations)
    knowledge.save_corpus_csv(records, args.outfile)
    print(f"kept {len(records)} of {len(conversations)} conversations -> {args.outfile}")
    return 0


def cmd_eval(args) -> int:
    try:
        report, matrix = evalkit.run_report(
            pred_file=args.pred,
            gold_file=args.gold,
            concepts_file=args.concepts,
            out_json=args.out,
            out_csv=args.csv,
        )
    except (evalkit.ParseError, FileNotFoundError, ValueError) as exc:
        print(f"eval failed: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(report.aggregates, indent=2, sort_keys=True))
    if matrix:
        print(json.dumps(matrix.to_json(), indent=2))
    return 0


def cmd_index(args) -> int:
    kb = KnowledgeBase.from_corpus_csv(args.corpus)
    prefix = Path(args.out) if args.out else Path(args.corpus).with_suffix("")
    npz_path, meta_path = kb.save(prefix)
    print(f"indexed {len(kb.texts)} documents, dim {kb.model.dim} -> {npz_path}, {meta_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="calltriage", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the service")
    p.add_argument("--config", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--api-port", type=int, default=None)
    p.add_argument("--media-port", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="one-shot scenario replay")
    p.add_argument("--scenario", required=True, help="scenario name or path to a scenario JSON")
    p.add_argument("--config", default=None)
    p.add_argument("--events", action="store_true", help="include the LiveEvent log in the report")
    _add_channel_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prep-data", help="extract the retrieval corpus from a raw dump")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=cmd_prep_data)

    p = sub.add_parser("eval", help="score predictions against golds")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--concepts", default=None)
    p.add_argument("--out", default=None, help="write the full report as JSON")
    p.add_argument("--csv", default=None, help="write per-case rows as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("index", help="build and persist the TF-IDF index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default=None, help="output path prefix")
    p.set_defaults(func=cmd_index)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
