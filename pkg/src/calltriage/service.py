"""HTTP/WS service shell.

Two small apps share one in-memory state: the dispatcher API (queue
snapshots, session detail, claim/resolve, hot-reloadable config, scenario
launch, and the /live event stream) and the media gateway WebSocket that
terminates the vendor wire protocol.
"""

from __future__ import annotations

import asyncio
import itertools
import logging
import threading
from dataclasses import dataclass, field, replace

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware

from . import media_gateway, netsim, orchestrator
from .config import ServiceConfig, apply_flat_keys, tunable_snapshot
from .knowledge import EchoTopRetrievedGenerator, HttpChatGenerator, KnowledgeBase
from .media_gateway import MediaProtocolError, Scenario, ScenarioWord, SessionState
from .orchestrator import LiveEvent, ScenarioReport, SessionRunner
from .prioritizer import DispatchQueue, IllegalTransition
from .transcription import MockTranscriber
from .triage import level_for_score, severity_score

log = logging.getLogger(__name__)

SUBSCRIBER_QUEUE_SIZE = 256
STALL_TIMEOUT_S = 5.0


class EventHub:
    """Fan-out of LiveEvents to /live subscribers.

    A stalled subscriber (full queue) loses partial transcripts first; if a
    must-deliver event cannot be queued within the stall timeout the
    subscriber is disconnected rather than blocking the pipeline.
    """

    def __init__(self):
        self._subscribers: set[asyncio.Queue] = set()

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue(maxsize=SUBSCRIBER_QUEUE_SIZE)
        self._subscribers.add(q)
        return q

    def unsubscribe(self, q: asyncio.Queue):
        self._subscribers.discard(q)

    async def publish(self, event: LiveEvent):
        for q in list(self._subscribers):
            try:
                q.put_nowait(event)
            except asyncio.QueueFull:
                if event.kind == "transcript_partial":
                    continue
                try:
                    await asyncio.wait_for(q.put(event), timeout=STALL_TIMEOUT_S)
                except asyncio.TimeoutError:
                    log.warning("dropping stalled /live subscriber")
                    self.unsubscribe(q)


@dataclass
class SessionRecord:
    runner: SessionRunner
    events: list[LiveEvent] = field(default_factory=list)


class ServiceState:
    """Everything the endpoints share: config, corpus, queue, sessions."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.kb = KnowledgeBase.from_corpus_csv(config.corpus_path)
        self.queue = DispatchQueue(config.priority_weights)
        self.sessions: dict[str, SessionRecord] = {}
        self.hub = EventHub()
        self.lock = threading.Lock()
        self._arrivals = itertools.count()
        self._sim_ids = itertools.count(1)
        self.stt_transport_factory = None  # injectable for live STT

    def next_arrival(self) -> float:
        return float(next(self._arrivals))

    def make_generator(self):
        if self.config.generator_backend == "live":
            import os

            key = os.environ.get("TRIAGE_GEN_API_KEY", "")
            return HttpChatGenerator(self.config.generator_base_url, self.config.generator_model, key)
        return EchoTopRetrievedGenerator()

    def make_stt(self, session_id: str, scenario: Scenario | None):
        if self.config.stt_backend == "live":
            if self.stt_transport_factory is None:
                raise RuntimeError("live STT selected but no transport factory registered")
            from .transcription import LiveTranscriberAdapter

            return LiveTranscriberAdapter(self.stt_transport_factory(), session_id)
        return MockTranscriber(scenario or Scenario(name=session_id, words=[]), session_id)

    def peer_signals_for(self, session_id: str):
        def peers():
            active = {e.session_id for e in self.queue.snapshot()}
            return [
                rec.runner.signals
                for sid, rec in self.sessions.items()
                if sid != session_id and sid in active and rec.runner.signals.signals
            ]

        return peers

    def new_runner(self, session_id: str, scenario: Scenario | None = None) -> SessionRecord:
        runner = SessionRunner(
            session_id=session_id,
            config=self.config,
            kb=self.kb,
            queue=self.queue,
            backend=self.make_stt(session_id, scenario),
            generator=self.make_generator(),
            enqueued_at=self.next_arrival(),
            peer_signals=self.peer_signals_for(session_id),
        )
        record = SessionRecord(runner=runner)
        with self.lock:
            self.sessions[session_id] = record
        return record

    def scenario_by_name(self, name: str) -> Scenario | None:
        path = self.config.scenario_path(name)
        return media_gateway.load_scenario(path) if path.exists() else None

    def apply_config_update(self, flat: dict) -> ServiceConfig:
        """Swap config and atomically re-score the live queue under it."""
        with self.lock:
            new_config = apply_flat_keys(self.config, flat)
            self.config = new_config
            for rec in self.sessions.values():
                rec.runner.config = new_config

            def rescale(entry):
                rec = self.sessions.get(entry.session_id)
                assessment = rec.runner.session.current_assessment if rec else None
                if assessment is None:
                    return entry.severity_score
                return severity_score(assessment.features, new_config.severity_weights).score

            self.queue.rescore(new_config.priority_weights, severity_rescale=rescale)
        return new_config

    def snapshot_rows(self) -> list[dict]:
        weights = self.config.severity_weights
        rows = []
        for entry in self.queue.snapshot():
            rows.append(
                {
                    "session_id": entry.session_id,
                    "priority": entry.priority,
                    "severity_score": entry.severity_score,
                    "severity_level": level_for_score(entry.severity_score, weights).value,
                    "frequency_score": entry.frequency_score,
                    "distress_score": entry.distress_score,
                    "enqueued_at": entry.enqueued_at,
                    "status": entry.status,
                }
            )
        return rows

    def session_detail(self, session_id: str) -> dict:
        rec = self.sessions.get(session_id)
        if rec is None:
            raise KeyError(session_id)
        runner = rec.runner
        session = runner.session
        assessment = session.current_assessment
        entry = self.queue.get(session_id)
        return {
            "session_id": session_id,
            "state": session.state.name,
            "frames_received": session.frames_received,
            "transcripts": [
                {"kind": t.kind, "text": t.text, "confidence": t.confidence, "at_ms": t.received_at}
                for t in session.transcript_buffer
            ],
            "reconstruction": (
                {
                    "predicted_text": runner.last_reconstruction.predicted_text,
                    "retrieved": runner.last_reconstruction.retrieved_context,
                }
                if runner.last_reconstruction
                else None
            ),
            "intent": runner.last_intent.intent_label if runner.last_intent else None,
            "assessment": (
                {
                    "score": assessment.score,
                    "level": assessment.level.value,
                    "features": {
                        "keyword": assessment.features.keyword,
                        "emotion": assessment.features.emotion,
                        "context": assessment.features.context,
                    },
                    "rationale": assessment.rationale,
                }
                if assessment
                else None
            ),
            "priority": (
                {
                    "priority": entry.priority,
                    "status": entry.status,
                    "enqueued_at": entry.enqueued_at,
                }
                if entry
                else None
            ),
            "events": [ev.to_json() for ev in rec.events],
        }


def _parse_scenario_body(state: ServiceState, body: dict) -> Scenario:
    spec = body.get("scenario")
    if isinstance(spec, str):
        scenario = state.scenario_by_name(spec)
        if scenario is None:
            raise HTTPException(status_code=404, detail=f"unknown scenario {spec!r}")
        return scenario
    if isinstance(spec, dict):
        try:
            words = [ScenarioWord(w["text"], int(w["start_ms"]), int(w["end_ms"])) for w in spec["words"]]
            scenario = Scenario(
                name=spec.get("name", "inline"),
                words=words,
                expected_severity=spec.get("expected_severity"),
            )
            media_gateway.validate_scenario(scenario)
            return scenario
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"bad inline scenario: {exc}") from exc
    raise HTTPException(status_code=400, detail="body needs a scenario name or object")


def create_api_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="calltriage dispatcher API")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.triage = state

    @app.get("/calls")
    def get_calls():
        return state.snapshot_rows()

    @app.get("/calls/{session_id}")
    def get_call(session_id: str):
        try:
            return state.session_detail(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")

    def _transition(session_id: str, status: str):
        try:
            entry = state.queue.transition(session_id, status)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        except IllegalTransition as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"session_id": session_id, "status": entry.status}

    @app.post("/calls/{session_id}/claim")
    def claim(session_id: str):
        return _transition(session_id, "claimed")

    @app.post("/calls/{session_id}/resolve")
    def resolve(session_id: str):
        return _transition(session_id, "resolved")

    @app.get("/config")
    def get_config():
        return tunable_snapshot(state.config)

    @app.put("/config")
    def put_config(flat: dict):
        try:
            state.apply_config_update(flat)
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return tunable_snapshot(state.config)

    @app.post("/simulate")
    async def simulate(body: dict):
        scenario = _parse_scenario_body(state, body)
        overrides = body.get("channel", {})
        try:
            channel = replace(state.config.channel, **overrides)
            if "seed" in body:
                channel = replace(channel, seed=int(body["seed"]))
        except (TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"bad channel overrides: {exc}")
        session_id = f"sim{next(state._sim_ids)}-{scenario.name}-{channel.seed}"

        decision = netsim.bandwidth_admission(len(state.queue.snapshot()) + 1, channel)
        effective = netsim.with_overflow_loss(channel, decision)
        media_events, _trace = media_gateway.replay_scenario(scenario, effective, stream_id=session_id)
        record = state.new_runner(session_id, scenario)
        for event in media_events:
            for live in record.runner.process(event):
                record.events.append(live)
                await state.hub.publish(live)
        return {"session_id": session_id, "bandwidth": decision.status}

    @app.websocket("/live")
    async def live(ws: WebSocket):
        await ws.accept()
        q = state.hub.subscribe()
        try:
            while True:
                event = await q.get()
                await ws.send_json(event.to_json())
        except WebSocketDisconnect:
            pass
        finally:
            state.hub.unsubscribe(q)

    return app


def create_media_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="calltriage media gateway")

    @app.post("/twiml")
    @app.get("/twiml")
    def twiml():
        # static stream-connect stub pointing the telephony vendor at /media
        from fastapi import Response

        xml = (
            '<?xml version="1.0" encoding="UTF-8"?>'
            f'<Response><Connect><Stream url="wss://localhost:{state.config.media_port}/media"/>'
            "</Connect></Response>"
        )
        return Response(content=xml, media_type="application/xml")

    @app.websocket("/media")
    async def media(ws: WebSocket):
        await ws.accept()
        record: SessionRecord | None = None
        try:
            while True:
                text = await ws.receive_text()
                try:
                    event = media_gateway.parse_media_event(text)
                except MediaProtocolError as exc:
                    log.warning("bad media message: %s", exc)
                    continue
                if event.kind == "connected":
                    continue
                if record is None:
                    if event.kind != "start":
                        log.warning("dropping %s before start", event.kind)
                        continue
                    scenario = state.scenario_by_name(event.stream_id or "")
                    record = state.new_runner(event.stream_id, scenario)
                try:
                    for live in record.runner.process(event):
                        record.events.append(live)
                        await state.hub.publish(live)
                except MediaProtocolError as exc:
                    log.warning("protocol violation on %s: %s", event.stream_id, exc)
                if event.kind == "stop":
                    break
        except WebSocketDisconnect:
            # abrupt close counts as stop: finalize so the call still triages
            if record and record.runner.session.state == SessionState.STREAMING:
                stop = media_gateway.MediaEvent(kind="stop", stream_id=record.runner.session.session_id)
                for live in record.runner.process(stop):
                    record.events.append(live)
                    await state.hub.publish(live)

    return app


def run_scenario_in_state(
    state: ServiceState, scenario: Scenario, channel, session_id: str | None = None
) -> ScenarioReport:
    """Synchronous replay against shared state (used by the CLI and tests)."""
    session_id = session_id or f"sim{next(state._sim_ids)}-{scenario.name}-{channel.seed}"
    report, runner = orchestrator.run_scenario(
        scenario,
        channel,
        state.config,
        state.kb,
        queue=state.queue,
        session_id=session_id,
        enqueued_at=state.next_arrival(),
        peer_signals=state.peer_signals_for(session_id),
        active_calls=len(state.queue.snapshot()) + 1,
    )
    with state.lock:
        state.sessions[session_id] = SessionRecord(runner=runner, events=[])
    return report
