"""Pipeline orchestration.

One SessionRunner per call consumes media events in arrival order, feeds
audio to the transcription backend, and on every final transcript runs
retrieval reconstruction, intent prediction, severity assessment, and the
priority upsert, broadcasting a gap-free per-session LiveEvent stream.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import knowledge, media_gateway, netsim, prioritizer, transcription, triage
from .config import ServiceConfig
from .knowledge import (
    EchoTopRetrievedGenerator,
    GeneratorUnavailable,
    KnowledgeBase,
    ReconstructionResult,
)
from .media_gateway import CallSession, FlushTranscriber, ForwardAudio, MediaEvent, Scenario
from .netsim import ChannelConfig
from .prioritizer import CallSignals, DispatchQueue
from .transcription import AudioFrame, MockTranscriber, TranscriptEvent

log = logging.getLogger(__name__)

LIVE_EVENT_KINDS = (
    "call_started",
    "transcript_partial",
    "transcript_final",
    "reconstruction",
    "severity_update",
    "priority_update",
    "call_closed",
)


@dataclass
class LiveEvent:
    kind: str
    session_id: str
    seq: int
    payload: dict

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "session_id": self.session_id,
            "seq": self.seq,
            "payload": self.payload,
        }


class SessionRunner:
    """Drives one call session through the full pipeline."""

    def __init__(
        self,
        session_id: str,
        config: ServiceConfig,
        kb: KnowledgeBase,
        queue: DispatchQueue,
        backend: transcription.TranscriberBackend,
        generator: knowledge.GeneratorBackend | None = None,
        enqueued_at: float = 0.0,
        peer_signals=None,
    ):
        self.session = CallSession(session_id=session_id)
        self.config = config
        self.kb = kb
        self.queue = queue
        self.backend = backend
        self.generator = generator or EchoTopRetrievedGenerator()
        self.emotion = triage.LexiconEmotionClassifier(config.emotion_lexicons)
        self.enqueued_at = enqueued_at
        # callable returning CallSignals of the other open sessions
        self.peer_signals = peer_signals or (lambda: [])
        self.signals = CallSignals(session_id, frozenset(), enqueued_at)
        self.final_texts: list[str] = []
        self.last_reconstruction: ReconstructionResult | None = None
        self.last_intent: knowledge.IntentPrediction | None = None
        self._seq = itertools.count(1)

    def _emit(self, kind: str, payload: dict) -> LiveEvent:
        return LiveEvent(kind, self.session.session_id, next(self._seq), payload)

    def process(self, event: MediaEvent) -> list[LiveEvent]:
        """Apply one media event; returns the LiveEvents it produced."""
        out: list[LiveEvent] = []
        before = self.session.state
        actions = media_gateway.advance_session(self.session, event)
        if event.kind == "start" and before == media_gateway.SessionState.CONNECTING:
            out.append(self._emit("call_started", {"stream_id": event.stream_id}))
        for action in actions:
            if isinstance(action, ForwardAudio):
                self.backend.push_audio(
                    AudioFrame(seq=action.seq, timestamp_ms=action.timestamp_ms, payload=action.payload)
                )
            elif isinstance(action, FlushTranscriber):
                self.backend.flush()
        out.extend(self._drain_transcripts())
        if event.kind == "stop":
            self.session.mark_final_done()
            out.append(self._emit("call_closed", {"frames_received": self.session.frames_received}))
        return out

    def _drain_transcripts(self) -> list[LiveEvent]:
        out = []
        for tev in self.backend.poll_events():
            self.session.transcript_buffer.append(tev)
            if tev.kind == "partial":
                out.append(
                    self._emit(
                        "transcript_partial",
                        {"text": tev.text, "confidence": tev.confidence, "at_ms": tev.received_at},
                    )
                )
            else:
                out.extend(self._handle_final(tev))
        return out

    def _handle_final(self, tev: TranscriptEvent) -> list[LiveEvent]:
        """Reconstruct, predict intent, assess, and re-rank for one final."""
        out = [
            self._emit(
                "transcript_final",
                {"text": tev.text, "confidence": tev.confidence, "at_ms": tev.received_at},
            )
        ]
        if tev.text.strip():
            self.final_texts.append(tev.text)
        transcript = " ".join(self.final_texts)

        recon = self._reconstruct(transcript)
        self.last_reconstruction = recon
        intent = knowledge.predict_intent(
            transcript, recon.retrieved_context, self.config.intent_labels, self.config.intent_lexicons
        )
        self.last_intent = intent
        out.append(
            self._emit(
                "reconstruction",
                {
                    "predicted_text": recon.predicted_text,
                    "retrieved": recon.retrieved_context,
                    "intent": intent.intent_label,
                },
            )
        )

        assessment = triage.assess(
            transcript,
            recon,
            rules=self.config.rules,
            weights=self.config.severity_weights,
            emotion_backend=self.emotion,
        )
        self.session.current_assessment = assessment
        out.append(
            self._emit(
                "severity_update",
                {
                    "score": assessment.score,
                    "level": assessment.level.value,
                    "features": {
                        "keyword": assessment.features.keyword,
                        "emotion": assessment.features.emotion,
                        "context": assessment.features.context,
                    },
                    "rationale": assessment.rationale,
                },
            )
        )

        self.signals = CallSignals(
            self.session.session_id,
            frozenset(
                assessment.rationale.get("matched_severe", [])
                + assessment.rationale.get("matched_mild", [])
                + [intent.intent_label]
            ),
            self.enqueued_at,
        )
        freq = prioritizer.frequency_score(self.signals, self.peer_signals())
        distress = prioritizer.distress_score(assessment)
        entry = self.queue.upsert(
            self.session.session_id,
            severity_score=assessment.score,
            frequency_score=freq,
            distress_score=distress,
            enqueued_at=self.enqueued_at,
        )
        self.session.current_priority = entry
        out.append(
            self._emit(
                "priority_update",
                {
                    "priority": entry.priority,
                    "severity_score": entry.severity_score,
                    "frequency_score": entry.frequency_score,
                    "distress_score": entry.distress_score,
                    "status": entry.status,
                },
            )
        )
        return out

    def _reconstruct(self, transcript: str) -> ReconstructionResult:
        if not transcript.strip():
            return ReconstructionResult(predicted_text="", retrieved_context=[])
        try:
            return knowledge.reconstruct(transcript, self.kb, self.generator)
        except GeneratorUnavailable as exc:
            log.warning("generator unavailable, falling back to raw transcript: %s", exc)
            return ReconstructionResult(
                predicted_text=transcript, retrieved_context=self.kb.retrieve(transcript)
            )


def orchestrate_session(runner: SessionRunner, events) -> list[LiveEvent]:
    """Run a full media-event sequence through a session runner."""
    out = []
    for event in events:
        out.extend(runner.process(event))
    return out


@dataclass
class ScenarioReport:
    """Deterministic summary of one replayed scenario."""

    session_id: str
    scenario: str
    seed: int
    frames_sent: int
    frames_delivered: int
    empirical_loss_rate: float
    final_transcript: str
    confidence: float
    predicted_text: str
    intent: str
    severity_score: float
    severity_level: str
    priority: float
    expected_severity: str | None = None
    events: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def run_scenario(
    scenario: Scenario,
    channel_cfg: ChannelConfig,
    config: ServiceConfig,
    kb: KnowledgeBase,
    queue: DispatchQueue | None = None,
    session_id: str | None = None,
    enqueued_at: float = 0.0,
    generator: knowledge.GeneratorBackend | None = None,
    peer_signals=None,
    fixture_dir: Path | None = None,
    active_calls: int = 1,
) -> tuple[ScenarioReport, SessionRunner]:
    """One-shot deterministic replay of a scenario through the pipeline.

    Bandwidth admission for the current call count is applied first: an
    overloaded link adds its overflow fraction to the random loss.
    """
    queue = queue if queue is not None else DispatchQueue(config.priority_weights)
    session_id = session_id or f"sim-{scenario.name}-{channel_cfg.seed}"
    decision = netsim.bandwidth_admission(active_calls, channel_cfg)
    effective_cfg = netsim.with_overflow_loss(channel_cfg, decision)
    media_events, trace = media_gateway.replay_scenario(
        scenario, effective_cfg, fixture_dir, stream_id=session_id
    )
    runner = SessionRunner(
        session_id=session_id,
        config=config,
        kb=kb,
        queue=queue,
        backend=MockTranscriber(scenario, session_id),
        generator=generator,
        enqueued_at=enqueued_at,
        peer_signals=peer_signals,
    )
    live_events = orchestrate_session(runner, media_events)

    finals = [t for t in runner.session.transcript_buffer if t.kind == "final"]
    final = finals[-1] if finals else None
    assessment = runner.session.current_assessment
    entry = runner.session.current_priority
    report = ScenarioReport(
        session_id=session_id,
        scenario=scenario.name,
        seed=channel_cfg.seed,
        frames_sent=len(trace.delivered) + len(trace.dropped),
        frames_delivered=len(trace.delivered),
        empirical_loss_rate=trace.empirical_loss_rate,
        final_transcript=final.text if final else "",
        confidence=final.confidence if final else 0.0,
        predicted_text=runner.last_reconstruction.predicted_text if runner.last_reconstruction else "",
        intent=runner.last_intent.intent_label if runner.last_intent else "",
        severity_score=assessment.score if assessment else 0.0,
        severity_level=assessment.level.value if assessment else "",
        priority=entry.priority if entry else 0.0,
        expected_severity=scenario.expected_severity,
        events=[ev.to_json() for ev in live_events],
    )
    return report, runner
