"""Speech-to-text integration.

A pluggable backend turns delivered audio into partial and final transcript
events. The deterministic mock models how packet loss erodes a transcript:
a scripted word survives only if at least half of its 20 ms frames arrived.
The live adapter pins the wire contract for a real streaming API without
requiring credentials in CI.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Protocol

from .media_gateway import Scenario, decode_mulaw
from .netsim import FRAME_MS, DeliveryTrace

log = logging.getLogger(__name__)

WORD_COVERAGE_THRESHOLD = 0.5
PARTIAL_INTERVAL_MS = 1000


class BackendClosed(Exception):
    pass


class EncodingMismatch(Exception):
    pass


@dataclass(frozen=True)
class BackendCapabilities:
    sample_rate_hz: int = 8000
    encoding: str = "mulaw"  # "mulaw" | "pcm16"


@dataclass(frozen=True)
class AudioFrame:
    """One delivered frame as handed to a transcriber."""

    seq: int
    timestamp_ms: int
    payload: bytes
    encoding: str = "mulaw"


@dataclass
class TranscriptEvent:
    session_id: str
    kind: str  # "partial" | "final"
    text: str
    confidence: float
    received_at: float


class TranscriberBackend(Protocol):
    capabilities: BackendCapabilities

    def push_audio(self, frame: AudioFrame) -> None: ...

    def flush(self) -> None: ...

    def poll_events(self) -> list[TranscriptEvent]: ...


def forward_policy(events: Iterable[TranscriptEvent]) -> list[TranscriptEvent]:
    """Only final transcripts flow downstream; partials stay UI-only."""
    return [e for e in events if e.kind == "final"]


# ---------------------------------------------------------------------------
# Deterministic mock.


def _word_frame_range(word, frame_ms: int = FRAME_MS) -> range:
    return range(word.start_ms // frame_ms, math.ceil(word.end_ms / frame_ms))


def word_coverage(script: Scenario, delivered_seqs: set[int]) -> list[tuple[str, float]]:
    """Delivered-frame fraction per scripted word, in script order."""
    out = []
    for word in script.words:
        frames = _word_frame_range(word)
        got = sum(1 for seq in frames if seq in delivered_seqs)
        out.append((word.text, got / len(frames) if len(frames) else 0.0))
    return out


def _degraded_text(coverage: list[tuple[str, float]]) -> tuple[str, float]:
    kept = [(w, c) for w, c in coverage if c >= WORD_COVERAGE_THRESHOLD]
    if not kept:
        return "", 0.0
    text = " ".join(w for w, _ in kept)
    confidence = sum(c for _, c in kept) / len(kept)
    return text, confidence


def mock_transcribe(script: Scenario, trace: DeliveryTrace, session_id: str = "") -> TranscriptEvent:
    """Final transcript the mock backend would emit for this delivery trace.

    Pure in (script, trace): words keep script order, each emitted iff at
    least half its frames arrived; confidence is the mean delivered
    fraction over the emitted words.
    """
    text, confidence = _degraded_text(word_coverage(script, trace.delivered_seqs()))
    return TranscriptEvent(
        session_id=session_id,
        kind="final",
        text=text,
        confidence=confidence,
        received_at=float(script.duration_ms),
    )


class MockTranscriber:
    """Scripted backend that reconstructs the degradation from arriving seqs.

    Partials fire once per second of stream time and are always a prefix of
    the eventual final. After flush the backend is closed and emits exactly
    one final.
    """

    capabilities = BackendCapabilities(sample_rate_hz=8000, encoding="mulaw")

    def __init__(self, script: Scenario, session_id: str):
        self.script = script
        self.session_id = session_id
        self.arrived: set[int] = set()
        self.closed = False
        self._pending: list[TranscriptEvent] = []
        self._next_partial_ms = PARTIAL_INTERVAL_MS
        self._last_partial_text = ""

    def push_audio(self, frame: AudioFrame) -> None:
        if self.closed:
            raise BackendClosed("push_audio after flush")
        if frame.encoding != self.capabilities.encoding:
            raise EncodingMismatch(f"mock expects {self.capabilities.encoding}, got {frame.encoding}")
        self.arrived.add(frame.seq)
        stream_ms = frame.timestamp_ms + FRAME_MS
        while stream_ms >= self._next_partial_ms:
            self._emit_partial(self._next_partial_ms)
            self._next_partial_ms += PARTIAL_INTERVAL_MS

    def _emit_partial(self, boundary_ms: int) -> None:
        settled = Scenario(
            name=self.script.name,
            words=[w for w in self.script.words if w.end_ms <= boundary_ms],
        )
        text, confidence = _degraded_text(word_coverage(settled, self.arrived))
        if text and text != self._last_partial_text:
            self._last_partial_text = text
            self._pending.append(
                TranscriptEvent(self.session_id, "partial", text, confidence, float(boundary_ms))
            )

    def flush(self) -> None:
        if self.closed:
            raise BackendClosed("flush after flush")
        self.closed = True
        text, confidence = _degraded_text(word_coverage(self.script, self.arrived))
        self._pending.append(
            TranscriptEvent(
                self.session_id, "final", text, confidence, float(self.script.duration_ms)
            )
        )

    def poll_events(self) -> list[TranscriptEvent]:
        out, self._pending = self._pending, []
        return out


# ---------------------------------------------------------------------------
# Live adapter contract.

STT_API_KEY_ENV = "TRIAGE_STT_API_KEY"


class Transport(Protocol):
    """Duplex connection the live adapter writes frames to and reads events from."""

    def send(self, message: dict) -> None: ...

    def recv_pending(self) -> list[dict]: ...

    def close(self) -> None: ...


def resample_pcm16(samples: list[int], src_rate: int, dst_rate: int) -> list[int]:
    """Nearest-sample rate conversion, good enough for capability matching."""
    if src_rate == dst_rate:
        return samples
    n = max(1, round(len(samples) * dst_rate / src_rate))
    return [samples[min(len(samples) - 1, int(i * src_rate / dst_rate))] for i in range(n)]


class LiveTranscriberAdapter:
    """Wire contract for a real-time streaming STT service.

    On construction it authenticates with the key from TRIAGE_STT_API_KEY
    and negotiates capabilities; each pushed frame is re-encoded to the
    declared sample rate and encoding before send. Incoming messages of
    type partial/final map onto TranscriptEvent. The transport is
    injectable so the contract is testable without network access.
    """

    def __init__(
        self,
        transport: Transport,
        session_id: str,
        sample_rate_hz: int = 16000,
        api_key: str | None = None,
    ):
        key = api_key or os.environ.get(STT_API_KEY_ENV)
        if not key:
            raise BackendClosed(f"no API key in ${STT_API_KEY_ENV}")
        self.capabilities = BackendCapabilities(sample_rate_hz=sample_rate_hz, encoding="pcm16")
        self.session_id = session_id
        self.transport = transport
        self.closed = False
        transport.send(
            {
                "type": "session.begin",
                "api_key": key,
                "sample_rate": sample_rate_hz,
                "encoding": "pcm16",
            }
        )

    def push_audio(self, frame: AudioFrame) -> None:
        if self.closed:
            raise BackendClosed("push_audio after flush")
        if frame.encoding == "mulaw":
            samples = decode_mulaw(frame.payload)
        elif frame.encoding == "pcm16":
            samples = list(frame.payload)
        else:
            raise EncodingMismatch(f"cannot re-encode {frame.encoding}")
        samples = resample_pcm16(samples, 8000, self.capabilities.sample_rate_hz)
        self.transport.send({"type": "audio", "seq": frame.seq, "samples": samples})

    def flush(self) -> None:
        if self.closed:
            raise BackendClosed("flush after flush")
        self.closed = True
        self.transport.send({"type": "session.end"})

    def poll_events(self) -> list[TranscriptEvent]:
        events = []
        for msg in self.transport.recv_pending():
            kind = {"partial": "partial", "final": "final"}.get(msg.get("type"))
            if kind is None:
                log.warning("ignoring unknown STT message type %r", msg.get("type"))
                continue
            events.append(
                TranscriptEvent(
                    session_id=self.session_id,
                    kind=kind,
                    text=msg.get("text", ""),
                    confidence=float(msg.get("confidence", 0.0)),
                    received_at=float(msg.get("audio_ms", 0.0)),
                )
            )
        return events
