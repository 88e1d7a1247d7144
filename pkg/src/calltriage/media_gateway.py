"""Media-stream gateway.

Terminates the vendor JSON-over-WebSocket media protocol (connected / start /
media / stop events with base64 mu-law payloads), decodes audio, and drives
one call-session state machine per stream. Also provides scenario replay:
a word-timed script is framed, pushed through the simulated channel, and
re-emitted as the wire events a live call would have produced.
"""

from __future__ import annotations

import base64
import binascii
import json
import math
import re
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

from . import netsim
from .netsim import FRAME_BYTES, FRAME_MS, ChannelConfig, DeliveryTrace, PacketFrame


class MediaProtocolError(Exception):
    """Base for wire-protocol failures."""


class UnknownEvent(MediaProtocolError):
    pass


class MalformedPayload(MediaProtocolError):
    pass


class MissingField(MediaProtocolError):
    pass


class ProtocolViolation(MediaProtocolError):
    pass


class ScenarioNotFound(Exception):
    pass


class BadFixture(Exception):
    pass


EVENT_KINDS = ("connected", "start", "media", "stop")

# base64 alphabet with optional canonical padding
_B64 = re.compile(r"^[A-Za-z0-9+/]*={0,2}$")


@dataclass
class MediaEvent:
    """One parsed protocol message."""

    kind: str
    stream_id: str | None = None
    sequence: int | None = None
    payload_b64: str | None = None
    timestamp_ms: int | None = None
    _payload: bytes | None = field(default=None, repr=False)

    @property
    def payload(self) -> bytes:
        """Decoded audio bytes; decoding happens on first access."""
        if self._payload is None:
            if self.payload_b64 is None:
                raise MissingField("event carries no payload")
            try:
                self._payload = base64.b64decode(self.payload_b64, validate=True)
            except (binascii.Error, ValueError) as exc:
                raise MalformedPayload(f"invalid base64 payload: {exc}") from exc
        return self._payload


def parse_media_event(text: str) -> MediaEvent:
    """Parse one complete protocol message into a typed event."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedPayload(f"message is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "event" not in obj:
        raise MissingField("message has no 'event' field")
    kind = obj["event"]
    if kind not in EVENT_KINDS:
        raise UnknownEvent(f"unknown event kind {kind!r}")

    stream_id = obj.get("streamSid")
    if kind != "media":
        if kind != "connected" and stream_id is None:
            raise MissingField(f"{kind} event missing streamSid")
        return MediaEvent(kind=kind, stream_id=stream_id)

    media = obj.get("media")
    if not isinstance(media, dict) or "payload" not in media:
        raise MissingField("media event missing media.payload")
    payload_b64 = media["payload"]
    if not payload_b64 or not _B64.match(payload_b64) or len(payload_b64) % 4:
        raise MalformedPayload("payload is not valid base64")
    if stream_id is None:
        raise MissingField("media event missing streamSid")
    if "sequenceNumber" not in obj:
        raise MissingField("media event missing sequenceNumber")
    if "timestamp" not in media:
        raise MissingField("media event missing media.timestamp")
    try:
        sequence = int(obj["sequenceNumber"])
        timestamp = int(media["timestamp"])
    except (TypeError, ValueError) as exc:
        raise MissingField(f"non-numeric sequence/timestamp: {exc}") from exc
    return MediaEvent(
        kind="media",
        stream_id=stream_id,
        sequence=sequence,
        payload_b64=payload_b64,
        timestamp_ms=timestamp,
    )


def serialize_media_event(event: MediaEvent) -> str:
    """Render an event back to the vendor wire format (numbers as strings)."""
    obj: dict = {"event": event.kind}
    if event.stream_id is not None:
        obj["streamSid"] = event.stream_id
    if event.kind == "media":
        obj["sequenceNumber"] = str(event.sequence)
        obj["media"] = {"payload": event.payload_b64, "timestamp": str(event.timestamp_ms)}
    return json.dumps(obj)


# ---------------------------------------------------------------------------
# G.711 mu-law codec. One byte per 8 kHz sample. Codewords are transmitted
# bit-inverted; 0xFF is digital silence. Note mu-law has two zero codes
# (0xFF and 0x7F), so encode(0) canonically yields 0xFF.

_MULAW_BIAS = 0x84
_MULAW_CLIP = 32635


def _mulaw_decode_byte(b: int) -> int:
    u = ~b & 0xFF
    magnitude = (((u & 0x0F) << 3) + _MULAW_BIAS) << ((u >> 4) & 0x07)
    magnitude -= _MULAW_BIAS
    return -magnitude if u & 0x80 else magnitude


MULAW_DECODE_TABLE = tuple(_mulaw_decode_byte(b) for b in range(256))


def decode_mulaw(payload: bytes) -> list[int]:
    """Expand mu-law bytes to signed 16-bit PCM samples."""
    if not payload:
        raise ValueError("empty payload")
    return [MULAW_DECODE_TABLE[b] for b in payload]


def encode_mulaw_sample(sample: int) -> int:
    """Compress one signed 16-bit PCM sample to a mu-law byte."""
    sign = 0x80 if sample < 0 else 0
    if sample < 0:
        sample = -sample
    if sample > _MULAW_CLIP:
        sample = _MULAW_CLIP
    sample += _MULAW_BIAS
    exponent = sample.bit_length() - 8  # top set bit above the 7 mantissa+bias bits
    mantissa = (sample >> (exponent + 3)) & 0x0F
    return ~(sign | (exponent << 4) | mantissa) & 0xFF


def encode_mulaw(samples) -> bytes:
    return bytes(encode_mulaw_sample(s) for s in samples)


# ---------------------------------------------------------------------------
# Call session state machine.


class SessionState(IntEnum):
    CONNECTING = 0
    STREAMING = 1
    AWAITING_FINAL = 2
    CLOSED = 3


@dataclass
class ForwardAudio:
    """Deliver one frame's audio to the transcriber."""

    seq: int
    timestamp_ms: int
    payload: bytes


@dataclass
class FlushTranscriber:
    """Stream ended; ask the transcriber to finalize."""


@dataclass
class CallSession:
    """Lifecycle state of one live call."""

    session_id: str
    state: SessionState = SessionState.CONNECTING
    started_at: float = 0.0
    frames_received: int = 0
    transcript_buffer: list = field(default_factory=list)
    current_assessment: object | None = None
    current_priority: object | None = None

    def mark_final_done(self):
        """Transcriber finished after flush: AwaitingFinal -> Closed."""
        if self.state != SessionState.AWAITING_FINAL:
            raise ProtocolViolation(f"final-done in state {self.state.name}")
        self.state = SessionState.CLOSED


def advance_session(session: CallSession, event: MediaEvent) -> list:
    """Apply one media event to the session; returns follow-up actions.

    State only moves forward: Connecting -> Streaming -> AwaitingFinal ->
    Closed (abrupt stop jumps Streaming -> AwaitingFinal the same way, the
    socket closing counts as stop). Sequence gaps in media events are the
    loss signal and pass through silently.
    """
    if event.stream_id is not None and event.stream_id != session.session_id:
        raise ProtocolViolation(
            f"event for stream {event.stream_id!r} on session {session.session_id!r}"
        )
    state = session.state
    if state == SessionState.CLOSED:
        raise ProtocolViolation(f"{event.kind} event after close")

    if event.kind == "connected":
        if state != SessionState.CONNECTING:
            raise ProtocolViolation("connected event after stream start")
        return []
    if event.kind == "start":
        if state != SessionState.CONNECTING:
            raise ProtocolViolation("duplicate start event")
        session.state = SessionState.STREAMING
        return []
    if event.kind == "media":
        if state != SessionState.STREAMING:
            raise ProtocolViolation(f"media event in state {state.name}")
        session.frames_received += 1
        return [ForwardAudio(event.sequence, event.timestamp_ms, event.payload)]
    # stop
    if state != SessionState.STREAMING:
        raise ProtocolViolation(f"stop event in state {state.name}")
    session.state = SessionState.AWAITING_FINAL
    return [FlushTranscriber()]


# ---------------------------------------------------------------------------
# Scenario replay.


@dataclass(frozen=True)
class ScenarioWord:
    text: str
    start_ms: int
    end_ms: int


@dataclass
class Scenario:
    """Word-timed ground-truth script for a simulated call."""

    name: str
    words: list[ScenarioWord]
    audio_fixture: str | None = None
    expected_severity: str | None = None

    @property
    def duration_ms(self) -> int:
        return max((w.end_ms for w in self.words), default=0)

    @property
    def text(self) -> str:
        return " ".join(w.text for w in self.words)

    def frame_count(self) -> int:
        return math.ceil(self.duration_ms / FRAME_MS)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioNotFound(str(path))
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
        words = [ScenarioWord(w["text"], int(w["start_ms"]), int(w["end_ms"])) for w in obj["words"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise BadFixture(f"{path}: {exc}") from exc
    scenario = Scenario(
        name=obj.get("name", path.stem),
        words=words,
        audio_fixture=obj.get("audio_fixture"),
        expected_severity=obj.get("expected_severity"),
    )
    validate_scenario(scenario)
    return scenario


def validate_scenario(scenario: Scenario):
    prev_end = 0
    for w in scenario.words:
        if w.end_ms <= w.start_ms:
            raise BadFixture(f"word {w.text!r} has empty interval")
        if w.start_ms < prev_end:
            raise BadFixture(f"word {w.text!r} overlaps the previous word")
        prev_end = w.end_ms


def scenario_frames(scenario: Scenario, fixture_dir: Path | None = None):
    """The frame sequence a live call for this script would have sent."""
    if scenario.audio_fixture:
        base = fixture_dir or Path(".")
        audio_path = base / scenario.audio_fixture
        if not audio_path.exists():
            raise BadFixture(f"audio fixture missing: {audio_path}")
        audio = audio_path.read_bytes()
        if not audio:
            raise BadFixture(f"audio fixture empty: {audio_path}")
        count = math.ceil(len(audio) / FRAME_BYTES)
        for seq in range(count):
            chunk = audio[seq * FRAME_BYTES : (seq + 1) * FRAME_BYTES]
            yield PacketFrame(seq=seq, send_time_ms=seq * FRAME_MS, payload=chunk.ljust(FRAME_BYTES, b"\xff"))
    else:
        yield from netsim.frames_for_duration(scenario.duration_ms)


def replay_scenario(
    scenario: Scenario,
    cfg: ChannelConfig,
    fixture_dir: Path | None = None,
    stream_id: str | None = None,
) -> tuple[list[MediaEvent], DeliveryTrace]:
    """Frame the script, run it through the channel, emit the surviving wire events.

    Events come out in arrival order (jitter may reorder; the receiver does
    not re-sort). Deterministic given the channel seed.
    """
    stream_id = stream_id or scenario.name
    frames = list(scenario_frames(scenario, fixture_dir))
    trace = netsim.transmit(frames, cfg)
    by_seq = {f.seq: f for f in frames}
    events = [MediaEvent(kind="start", stream_id=stream_id)]
    for seq, _arrival in sorted(trace.delivered, key=lambda d: (d[1], d[0])):
        frame = by_seq[seq]
        events.append(
            MediaEvent(
                kind="media",
                stream_id=stream_id,
                sequence=seq,
                payload_b64=base64.b64encode(frame.payload).decode("ascii"),
                timestamp_ms=int(frame.send_time_ms),
            )
        )
    events.append(MediaEvent(kind="stop", stream_id=stream_id))
    return events, trace
