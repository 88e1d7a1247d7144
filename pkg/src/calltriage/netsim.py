"""Simulated VoIP transport channel.

Models the three degradations that break emergency-call audio: independent
(random) packet loss, bursty loss driven by a two-state Gilbert-Elliott
chain, and delay/jitter. Also answers bandwidth-admission questions for a
given number of active calls. Everything is deterministic under a fixed
seed so degraded calls can be replayed bit-identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

FRAME_MS = 20
FRAME_BYTES = 160  # 20 ms of 8 kHz mu-law, one byte per sample


@dataclass(frozen=True)
class ChannelConfig:
    """Parameters of the simulated network path for one call.

    burst_enter/burst_exit are the per-packet good->bad and bad->good
    transition probabilities of the Gilbert-Elliott chain; burst_loss is
    the drop probability while the chain sits in the bad state.
    """

    p_random: float = 0.0
    burst_enter: float = 0.0
    burst_exit: float = 0.0
    burst_loss: float = 1.0
    delay_mean_ms: float = 0.0
    jitter_std_ms: float = 0.0
    bandwidth_avail_kbps: float = 10_000.0
    per_call_kbps: float = 64.0
    seed: int = 0

    def __post_init__(self):
        for name in ("p_random", "burst_enter", "burst_exit", "burst_loss"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.burst_enter > 0 and self.burst_exit <= 0:
            raise ValueError("burst_exit must be > 0 when burst_enter > 0 (bad state would absorb)")
        if self.delay_mean_ms < 0 or self.jitter_std_ms < 0:
            raise ValueError("delay and jitter must be nonnegative")
        if self.bandwidth_avail_kbps <= 0 or self.per_call_kbps <= 0:
            raise ValueError("bandwidth rates must be positive")


@dataclass(frozen=True)
class PacketFrame:
    """One audio frame on the wire."""

    seq: int
    send_time_ms: float
    payload: bytes = b""


@dataclass
class DeliveryTrace:
    """What the channel did to a frame sequence.

    `delivered` holds (seq, arrival_time_ms) in send order; `dropped` holds
    the lost seqs. Together they partition the input.
    """

    delivered: list[tuple[int, float]] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)

    @property
    def empirical_loss_rate(self) -> float:
        total = len(self.delivered) + len(self.dropped)
        return len(self.dropped) / total if total else 0.0

    def delivered_seqs(self) -> set[int]:
        return {seq for seq, _ in self.delivered}

    def to_json(self) -> str:
        return json.dumps(
            {
                "delivered": [[seq, t] for seq, t in self.delivered],
                "dropped": self.dropped,
                "empirical_loss_rate": self.empirical_loss_rate,
            }
        )


def effective_loss_probability(cfg: ChannelConfig) -> float:
    """Overall per-packet loss probability: random plus stationary bursty.

    The bursty component is the stationary bad-state occupancy of the
    Gilbert-Elliott chain times the in-state loss probability. The additive
    combination can exceed 1 for extreme settings, so it is clamped.
    """
    if cfg.burst_enter == 0:
        return cfg.p_random
    p_bursty = cfg.burst_loss * cfg.burst_enter / (cfg.burst_enter + cfg.burst_exit)
    return min(1.0, cfg.p_random + p_bursty)


def reception_rate(p_loss: float) -> float:
    """Fraction of packets that get through: 1 - p_loss."""
    if not 0.0 <= p_loss <= 1.0:
        raise ValueError(f"p_loss must be in [0, 1], got {p_loss}")
    return 1.0 - p_loss


_DRAW_BATCH = 8192


class Channel:
    """Stateful per-stream channel. Not shared across threads; one per call.

    Per frame, in fixed order: draw the independent loss, apply the
    Gilbert-Elliott state loss, advance the chain, then (if delivered)
    draw the jitter. The chain starts in the good state. Randomness is
    drawn from the seeded generator in deterministic batches, so equal
    seeds and frame sequences replay bit-identically.
    """

    def __init__(self, cfg: ChannelConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.bad = False
        self._uniforms: list[float] = []
        self._normals: list[float] = []

    def _uniform(self) -> float:
        if not self._uniforms:
            self._uniforms = self.rng.random(_DRAW_BATCH).tolist()
            self._uniforms.reverse()
        return self._uniforms.pop()

    def _normal(self) -> float:
        if not self._normals:
            self._normals = self.rng.standard_normal(_DRAW_BATCH).tolist()
            self._normals.reverse()
        return self._normals.pop()

    def step(self, frame: PacketFrame) -> float | None:
        """Push one frame through. Returns arrival time in ms, or None if lost."""
        cfg = self.cfg
        lost = cfg.p_random > 0 and self._uniform() < cfg.p_random
        if self.bad and self._uniform() < cfg.burst_loss:
            lost = True
        if self.bad:
            if self._uniform() < cfg.burst_exit:
                self.bad = False
        elif cfg.burst_enter > 0 and self._uniform() < cfg.burst_enter:
            self.bad = True
        if lost:
            return None
        arrival = frame.send_time_ms + cfg.delay_mean_ms
        if cfg.jitter_std_ms > 0:
            arrival += self._normal() * cfg.jitter_std_ms
        return max(arrival, frame.send_time_ms)


def transmit(frames, cfg: ChannelConfig) -> DeliveryTrace:
    """Run a frame sequence through a fresh channel and record the outcome."""
    channel = Channel(cfg)
    trace = DeliveryTrace()
    for frame in frames:
        arrival = channel.step(frame)
        if arrival is None:
            trace.dropped.append(frame.seq)
        else:
            trace.delivered.append((frame.seq, arrival))
    return trace


@dataclass(frozen=True)
class BandwidthDecision:
    status: str  # "admitted" | "degraded"
    utilized_kbps: float
    overflow_loss: float  # extra loss probability applied when degraded

    @property
    def admitted(self) -> bool:
        return self.status == "admitted"


def bandwidth_admission(active_calls: int, cfg: ChannelConfig) -> BandwidthDecision:
    """Check N concurrent calls against the available bandwidth.

    Utilization is N times the per-call rate. When it exceeds what is
    available, calls are not rejected; instead quality degrades, realized
    as extra random loss proportional to the overflow fraction.
    """
    if active_calls < 0:
        raise ValueError("active call count must be nonnegative")
    utilized = active_calls * cfg.per_call_kbps
    if utilized <= cfg.bandwidth_avail_kbps:
        return BandwidthDecision("admitted", utilized, 0.0)
    overflow = (utilized - cfg.bandwidth_avail_kbps) / utilized
    return BandwidthDecision("degraded", utilized, overflow)


def with_overflow_loss(cfg: ChannelConfig, decision: BandwidthDecision) -> ChannelConfig:
    """Fold a degraded-bandwidth decision into the channel's random loss."""
    if decision.overflow_loss <= 0:
        return cfg
    return replace(cfg, p_random=min(1.0, cfg.p_random + decision.overflow_loss))


def frames_for_duration(duration_ms: float, payload: bytes = b"\xff" * FRAME_BYTES):
    """Yield the frame sequence covering `duration_ms` of audio."""
    count = max(0, math.ceil(duration_ms / FRAME_MS))
    for seq in range(count):
        yield PacketFrame(seq=seq, send_time_ms=seq * FRAME_MS, payload=payload)
