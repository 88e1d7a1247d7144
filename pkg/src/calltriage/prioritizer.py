"""Dispatcher priority queue.

Each open call gets a priority from its severity score, how many related
calls are open (frequency), and the caller's distress level. The queue is
the single shared mutable structure in the service; every mutation goes
through one lock, and snapshots are immutable copies.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace
from typing import Iterable

from .triage import SeverityAssessment

FREQUENCY_WINDOW_S = 600.0
FREQUENCY_CAP_CALLS = 5  # n_related that saturates F at 1.0


class EmptyQueue(Exception):
    pass


class IllegalTransition(Exception):
    pass


@dataclass(frozen=True)
class PriorityWeights:
    w_severity: float = 0.6
    w_frequency: float = 0.2
    w_distress: float = 0.2

    def __post_init__(self):
        ws = (self.w_severity, self.w_frequency, self.w_distress)
        if any(w < 0 for w in ws):
            raise ValueError("priority weights must be nonnegative")
        if not math.isclose(sum(ws), 1.0, abs_tol=1e-9):
            raise ValueError(f"priority weights must sum to 1, got {sum(ws)}")


STATUSES = ("waiting", "claimed", "resolved")
_NEXT_STATUS = {"waiting": "claimed", "claimed": "resolved"}


@dataclass
class PriorityEntry:
    session_id: str
    severity_score: float
    frequency_score: float
    distress_score: float
    priority: float
    enqueued_at: float
    status: str = "waiting"


def priority_score(s: float, f: float, d: float, weights: PriorityWeights = PriorityWeights()) -> float:
    """Weighted sum; severity enters unnormalized (range [1, 4]) so that it
    dominates under the default weights."""
    return weights.w_severity * s + weights.w_frequency * f + weights.w_distress * d


@dataclass(frozen=True)
class CallSignals:
    """What relatedness looks at: keyword/intent evidence plus arrival time."""

    session_id: str
    signals: frozenset[str]
    at: float


def related(a: CallSignals, b: CallSignals, window_s: float = FREQUENCY_WINDOW_S) -> bool:
    if abs(a.at - b.at) > window_s:
        return False
    return len(a.signals & b.signals) >= 2


def frequency_score(target: CallSignals, open_calls: Iterable[CallSignals]) -> float:
    """F = min(1, (n_related - 1) / 4), counting the call itself plus open
    calls sharing at least two keyword/intent signals inside the window."""
    n_related = 1 + sum(
        1 for other in open_calls if other.session_id != target.session_id and related(target, other)
    )
    return min(1.0, (n_related - 1) / (FREQUENCY_CAP_CALLS - 1))


def distress_score(assessment: SeverityAssessment) -> float:
    """Map the emotion level {1, 2, 4} linearly onto [0, 1]."""
    return (assessment.features.emotion - 1) / 3


def _sort_key(entry: PriorityEntry):
    return (-entry.priority, entry.enqueued_at, entry.session_id)


class DispatchQueue:
    """Live queue ordered by (priority desc, enqueued_at asc, session_id asc)."""

    def __init__(self, weights: PriorityWeights = PriorityWeights()):
        self.weights = weights
        self._entries: dict[str, PriorityEntry] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def upsert(
        self,
        session_id: str,
        severity_score: float,
        frequency_score: float,
        distress_score: float,
        enqueued_at: float,
    ) -> PriorityEntry:
        """Insert or re-score one session. Existing entries keep their
        arrival time and status."""
        with self._lock:
            existing = self._entries.get(session_id)
            entry = PriorityEntry(
                session_id=session_id,
                severity_score=severity_score,
                frequency_score=frequency_score,
                distress_score=distress_score,
                priority=priority_score(severity_score, frequency_score, distress_score, self.weights),
                enqueued_at=existing.enqueued_at if existing else enqueued_at,
                status=existing.status if existing else "waiting",
            )
            self._entries[session_id] = entry
            return replace(entry)

    def snapshot(self) -> list[PriorityEntry]:
        """Ordered copy of all unresolved entries."""
        with self._lock:
            live = [replace(e) for e in self._entries.values() if e.status != "resolved"]
        return sorted(live, key=_sort_key)

    def get(self, session_id: str) -> PriorityEntry | None:
        with self._lock:
            entry = self._entries.get(session_id)
            return replace(entry) if entry else None

    def pop_highest(self) -> PriorityEntry:
        """Claim and return the highest-priority waiting entry."""
        with self._lock:
            waiting = [e for e in self._entries.values() if e.status == "waiting"]
            if not waiting:
                raise EmptyQueue("no waiting entries")
            head = min(waiting, key=_sort_key)
            head.status = "claimed"
            return replace(head)

    def transition(self, session_id: str, new_status: str) -> PriorityEntry:
        """waiting -> claimed -> resolved, one step at a time."""
        if new_status not in STATUSES:
            raise ValueError(f"unknown status {new_status!r}")
        with self._lock:
            entry = self._entries.get(session_id)
            if entry is None:
                raise KeyError(session_id)
            if _NEXT_STATUS.get(entry.status) != new_status:
                raise IllegalTransition(f"{entry.status} -> {new_status}")
            entry.status = new_status
            return replace(entry)

    def rescore(self, weights: PriorityWeights, severity_rescale=None) -> None:
        """Atomically swap weights and recompute every entry's priority.

        `severity_rescale` optionally maps an entry to its new severity
        score (used when triage weights change together with priorities).
        """
        with self._lock:
            self.weights = weights
            for sid, e in self._entries.items():
                s = severity_rescale(e) if severity_rescale else e.severity_score
                e.severity_score = s
                e.priority = priority_score(s, e.frequency_score, e.distress_score, weights)
