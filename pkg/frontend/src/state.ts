// Pure console state: a function of the last snapshot plus the LiveEvents
// applied since. Replaying the same event log always reproduces the same
// view. Queue rows keep the server-provided order; the client never
// re-sorts on its own.

import type { Assessment, LiveEvent, QueueRow, TranscriptLine } from './types.js';

export interface SessionActivity {
  session_id: string;
  timeline: TranscriptLine[];
  predicted_text: string | null;
  retrieved: string[];
  intent: string | null;
  assessment: Assessment | null;
  closed: boolean;
}

export interface ConsoleState {
  rows: QueueRow[];
  activity: Record<string, SessionActivity>;
  lastSeq: Record<string, number>;
  selected: string | null;
  error: string | null;
  // set when an event referenced a session the snapshot does not know or a
  // seq gap was seen; the controller answers with a full snapshot refetch
  needsRefetch: boolean;
}

export function initialState(): ConsoleState {
  return {
    rows: [],
    activity: {},
    lastSeq: {},
    selected: null,
    error: null,
    needsRefetch: false,
  };
}

export function applySnapshot(state: ConsoleState, rows: QueueRow[]): ConsoleState {
  return { ...state, rows: [...rows], needsRefetch: false };
}

function activityFor(state: ConsoleState, sessionId: string): SessionActivity {
  return (
    state.activity[sessionId] ?? {
      session_id: sessionId,
      timeline: [],
      predicted_text: null,
      retrieved: [],
      intent: null,
      assessment: null,
      closed: false,
    }
  );
}

function withActivity(state: ConsoleState, act: SessionActivity): ConsoleState {
  return { ...state, activity: { ...state.activity, [act.session_id]: act } };
}

function patchRow(state: ConsoleState, sessionId: string, patch: Partial<QueueRow>): ConsoleState {
  const index = state.rows.findIndex((r) => r.session_id === sessionId);
  if (index === -1) {
    // unknown to the current snapshot: only the server knows where it ranks
    return { ...state, needsRefetch: true };
  }
  const rows = [...state.rows];
  rows[index] = { ...rows[index], ...patch };
  return { ...state, rows };
}

export function applyLiveEvent(state: ConsoleState, event: LiveEvent): ConsoleState {
  const last = state.lastSeq[event.session_id];
  const gap = last !== undefined && event.seq !== last + 1;
  let next: ConsoleState = {
    ...state,
    lastSeq: { ...state.lastSeq, [event.session_id]: event.seq },
    needsRefetch: state.needsRefetch || gap,
  };

  const act = activityFor(next, event.session_id);
  switch (event.kind) {
    case 'call_started':
      return withActivity(next, act);
    case 'transcript_partial':
    case 'transcript_final': {
      const line: TranscriptLine = {
        kind: event.kind === 'transcript_final' ? 'final' : 'partial',
        text: String(event.payload.text ?? ''),
        confidence: Number(event.payload.confidence ?? 0),
        at_ms: Number(event.payload.at_ms ?? 0),
      };
      return withActivity(next, { ...act, timeline: [...act.timeline, line] });
    }
    case 'reconstruction':
      return withActivity(next, {
        ...act,
        predicted_text: String(event.payload.predicted_text ?? ''),
        retrieved: (event.payload.retrieved as string[]) ?? [],
        intent: (event.payload.intent as string) ?? null,
      });
    case 'severity_update': {
      next = withActivity(next, {
        ...act,
        assessment: {
          score: Number(event.payload.score),
          level: String(event.payload.level),
          features: event.payload.features,
          rationale: event.payload.rationale,
        },
      });
      return patchRow(next, event.session_id, {
        severity_score: Number(event.payload.score),
        severity_level: event.payload.level,
      });
    }
    case 'priority_update':
      return patchRow(next, event.session_id, {
        priority: Number(event.payload.priority),
        frequency_score: Number(event.payload.frequency_score),
        distress_score: Number(event.payload.distress_score),
        status: event.payload.status,
      });
    case 'call_closed':
      return withActivity(next, { ...act, closed: true });
    default:
      return next;
  }
}

export function replay(events: LiveEvent[], base?: ConsoleState): ConsoleState {
  return events.reduce(applyLiveEvent, base ?? initialState());
}

// what-if view for the weight tuner: positions moved between two snapshots
export interface OrderMove {
  session_id: string;
  from: number;
  to: number;
}

export function diffQueueOrder(before: QueueRow[], after: QueueRow[]): OrderMove[] {
  const moves: OrderMove[] = [];
  const positions = new Map(before.map((r, i) => [r.session_id, i]));
  after.forEach((row, to) => {
    const from = positions.get(row.session_id);
    if (from !== undefined && from !== to) {
      moves.push({ session_id: row.session_id, from, to });
    }
  });
  return moves;
}
