import { describe, expect, it } from 'vitest';

import {
  applyLiveEvent,
  applySnapshot,
  diffQueueOrder,
  initialState,
  replay,
} from '../src/state.js';
import type { LiveEvent, QueueRow } from '../src/types.js';

function row(id: string, priority: number, level: QueueRow['severity_level'] = 'Moderate'): QueueRow {
  return {
    session_id: id,
    priority,
    severity_score: 2,
    severity_level: level,
    frequency_score: 0,
    distress_score: 0,
    enqueued_at: 0,
    status: 'waiting',
  };
}

function ev(kind: LiveEvent['kind'], session: string, seq: number, payload: Record<string, any> = {}): LiveEvent {
  return { kind, session_id: session, seq, payload };
}

describe('snapshot application', () => {
  it('keeps server order verbatim, even when unsorted by priority', () => {
    // the server owns the order contract; the client must not re-sort
    const rows = [row('b', 1.0), row('a', 3.0)];
    const state = applySnapshot(initialState(), rows);
    expect(state.rows.map((r) => r.session_id)).toEqual(['b', 'a']);
  });
});

describe('live event reducer', () => {
  it('severity_update patches a visible row in place without refetch', () => {
    let state = applySnapshot(initialState(), [row('a', 2.0), row('b', 1.0)]);
    state = applyLiveEvent(state, ev('severity_update', 'a', 1, { score: 3.4, level: 'Severe' }));
    expect(state.rows[0].severity_level).toBe('Severe');
    expect(state.rows[0].severity_score).toBe(3.4);
    expect(state.rows.map((r) => r.session_id)).toEqual(['a', 'b']); // order untouched
    expect(state.needsRefetch).toBe(false);
  });

  it('priority_update for an unknown session flags a refetch', () => {
    let state = applySnapshot(initialState(), [row('a', 2.0)]);
    state = applyLiveEvent(state, ev('priority_update', 'ghost', 1, { priority: 9 }));
    expect(state.needsRefetch).toBe(true);
  });

  it('a per-session seq gap flags a refetch', () => {
    let state = applySnapshot(initialState(), [row('a', 2.0)]);
    state = applyLiveEvent(state, ev('call_started', 'a', 1));
    expect(state.needsRefetch).toBe(false);
    state = applyLiveEvent(state, ev('severity_update', 'a', 3, { score: 2, level: 'Moderate' }));
    expect(state.needsRefetch).toBe(true);
  });

  it('assembles a transcript timeline with partials and finals', () => {
    const events: LiveEvent[] = [
      ev('call_started', 's', 1),
      ev('transcript_partial', 's', 2, { text: 'hel', confidence: 0.5, at_ms: 1000 }),
      ev('transcript_final', 's', 3, { text: 'help me', confidence: 0.9, at_ms: 2000 }),
      ev('reconstruction', 's', 4, { predicted_text: 'caller needs help', retrieved: ['x'], intent: 'medical' }),
      ev('call_closed', 's', 5),
    ];
    const state = replay(events);
    const act = state.activity['s'];
    expect(act.timeline.map((l) => l.kind)).toEqual(['partial', 'final']);
    expect(act.predicted_text).toBe('caller needs help');
    expect(act.intent).toBe('medical');
    expect(act.closed).toBe(true);
  });

  it('replaying the same event log reproduces the same view', () => {
    const events: LiveEvent[] = [
      ev('call_started', 's', 1),
      ev('transcript_final', 's', 2, { text: 'fire', confidence: 1, at_ms: 500 }),
      ev('severity_update', 's', 3, { score: 3.4, level: 'Severe', features: {}, rationale: {} }),
    ];
    const a = replay(events);
    const b = replay(events);
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });

  it('is pure: applying an event does not mutate the previous state', () => {
    const before = applySnapshot(initialState(), [row('a', 2.0)]);
    const frozen = JSON.stringify(before);
    applyLiveEvent(before, ev('severity_update', 'a', 1, { score: 4, level: 'Severe' }));
    expect(JSON.stringify(before)).toBe(frozen);
  });
});

describe('queue order diff', () => {
  it('reports moved rows only', () => {
    const before = [row('a', 3), row('b', 2), row('c', 1)];
    const after = [row('b', 5), row('a', 3), row('c', 1)];
    expect(diffQueueOrder(before, after)).toEqual([
      { session_id: 'b', from: 1, to: 0 },
      { session_id: 'a', from: 0, to: 1 },
    ]);
  });

  it('empty when order is unchanged', () => {
    const rows = [row('a', 3), row('b', 2)];
    expect(diffQueueOrder(rows, rows)).toEqual([]);
  });
});
