// Mirrors of the service API payloads. All scores originate server-side;
// the console never computes triage math of its own.

export interface QueueRow {
  session_id: string;
  priority: number;
  severity_score: number;
  severity_level: 'Mild' | 'Moderate' | 'Severe';
  frequency_score: number;
  distress_score: number;
  enqueued_at: number;
  status: 'waiting' | 'claimed' | 'resolved';
}

export interface TranscriptLine {
  kind: 'partial' | 'final';
  text: string;
  confidence: number;
  at_ms: number;
}

export interface Assessment {
  score: number;
  level: string;
  features: { keyword: number; emotion: number; context: number };
  rationale: { matched_severe: string[]; matched_mild: string[]; emotion_label: string };
}

export interface CallDetail {
  session_id: string;
  state: string;
  frames_received: number;
  transcripts: TranscriptLine[];
  reconstruction: { predicted_text: string; retrieved: string[] } | null;
  intent: string | null;
  assessment: Assessment | null;
  priority: { priority: number; status: string; enqueued_at: number } | null;
}

export type ConfigSnapshot = Record<string, number | string[]>;

export interface LiveEvent {
  kind:
    | 'call_started'
    | 'transcript_partial'
    | 'transcript_final'
    | 'reconstruction'
    | 'severity_update'
    | 'priority_update'
    | 'call_closed';
  session_id: string;
  seq: number;
  payload: Record<string, any>;
}

export interface SimulateRequest {
  scenario: string;
  seed?: number;
  channel?: {
    p_random?: number;
    burst_enter?: number;
    burst_exit?: number;
    burst_loss?: number;
    jitter_std_ms?: number;
  };
}
