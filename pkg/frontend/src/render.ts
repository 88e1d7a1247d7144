// HTML-string renderers. Pure functions of console state so views are
// reproducible from (snapshot, events); the app shell owns mounting.

import type { ConsoleState, OrderMove, SessionActivity } from './state.js';
import type { CallDetail, ConfigSnapshot, QueueRow, TranscriptLine } from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

const BADGE_CLASS: Record<string, string> = {
  Mild: 'badge badge-mild',
  Moderate: 'badge badge-moderate',
  Severe: 'badge badge-severe',
};

export function severityBadge(level: string): string {
  const cls = BADGE_CLASS[level] ?? 'badge';
  return `<span class="${cls}">${escapeHtml(level)}</span>`;
}

export function renderQueue(rows: QueueRow[], selected: string | null = null): string {
  if (rows.length === 0) {
    return '<p class="empty">No live calls. Launch a scenario to get started.</p>';
  }
  const body = rows
    .map((row) => {
      const sel = row.session_id === selected ? ' selected' : '';
      return (
        `<tr class="queue-row${sel}" data-session="${escapeHtml(row.session_id)}">` +
        `<td class="mono">${escapeHtml(row.session_id)}</td>` +
        `<td class="num">${row.priority.toFixed(3)}</td>` +
        `<td>${severityBadge(row.severity_level)}</td>` +
        `<td class="num">${row.severity_score.toFixed(2)}</td>` +
        `<td class="num">${row.frequency_score.toFixed(2)}</td>` +
        `<td class="num">${row.distress_score.toFixed(2)}</td>` +
        `<td class="status-${row.status}">${row.status}</td>` +
        `<td>` +
        `<button data-action="claim" data-session="${escapeHtml(row.session_id)}"` +
        `${row.status !== 'waiting' ? ' disabled' : ''}>claim</button> ` +
        `<button data-action="resolve" data-session="${escapeHtml(row.session_id)}"` +
        `${row.status !== 'claimed' ? ' disabled' : ''}>resolve</button>` +
        `</td></tr>`
      );
    })
    .join('');
  return (
    '<table class="queue"><thead><tr>' +
    '<th>call</th><th>priority</th><th>severity</th><th>S</th><th>F</th><th>D</th><th>status</th><th></th>' +
    `</tr></thead><tbody>${body}</tbody></table>`
  );
}

function highlightKeywords(text: string, severe: string[], mild: string[]): string {
  let html = escapeHtml(text);
  for (const [terms, cls] of [
    [severe, 'kw-severe'],
    [mild, 'kw-mild'],
  ] as const) {
    for (const term of terms) {
      const pattern = new RegExp(`\\b(${term.replace(/[.*+?^${}()|[\]\\]/g, '\\$&')})\\b`, 'gi');
      html = html.replace(pattern, `<mark class="${cls}">$1</mark>`);
    }
  }
  return html;
}

function renderTimeline(lines: TranscriptLine[], severe: string[], mild: string[]): string {
  if (lines.length === 0) return '<p class="empty">No transcript yet.</p>';
  return lines
    .map((line) => {
      const cls = line.kind === 'partial' ? 'line partial' : 'line final';
      const text =
        line.kind === 'partial'
          ? escapeHtml(line.text)
          : highlightKeywords(line.text, severe, mild);
      return (
        `<div class="${cls}"><span class="at">${(line.at_ms / 1000).toFixed(1)}s</span> ` +
        `${text} <span class="conf">${(line.confidence * 100).toFixed(0)}%</span></div>`
      );
    })
    .join('');
}

export function renderDetail(detail: CallDetail): string {
  const severe = detail.assessment?.rationale?.matched_severe ?? [];
  const mild = detail.assessment?.rationale?.matched_mild ?? [];
  const pieces = [
    `<h2 class="mono">${escapeHtml(detail.session_id)} <span class="state">${escapeHtml(detail.state)}</span></h2>`,
    `<div class="timeline">${renderTimeline(detail.transcripts, severe, mild)}</div>`,
  ];
  if (detail.reconstruction) {
    pieces.push(
      '<h3>Reconstruction</h3>' +
        `<div class="line reconstructed">${highlightKeywords(
          detail.reconstruction.predicted_text,
          severe,
          mild,
        )}</div>`,
    );
  }
  if (detail.assessment) {
    const a = detail.assessment;
    pieces.push(
      '<h3>Assessment</h3>' +
        `<p>${severityBadge(a.level)} score ${a.score.toFixed(2)} ` +
        `(keyword ${a.features.keyword}, emotion ${a.features.emotion}, context ${a.features.context}; ` +
        `emotion label: ${escapeHtml(a.rationale.emotion_label)})</p>`,
    );
  }
  if (detail.intent) {
    pieces.push(`<p>intent: <b>${escapeHtml(detail.intent)}</b></p>`);
  }
  return pieces.join('\n');
}

// session activity assembled purely from LiveEvents, for calls the console
// watched arrive over /live rather than fetched
export function renderActivity(act: SessionActivity): string {
  const severe = act.assessment?.rationale?.matched_severe ?? [];
  const mild = act.assessment?.rationale?.matched_mild ?? [];
  const pieces = [
    `<h2 class="mono">${escapeHtml(act.session_id)}${act.closed ? ' <span class="state">CLOSED</span>' : ''}</h2>`,
    `<div class="timeline">${renderTimeline(act.timeline, severe, mild)}</div>`,
  ];
  if (act.predicted_text !== null) {
    pieces.push(
      `<h3>Reconstruction</h3><div class="line reconstructed">${highlightKeywords(act.predicted_text, severe, mild)}</div>`,
    );
  }
  if (act.assessment) {
    pieces.push(
      `<h3>Assessment</h3><p>${severityBadge(act.assessment.level)} score ${act.assessment.score.toFixed(2)}</p>`,
    );
  }
  return pieces.join('\n');
}

export function renderConfigPanel(config: ConfigSnapshot): string {
  const sliders = [
    'priority.w_severity',
    'priority.w_frequency',
    'priority.w_distress',
    'triage.w_keyword',
    'triage.w_emotion',
    'triage.w_context',
  ]
    .map((key) => {
      const value = Number(config[key] ?? 0);
      return (
        `<label class="tuner">${escapeHtml(key)} ` +
        `<input type="range" min="0" max="1" step="0.05" value="${value}" data-config-key="${escapeHtml(key)}">` +
        `<span class="val">${value.toFixed(2)}</span></label>`
      );
    })
    .join('');
  return (
    `${sliders}<button data-action="apply-config">apply weights</button>` +
    '<p class="hint">weights in each group are renormalized to sum to 1 before apply</p>'
  );
}

export function renderOrderDiff(moves: OrderMove[]): string {
  if (moves.length === 0) return '<p class="empty">Queue order unchanged.</p>';
  return (
    '<ul class="diff">' +
    moves
      .map(
        (m) =>
          `<li class="mono">${escapeHtml(m.session_id)}: #${m.from + 1} → #${m.to + 1}</li>`,
      )
      .join('') +
    '</ul>'
  );
}

export function renderError(error: string | null): string {
  return error ? `<div class="error">${escapeHtml(error)}</div>` : '';
}

export function renderView(state: ConsoleState): { queue: string; error: string } {
  return {
    queue: renderQueue(state.rows, state.selected),
    error: renderError(state.error),
  };
}
