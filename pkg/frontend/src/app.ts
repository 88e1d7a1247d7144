// Browser entry: mounts the console against the service API, WS-first with
// a 2 s polling fallback.

import { ApiClient } from './api.js';
import { ConsoleController, normalizeWeightGroup } from './controller.js';
import { renderActivity, renderConfigPanel, renderDetail, renderError, renderOrderDiff, renderQueue } from './render.js';
import { LiveFeed } from './ws.js';

const API_BASE = (window as any).CALLTRIAGE_API ?? 'http://127.0.0.1:8080';
const POLL_MS = 2000;

const api = new ApiClient(API_BASE);

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

const controller = new ConsoleController(api, (state) => {
  el('queue').innerHTML = renderQueue(state.rows, state.selected);
  el('errors').innerHTML = renderError(state.error);
  if (state.selected && state.activity[state.selected]) {
    el('detail').innerHTML = renderActivity(state.activity[state.selected]);
  }
});

const feed = new LiveFeed(`${API_BASE.replace(/^http/, 'ws')}/live`, {
  onEvent: (event) => void controller.handleLiveEvent(event),
  onStatus: (connected) => {
    el('feed-status').textContent = connected ? 'live' : 'polling';
    el('feed-status').className = connected ? 'live' : 'stale';
  },
});

async function showDetail(sessionId: string): Promise<void> {
  controller.select(sessionId);
  try {
    const detail = await api.getCall(sessionId);
    el('detail').innerHTML = renderDetail(detail);
  } catch {
    el('detail').innerHTML = '<p class="empty">Session detail unavailable.</p>';
  }
}

document.addEventListener('click', (event) => {
  const target = event.target as HTMLElement;
  const action = target.dataset.action;
  const session = target.dataset.session ?? target.closest<HTMLElement>('[data-session]')?.dataset.session;
  if (action === 'claim' && session) {
    void controller.claim(session);
  } else if (action === 'resolve' && session) {
    void controller.resolve(session);
  } else if (action === 'apply-config') {
    void applyWeights();
  } else if (action === 'launch') {
    void launch();
  } else if (session) {
    void showDetail(session);
  }
});

async function applyWeights(): Promise<void> {
  const values: Record<string, number> = {};
  document.querySelectorAll<HTMLInputElement>('[data-config-key]').forEach((input) => {
    values[input.dataset.configKey!] = Number(input.value);
  });
  const flat = {
    ...normalizeWeightGroup(values, ['priority.w_severity', 'priority.w_frequency', 'priority.w_distress']),
    ...normalizeWeightGroup(values, ['triage.w_keyword', 'triage.w_emotion', 'triage.w_context']),
  };
  const moves = await controller.applyWeights(flat);
  el('order-diff').innerHTML = renderOrderDiff(moves);
}

async function launch(): Promise<void> {
  const scenario = (el('scenario-name') as HTMLSelectElement).value;
  const loss = Number((el('scenario-loss') as HTMLInputElement).value);
  const burst = Number((el('scenario-burst') as HTMLInputElement).value);
  const seed = Number((el('scenario-seed') as HTMLInputElement).value);
  await controller.launchScenario({
    scenario,
    seed,
    channel: {
      p_random: loss,
      burst_enter: burst,
      burst_exit: burst > 0 ? 0.4 : 0,
      burst_loss: 1.0,
    },
  });
}

async function boot(): Promise<void> {
  const config = await api.getConfig();
  el('config-panel').innerHTML = renderConfigPanel(config);
  await controller.refreshSnapshot();
  feed.start();
  setInterval(() => {
    if (!feed.connected) void controller.refreshSnapshot();
  }, POLL_MS);
}

void boot();
