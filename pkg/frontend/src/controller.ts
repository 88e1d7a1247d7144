// Orchestrates the console: snapshot fetches, live-event application,
// optimistic claim/resolve with 409 rollback, weight tuning with a
// queue-order diff, and the scenario launcher.

import { ApiClient, ApiError } from './api.js';
import {
  applyLiveEvent,
  applySnapshot,
  diffQueueOrder,
  initialState,
  type ConsoleState,
  type OrderMove,
} from './state.js';
import type { LiveEvent, QueueRow, SimulateRequest } from './types.js';

export class ConsoleController {
  state: ConsoleState = initialState();
  lastOrderDiff: OrderMove[] = [];

  constructor(
    private api: ApiClient,
    private onRender: (state: ConsoleState) => void = () => {},
  ) {}

  private setState(state: ConsoleState): void {
    this.state = state;
    this.onRender(state);
  }

  async refreshSnapshot(): Promise<QueueRow[]> {
    const rows = await this.api.getCalls();
    this.setState(applySnapshot(this.state, rows));
    return rows;
  }

  // live events mutate visible rows in place; anything the snapshot does
  // not know (new session, seq gap) triggers one full refetch
  async handleLiveEvent(event: LiveEvent): Promise<void> {
    this.setState(applyLiveEvent(this.state, event));
    if (this.state.needsRefetch) {
      await this.refreshSnapshot();
    }
  }

  select(sessionId: string | null): void {
    this.setState({ ...this.state, selected: sessionId });
  }

  async claim(sessionId: string): Promise<boolean> {
    return this.transition(sessionId, 'claimed', () => this.api.claim(sessionId));
  }

  async resolve(sessionId: string): Promise<boolean> {
    return this.transition(sessionId, 'resolved', () => this.api.resolve(sessionId));
  }

  private async transition(
    sessionId: string,
    optimistic: QueueRow['status'],
    call: () => Promise<unknown>,
  ): Promise<boolean> {
    const before = this.state.rows;
    const rows = before.map((row) =>
      row.session_id === sessionId ? { ...row, status: optimistic } : row,
    );
    this.setState({ ...this.state, rows, error: null });
    try {
      await call();
      if (optimistic === 'resolved') {
        await this.refreshSnapshot(); // resolved rows leave the server queue
      }
      return true;
    } catch (err) {
      // roll the optimistic update back; 409 means an illegal transition
      const message =
        err instanceof ApiError && err.status === 409
          ? `${sessionId}: ${err.detail} (409, rolled back)`
          : `${sessionId}: ${String(err)}`;
      this.setState({ ...this.state, rows: before, error: message });
      return false;
    }
  }

  // PUT the new weights, then show which rows moved where
  async applyWeights(flat: Record<string, number>): Promise<OrderMove[]> {
    const before = this.state.rows;
    try {
      await this.api.putConfig(flat);
    } catch (err) {
      this.setState({ ...this.state, error: String(err) });
      return [];
    }
    const after = await this.refreshSnapshot();
    this.lastOrderDiff = diffQueueOrder(before, after);
    return this.lastOrderDiff;
  }

  async launchScenario(request: SimulateRequest): Promise<string | null> {
    try {
      const { session_id } = await this.api.simulate(request);
      await this.refreshSnapshot();
      return session_id;
    } catch (err) {
      this.setState({ ...this.state, error: String(err) });
      return null;
    }
  }
}

// renormalize a slider group so the server's sum-to-1 validation accepts it
export function normalizeWeightGroup(
  values: Record<string, number>,
  keys: string[],
): Record<string, number> {
  const total = keys.reduce((acc, k) => acc + (values[k] ?? 0), 0);
  const out: Record<string, number> = {};
  if (total <= 0) {
    keys.forEach((k) => (out[k] = 1 / keys.length));
    return out;
  }
  keys.forEach((k) => (out[k] = (values[k] ?? 0) / total));
  return out;
}
