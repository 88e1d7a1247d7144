import type { CallDetail, ConfigSnapshot, QueueRow, SimulateRequest } from './types.js';

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        detail = (await resp.json()).detail ?? detail;
      } catch {
        // non-JSON error body; keep statusText
      }
      throw new ApiError(resp.status, detail);
    }
    return resp.json() as Promise<T>;
  }

  getCalls(): Promise<QueueRow[]> {
    return this.request('/calls');
  }

  getCall(sessionId: string): Promise<CallDetail> {
    return this.request(`/calls/${encodeURIComponent(sessionId)}`);
  }

  claim(sessionId: string): Promise<{ session_id: string; status: string }> {
    return this.request(`/calls/${encodeURIComponent(sessionId)}/claim`, { method: 'POST' });
  }

  resolve(sessionId: string): Promise<{ session_id: string; status: string }> {
    return this.request(`/calls/${encodeURIComponent(sessionId)}/resolve`, { method: 'POST' });
  }

  getConfig(): Promise<ConfigSnapshot> {
    return this.request('/config');
  }

  putConfig(flat: Record<string, number | string[]>): Promise<ConfigSnapshot> {
    return this.request('/config', {
      method: 'PUT',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(flat),
    });
  }

  simulate(body: SimulateRequest): Promise<{ session_id: string; bandwidth: string }> {
    return this.request('/simulate', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
  }
}
