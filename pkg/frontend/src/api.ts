/**
 * Typed client for the gflowstate JSON API.
 *
 * The only configuration is the API base URL. Views fetch through a
 * {@link ViewChannel}, which keeps at most one request in flight per view and
 * cancels a superseded request instead of racing it.
 */

import type {
  BinDetailDoc,
  ChildrenDoc,
  HistoryDoc,
  NodeResolveDoc,
  ProjectionDoc,
  RankingDoc,
  RenderStateDoc,
  RenderStatesDoc,
  ResolveDoc,
  RunDoc,
  SamplesDoc,
  ScatterDoc,
  SessionDoc,
  ThroughDoc,
  TransitionsDoc,
} from './types.js';

export type QueryParams = Record<string, string | number | boolean | undefined>;

/** Serialize query parameters, skipping undefined values. */
export function buildQuery(params: QueryParams): string {
  const search = new URLSearchParams();
  for (const [name, value] of Object.entries(params)) {
    if (value === undefined) continue;
    search.set(name, String(value));
  }
  const text = search.toString();
  return text ? `?${text}` : '';
}

/** Error raised for non-2xx responses, carrying the server's detail message. */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(`api error ${status}: ${typeof detail === 'string' ? detail : JSON.stringify(detail)}`);
    this.status = status;
    this.detail = detail;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function readJson(response: Response): Promise<unknown> {
  if (response.ok) return response.json();
  let detail: unknown = response.statusText;
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (body && body.detail !== undefined) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(base = '', fetchImpl?: FetchLike) {
    this.base = base.replace(/\/$/, '');
    this.fetchImpl = fetchImpl ?? ((url, init) => globalThis.fetch(url, init));
  }

  url(path: string, params: QueryParams = {}): string {
    return `${this.base}${path}${buildQuery(params)}`;
  }

  async get<T>(path: string, params: QueryParams = {}, signal?: AbortSignal): Promise<T> {
    const response = await this.fetchImpl(this.url(path, params), { signal });
    return (await readJson(response)) as T;
  }

  async post<T>(path: string, body: unknown, params: QueryParams = {}, signal?: AbortSignal): Promise<T> {
    const response = await this.fetchImpl(this.url(path, params), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    });
    return (await readJson(response)) as T;
  }

  run(): Promise<RunDoc> {
    return this.get('/api/run');
  }

  samples(params: QueryParams): Promise<SamplesDoc> {
    return this.get('/api/samples', params);
  }

  ranking(params: QueryParams, signal?: AbortSignal): Promise<RankingDoc> {
    return this.get('/api/ranking', params, signal);
  }

  projection(params: QueryParams, signal?: AbortSignal): Promise<ProjectionDoc> {
    return this.get('/api/projection', { ...params, mode: 'binned' }, signal);
  }

  scatter(params: QueryParams, signal?: AbortSignal): Promise<ScatterDoc> {
    return this.get('/api/projection', { ...params, mode: 'scatter' }, signal);
  }

  binDetail(q: number, r: number, params: QueryParams): Promise<BinDetailDoc> {
    return this.get(`/api/projection/bin/${q}/${r}`, params);
  }

  dagSession(sessionId: string, params: QueryParams, signal?: AbortSignal): Promise<SessionDoc> {
    return this.get(`/api/dag/session/${encodeURIComponent(sessionId)}`, params, signal);
  }

  dagExpand(sessionId: string, key: string, child: string, params: QueryParams): Promise<SessionDoc> {
    return this.post(`/api/dag/session/${encodeURIComponent(sessionId)}/expand`, { key, child }, params);
  }

  dagCollapse(sessionId: string, key: string, params: QueryParams): Promise<SessionDoc> {
    return this.post(`/api/dag/session/${encodeURIComponent(sessionId)}/collapse`, { key }, params);
  }

  dagChildren(key: string, params: QueryParams): Promise<ChildrenDoc> {
    return this.get(`/api/dag/children/${encodeURIComponent(key)}`, params);
  }

  dagThrough(key: string, params: QueryParams): Promise<ThroughDoc> {
    return this.get(`/api/dag/through/${encodeURIComponent(key)}`, params);
  }

  transitions(params: QueryParams, signal?: AbortSignal): Promise<TransitionsDoc> {
    return this.get('/api/transitions', params, signal);
  }

  history(params: QueryParams): Promise<HistoryDoc> {
    return this.get('/api/transitions/history', params);
  }

  resolveSelection(body: Record<string, unknown>): Promise<ResolveDoc | NodeResolveDoc> {
    return this.post('/api/selection/resolve', body);
  }

  renderState(key: string): Promise<RenderStateDoc> {
    return this.get(`/api/render/state/${encodeURIComponent(key)}`);
  }

  renderStates(keys: string[]): Promise<RenderStatesDoc> {
    return this.post('/api/render/states', { keys });
  }
}

/**
 * One-request lane for a view: starting a new request aborts the previous
 * one, and an aborted request resolves to null so the caller can simply
 * drop it.
 */
export class ViewChannel {
  private controller: AbortController | null = null;

  /** Run `task` with this channel's signal; null means superseded. */
  async run<T>(task: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    try {
      const value = await task(controller.signal);
      return controller.signal.aborted ? null : value;
    } catch (error) {
      if (controller.signal.aborted) return null;
      if (error instanceof DOMException && error.name === 'AbortError') return null;
      throw error;
    } finally {
      if (this.controller === controller) this.controller = null;
    }
  }

  /** Abort any in-flight request. */
  cancel(): void {
    this.controller?.abort();
    this.controller = null;
  }
}
