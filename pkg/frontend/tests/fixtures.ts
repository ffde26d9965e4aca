/**
 * Canned API documents and a recording fake fetch used by the view and
 * linker suites. The shapes mirror the live wire format; range-dependent
 * documents echo the requested bounds so range propagation is observable.
 */

import type {
  BinDetailDoc,
  ChildrenDoc,
  HistoryDoc,
  ProjectionDoc,
  RankingDoc,
  ResolveDoc,
  RunDoc,
  SamplesDoc,
  ScatterDoc,
  SessionDoc,
  TransitionsDoc,
} from '../src/types.js';

export function makeRun(): RunDoc {
  return {
    env: 'grid',
    status: 'complete',
    iterations: 10,
    batch_size: 4,
    seed: 0,
    iteration_lo: 0,
    iteration_hi: 9,
    sample_count: 40,
    distinct_terminals: 4,
    validation_count: 9,
    analyzed: true,
    height: 3,
    env_config: { height: 3 },
    train_config: {},
    summary: {},
  };
}

export function makeRanking(from: number, to: number): RankingDoc {
  return {
    metric: 'reward',
    n: 3,
    from,
    to,
    frames: [
      {
        iteration: from,
        entries: [
          { key: '2,2', rank: 1, value: 2.5, first_ranked_iteration: from },
          { key: '1,2', rank: 2, value: 0.5, first_ranked_iteration: from },
        ],
      },
      {
        iteration: to,
        entries: [
          { key: '1,2', rank: 1, value: 2.5, first_ranked_iteration: from },
          { key: '2,2', rank: 2, value: 2.5, first_ranked_iteration: from },
          { key: '0,2', rank: 3, value: 0.5, first_ranked_iteration: to },
        ],
      },
    ],
  };
}

export function makeProjection(from: number, to: number): ProjectionDoc {
  return {
    mode: 'binned',
    method: 'identity',
    from,
    to,
    totals: { samples: 12, validation: 9 },
    resolution: 6,
    origin: [0, 0],
    radius: 0.2,
    bins: [
      {
        q: 0,
        r: 0,
        center: [0, 0],
        count_samples: 5,
        count_validation: 1,
        mean_reward: 0.5,
        mean_loss: 1.25,
        correlation: null,
        odds_score: 0.75,
      },
      {
        q: 1,
        r: 0,
        center: [0.3464, 0],
        count_samples: 4,
        count_validation: 1,
        mean_reward: 2.5,
        mean_loss: 0.5,
        correlation: -0.9,
        odds_score: -0.5,
      },
      {
        q: 0,
        r: 1,
        center: [0.1732, 0.3],
        count_samples: 0,
        count_validation: 2,
        mean_reward: null,
        mean_loss: null,
        correlation: null,
        odds_score: null,
      },
    ],
  };
}

export function makeScatter(from: number, to: number): ScatterDoc {
  return {
    mode: 'scatter',
    method: 'identity',
    from,
    to,
    totals: { samples: 4, validation: 0 },
    points: [
      { trajectory_id: 1, iteration: from, terminal_key: '2,2', reward: 2.5, loss: 1, x: 1, y: 1 },
      { trajectory_id: 2, iteration: from, terminal_key: '1,2', reward: 0.5, loss: 2, x: 0.5, y: 1 },
      { trajectory_id: 3, iteration: to, terminal_key: '2,2', reward: 2.5, loss: 0.5, x: 1, y: 0.9 },
      { trajectory_id: 4, iteration: to, terminal_key: '0,2', reward: 0.5, loss: 3, x: 0, y: 1 },
    ],
    validation: [],
  };
}

export function makeBinDetail(q: number, r: number, from: number, to: number): BinDetailDoc {
  return {
    q,
    r,
    center: [0, 0],
    count_samples: 2,
    count_validation: 1,
    mean_reward: 0.5,
    mean_loss: 1.0,
    correlation: null,
    odds_score: 0.5,
    loss_series: [
      { iteration: from, mean_loss: 2.0 },
      { iteration: to, mean_loss: 0.5 },
    ],
    reward_histogram: { log_edges: [-1, -0.5, 0], counts: [1, 1] },
    sample_ids: [1, 3],
    validation_keys: ['1,1'],
    render: { kind: 'grid_density', payload: { height: 3, counts: { '2,2': 2 } } },
    from,
    to,
  };
}

const RENDER_00 = { kind: 'grid_highlight', payload: { height: 3, cells: [[0, 0]] as [number, number][] } };
const RENDER_10 = { kind: 'grid_highlight', payload: { height: 3, cells: [[1, 0]] as [number, number][] } };

export function makeRootSession(from: number, to: number, session = 's'): SessionDoc {
  return {
    session,
    from,
    to,
    root: '0,0',
    truncated: true,
    pinned: ['0,0'],
    nodes: [
      {
        key: '0,0',
        depth: 0,
        visit_count: 40,
        first_iteration: 0,
        terminal_count: 5,
        stop: { frequency: 5, mean_p_forward: 0.3 },
        render: RENDER_00,
      },
    ],
    edges: [],
    placeholders: { '0,0': 2 },
  };
}

export function makeExpandedSession(from: number, to: number, session = 's'): SessionDoc {
  const base = makeRootSession(from, to, session);
  return {
    ...base,
    pinned: ['0,0', '1,0'],
    nodes: [
      ...base.nodes,
      {
        key: '1,0',
        depth: 1,
        visit_count: 22,
        first_iteration: 0,
        terminal_count: 3,
        stop: { frequency: 3, mean_p_forward: 0.25 },
        render: RENDER_10,
      },
    ],
    edges: [
      {
        src: '0,0',
        dst: '1,0',
        contracted_path: [],
        frequency: 22,
        mean_p_forward: 0.35,
        mean_p_backward: 1.0,
        active_iterations: [0, 1, 2, 3],
      },
    ],
    placeholders: { '0,0': 1, '1,0': 2 },
  };
}

export function makeChildren(key: string, from: number, to: number): ChildrenDoc {
  return {
    key,
    from,
    to,
    children: [
      {
        key: '1,0',
        frequency: 22,
        mean_p_forward: 0.35,
        max_p_forward: 0.4,
        first_iteration: 0,
        trajectory_count: 22,
        contracted_path: [],
      },
      {
        key: '0,1',
        frequency: 13,
        mean_p_forward: 0.3,
        max_p_forward: 0.33,
        first_iteration: 1,
        trajectory_count: 13,
        contracted_path: ['0,0'],
      },
    ],
  };
}

export function makeTransitions(from: number, to: number): TransitionsDoc {
  return {
    metric: 'frequency',
    direction: 'forward',
    from,
    to,
    rows: [
      {
        src: '0,0',
        dst: '1,0',
        terminal: false,
        value: 22,
        probability: 0.35,
        variance: 0.001,
        frequency: 22,
        active_iterations: [0, 1, 2, 3],
        rank: 1,
      },
      {
        src: '1,0',
        dst: '1,0',
        terminal: true,
        value: 3,
        probability: 0.25,
        variance: 0.002,
        frequency: 3,
        active_iterations: [3],
        rank: 2,
      },
    ],
  };
}

export function makeResolveEdges(from: number, to: number): ResolveDoc {
  return {
    kind: 'edges',
    from,
    to,
    trajectory_ids: [1, 3],
    ranking_keys: ['2,2'],
    projection_ids: [1, 3],
    pins: [
      { trajectory_id: 1, keys: ['0,0', '1,0', '2,2'], edges: [['0,0', '1,0'], ['1,0', '2,2']] },
      { trajectory_id: 3, keys: ['0,0', '1,0', '2,2'], edges: [['0,0', '1,0'], ['1,0', '2,2']] },
    ],
    edges: [{ src: '0,0', dst: '1,0', terminal: false }],
  };
}

export function makeResolveSamples(ids: number[], from: number, to: number): ResolveDoc {
  return {
    kind: 'samples',
    from,
    to,
    trajectory_ids: ids,
    ranking_keys: ['2,2'],
    projection_ids: ids,
    pins: ids.map((id) => ({
      trajectory_id: id,
      keys: ['0,0', '1,0', '2,2'],
      edges: [['0,0', '1,0'], ['1,0', '2,2']] as [string, string][],
    })),
  };
}

export function makeSamples(from: number, to: number): SamplesDoc {
  return {
    from,
    to,
    samples: [
      { trajectory_id: 1, iteration: from, terminal_key: '2,2', reward: 2.5, loss: 1, log_ptx: -1.2 },
      { trajectory_id: 3, iteration: to, terminal_key: '2,2', reward: 2.5, loss: 0.5, log_ptx: -1.1 },
    ],
  };
}

export function makeHistory(src: string, dst: string, terminal: boolean, from: number, to: number): HistoryDoc {
  return {
    src,
    dst,
    terminal,
    from,
    to,
    series: [
      { iteration: from, p_forward: 0.33, p_backward: 1 },
      { iteration: from + 1, p_forward: 0.35, p_backward: 1 },
      { iteration: to, p_forward: 0.4, p_backward: 1 },
    ],
  };
}

export interface RecordedCall {
  url: URL;
  method: string;
  body: unknown;
}

export type RouteHandler = (url: URL, call: RecordedCall) => unknown;

/**
 * Recording fetch stub: dispatches on pathname prefixes, honors
 * AbortSignal, and keeps every call for assertions.
 */
export class FakeApi {
  readonly calls: RecordedCall[] = [];
  /** Optional per-path overrides checked before the defaults. */
  readonly overrides: [string, RouteHandler][] = [];
  /** Delay responses by path prefix, for cancellation tests. */
  readonly delays = new Map<string, number>();

  readonly fetch = async (urlStr: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(urlStr, 'http://test.local');
    const call: RecordedCall = {
      url,
      method: init?.method ?? 'GET',
      body: typeof init?.body === 'string' ? JSON.parse(init.body) : undefined,
    };
    this.calls.push(call);
    const delay = [...this.delays.entries()].find(([prefix]) => url.pathname.startsWith(prefix))?.[1];
    if (delay) {
      await new Promise<void>((resolve, reject) => {
        const timer = setTimeout(resolve, delay);
        init?.signal?.addEventListener('abort', () => {
          clearTimeout(timer);
          reject(new DOMException('aborted', 'AbortError'));
        });
      });
    }
    if (init?.signal?.aborted) throw new DOMException('aborted', 'AbortError');
    const body = this.route(url, call);
    if (body instanceof Response) return body;
    return new Response(JSON.stringify(body), {
      status: 200,
      headers: { 'content-type': 'application/json' },
    });
  };

  callsTo(path: string): RecordedCall[] {
    return this.calls.filter((call) => call.url.pathname === path);
  }

  private range(url: URL): [number, number] {
    return [Number(url.searchParams.get('from') ?? 0), Number(url.searchParams.get('to') ?? 9)];
  }

  private route(url: URL, call: RecordedCall): unknown {
    for (const [prefix, handler] of this.overrides) {
      if (url.pathname.startsWith(prefix)) return handler(url, call);
    }
    const [from, to] = this.range(url);
    const path = url.pathname;
    if (path === '/api/run') return makeRun();
    if (path === '/api/ranking') return makeRanking(from, to);
    if (path === '/api/projection') {
      return url.searchParams.get('mode') === 'scatter' ? makeScatter(from, to) : makeProjection(from, to);
    }
    if (path.startsWith('/api/projection/bin/')) {
      const [q, r] = path.split('/').slice(-2).map(Number);
      return makeBinDetail(q ?? 0, r ?? 0, from, to);
    }
    if (/^\/api\/dag\/session\/[^/]+$/.test(path)) return makeRootSession(from, to);
    if (path.endsWith('/expand')) return makeExpandedSession(from, to);
    if (path.endsWith('/collapse')) return makeRootSession(from, to);
    if (path.startsWith('/api/dag/children/')) {
      return makeChildren(decodeURIComponent(path.split('/').pop() ?? ''), from, to);
    }
    if (path === '/api/transitions') return makeTransitions(from, to);
    if (path === '/api/transitions/history') {
      return makeHistory(
        url.searchParams.get('src') ?? '',
        url.searchParams.get('dst') ?? '',
        url.searchParams.get('terminal') === 'true',
        from,
        to,
      );
    }
    if (path === '/api/selection/resolve') {
      const body = call.body as { kind: string; ids?: unknown[]; from?: number; to?: number };
      const lo = body.from ?? 0;
      const hi = body.to ?? 9;
      if (body.kind === 'samples') return makeResolveSamples((body.ids ?? []) as number[], lo, hi);
      return makeResolveEdges(lo, hi);
    }
    if (path === '/api/samples') return makeSamples(from, to);
    if (path.startsWith('/api/render/state/')) {
      const key = decodeURIComponent(path.split('/').pop() ?? '');
      const [x, y] = key.split(',').map(Number);
      return { key, render: { kind: 'grid_highlight', payload: { height: 3, cells: [[x ?? 0, y ?? 0]] } } };
    }
    if (path === '/api/render/states') {
      return { count: 1, render: { kind: 'grid_density', payload: { height: 3, counts: { '0,0': 1 } } } };
    }
    return new Response(JSON.stringify({ detail: `no fake route for ${path}` }), { status: 404 });
  }
}
