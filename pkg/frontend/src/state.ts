/**
 * Shared view-link state: the iteration range, the active selection and the
 * heatmap's metric/direction, with a tiny event bus tying the views together.
 */

import type { NodeResolveDoc, ResolveDoc, SelectionPin } from './types.js';

export type Range = [number, number];

/** Normalized selection consumed by every view. */
export interface Selection {
  kind: string;
  trajectoryIds: Set<number>;
  rankingKeys: Set<string>;
  projectionIds: Set<number>;
  pins: SelectionPin[];
  /** "src→dst" plus terminal keys, for heatmap row matching. */
  edgeIds: Set<string>;
  bins: Set<string>;
}

export function edgeId(src: string, dst: string, terminal: boolean): string {
  return terminal ? `${src}→●` : `${src}→${dst}`;
}

function edgeIdsFromPins(pins: SelectionPin[]): Set<string> {
  const ids = new Set<string>();
  for (const pin of pins) {
    for (const [src, dst] of pin.edges) ids.add(edgeId(src, dst, false));
    const last = pin.keys[pin.keys.length - 1];
    if (last !== undefined) ids.add(edgeId(last, last, true));
  }
  return ids;
}

/** Normalize a samples/bin/edges resolve payload. */
export function normalizeResolve(doc: ResolveDoc): Selection {
  const edgeIds = edgeIdsFromPins(doc.pins);
  for (const edge of doc.edges ?? []) edgeIds.add(edgeId(edge.src, edge.dst, edge.terminal));
  return {
    kind: doc.kind,
    trajectoryIds: new Set(doc.trajectory_ids),
    rankingKeys: new Set(doc.ranking_keys),
    projectionIds: new Set(doc.projection_ids),
    pins: doc.pins,
    edgeIds,
    bins: new Set((doc.bins ?? []).map(([q, r]) => `${q},${r}`)),
  };
}

/** Normalize a node resolve payload by deriving pins from trajectory steps. */
export function normalizeNodeResolve(doc: NodeResolveDoc): Selection {
  const trajectoryIds = new Set<number>();
  const rankingKeys = new Set<string>();
  const pins: SelectionPin[] = [];
  for (const node of doc.nodes) {
    for (const trajectory of node.trajectories) {
      if (trajectoryIds.has(trajectory.trajectory_id)) continue;
      trajectoryIds.add(trajectory.trajectory_id);
      rankingKeys.add(trajectory.terminal_key);
      const keys: string[] = [];
      const edges: [string, string][] = [];
      for (const step of trajectory.steps) {
        if (keys.length === 0) keys.push(step.src);
        if (!step.terminal) {
          edges.push([step.src, step.dst]);
          keys.push(step.dst);
        }
      }
      pins.push({ trajectory_id: trajectory.trajectory_id, keys, edges });
    }
  }
  return {
    kind: doc.kind,
    trajectoryIds,
    rankingKeys,
    projectionIds: new Set(trajectoryIds),
    pins,
    edgeIds: edgeIdsFromPins(pins),
    bins: new Set(),
  };
}

/** Trailing-edge debounce; `cancel` drops a pending call. */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): ((...args: A) => void) & { cancel: () => void } {
  let timer: ReturnType<typeof setTimeout> | null = null;
  const wrapped = (...args: A) => {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, waitMs);
  };
  wrapped.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
  };
  return wrapped;
}

export type LinkEvent = 'range' | 'selection' | 'metric';
type Listener = () => void;

export class LinkState {
  /** Full extent of the run; ranges are clamped to it. */
  readonly bounds: Range;
  range: Range;
  selection: Selection | null = null;
  heatmapMetric = 'frequency';
  direction: 'forward' | 'backward' = 'forward';

  private readonly listeners = new Map<LinkEvent, Set<Listener>>();

  constructor(bounds: Range) {
    this.bounds = bounds;
    this.range = [bounds[0], bounds[1]];
  }

  on(event: LinkEvent, listener: Listener): () => void {
    let set = this.listeners.get(event);
    if (!set) {
      set = new Set();
      this.listeners.set(event, set);
    }
    set.add(listener);
    return () => set.delete(listener);
  }

  private emit(event: LinkEvent): void {
    for (const listener of this.listeners.get(event) ?? []) listener();
  }

  /** Clamp into bounds, order the endpoints, and notify on change. */
  setRange(lo: number, hi: number): void {
    const [b0, b1] = this.bounds;
    let nlo = Math.round(Math.min(Math.max(lo, b0), b1));
    let nhi = Math.round(Math.min(Math.max(hi, b0), b1));
    if (nlo > nhi) [nlo, nhi] = [nhi, nlo];
    if (nlo === this.range[0] && nhi === this.range[1]) return;
    this.range = [nlo, nhi];
    this.emit('range');
  }

  setSelection(selection: Selection | null): void {
    this.selection = selection;
    this.emit('selection');
  }

  clearSelection(): void {
    if (this.selection === null) return;
    this.selection = null;
    this.emit('selection');
  }

  setHeatmapMetric(metric: string): void {
    if (metric === this.heatmapMetric) return;
    this.heatmapMetric = metric;
    this.emit('metric');
  }

  setDirection(direction: 'forward' | 'backward'): void {
    if (direction === this.direction) return;
    this.direction = direction;
    this.emit('metric');
  }
}
