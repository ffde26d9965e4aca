/**
 * Cross-view coordinator.
 *
 * Owns all API traffic: a range change re-queries every view with identical
 * bounds (one in-flight request per view, superseded requests cancelled), and
 * any view's selection goes through one resolve round-trip before being
 * applied to all views. DAG expand/collapse runs through here too, including
 * silent re-creation of an expired server session by replaying the pin log.
 */

import { ApiClient, ApiError, ViewChannel } from './api.js';
import { LinkState, normalizeNodeResolve, normalizeResolve } from './state.js';
import type { Selection } from './state.js';
import type { DagView } from './views/dag.js';
import type { HeatmapView } from './views/heatmap.js';
import type { ProjectionView } from './views/projection.js';
import type { RankingView } from './views/ranking.js';
import type {
  EdgeRef,
  NodeResolveDoc,
  ProjectionDoc,
  ResolveDoc,
  ScatterDoc,
  SessionDoc,
  TransitionRow,
} from './types.js';

export interface LinkerViews {
  ranking: RankingView;
  projection: ProjectionView;
  dag: DagView;
  heatmap: HeatmapView;
}

export interface LinkerOptions {
  rankingN?: number;
  rankingStep?: number;
  resolution?: number;
  transitionsTop?: number;
  sessionId?: string;
}

export class Linker {
  readonly api: ApiClient;
  readonly state: LinkState;
  readonly views: LinkerViews;
  readonly sessionId: string;
  /** Ordered expand log used to rebuild an expired server session. */
  readonly expansionLog: { key: string; child: string }[] = [];

  private readonly channels = {
    ranking: new ViewChannel(),
    projection: new ViewChannel(),
    dag: new ViewChannel(),
    heatmap: new ViewChannel(),
    overlay: new ViewChannel(),
  };
  private readonly options: Required<Omit<LinkerOptions, 'sessionId'>>;

  constructor(api: ApiClient, state: LinkState, views: LinkerViews, options: LinkerOptions = {}) {
    this.api = api;
    this.state = state;
    this.views = views;
    this.sessionId = options.sessionId ?? `ui-${Math.random().toString(36).slice(2, 10)}`;
    this.options = {
      rankingN: options.rankingN ?? 12,
      rankingStep: options.rankingStep ?? 0,
      resolution: options.resolution ?? 20,
      transitionsTop: options.transitionsTop ?? 40,
    };
    state.on('range', () => {
      // a new range invalidates the old selection's id space
      state.clearSelection();
      void this.refetchAll();
    });
    state.on('metric', () => {
      views.dag.setEdgeMetric(state.heatmapMetric, state.direction);
      void this.refetchHeatmap();
    });
    state.on('selection', () => {
      const selection = state.selection;
      views.ranking.applySelection(selection);
      views.projection.applySelection(selection);
      views.dag.applySelection(selection);
      views.heatmap.applySelection(selection);
      if (selection) void this.overlayProjection(selection);
    });
  }

  private rangeParams(): { from: number; to: number } {
    return { from: this.state.range[0], to: this.state.range[1] };
  }

  /** Frame stride so a long run still yields a readable number of frames. */
  private rankingStep(): number {
    if (this.options.rankingStep > 0) return this.options.rankingStep;
    const [lo, hi] = this.state.range;
    return Math.max(1, Math.ceil((hi - lo + 1) / 40));
  }

  async refetchAll(): Promise<void> {
    this.views.projection.clearDetail();
    this.views.dag.clearChildren();
    this.views.heatmap.clearHover();
    await Promise.all([
      this.refetchRanking(),
      this.refetchProjection(),
      this.refetchDag(),
      this.refetchHeatmap(),
    ]);
  }

  async refetchRanking(): Promise<void> {
    const params = { ...this.rangeParams(), metric: 'reward', n: this.options.rankingN, step: this.rankingStep() };
    const doc = await this.channels.ranking.run((signal) => this.api.ranking(params, signal));
    if (doc) this.views.ranking.update(doc);
  }

  async refetchProjection(): Promise<void> {
    const params = { ...this.rangeParams(), resolution: this.options.resolution };
    const mode = this.views.projection.mode;
    const doc = await this.channels.projection.run<ProjectionDoc | ScatterDoc>((signal) =>
      mode === 'binned' ? this.api.projection(params, signal) : this.api.scatter(params, signal),
    );
    if (doc) this.views.projection.update(doc);
  }

  async refetchDag(): Promise<void> {
    const doc = await this.channels.dag.run((signal) =>
      this.api.dagSession(this.sessionId, this.rangeParams(), signal),
    );
    if (doc) {
      const repaired = await this.replayIfReset(doc);
      this.views.dag.update(repaired);
    }
  }

  async refetchHeatmap(): Promise<void> {
    const params = {
      ...this.rangeParams(),
      metric: this.views.heatmap.metric,
      direction: this.views.heatmap.direction,
      top: this.options.transitionsTop,
    };
    const doc = await this.channels.heatmap.run((signal) => this.api.transitions(params, signal));
    if (doc) this.views.heatmap.update(doc);
  }

  // -- selection flows ------------------------------------------------------

  private async applyResolved(doc: ResolveDoc | NodeResolveDoc): Promise<void> {
    const selection = doc.kind === 'node' ? normalizeNodeResolve(doc as NodeResolveDoc) : normalizeResolve(doc as ResolveDoc);
    this.state.setSelection(selection);
  }

  /** Samples selection from explicit trajectory ids. */
  async selectSamples(ids: number[]): Promise<void> {
    const doc = await this.api.resolveSelection({ kind: 'samples', ids, ...this.rangeParams() });
    await this.applyResolved(doc);
  }

  /** Ranked-object click: all samples in range terminating at `key`. */
  async selectRankedKey(key: string): Promise<void> {
    const samples = await this.api.samples({ ...this.rangeParams(), terminal_key: key });
    await this.selectSamples(samples.samples.map((s) => s.trajectory_id));
  }

  /** Projection bin click: open the detail panel and select its samples. */
  async selectBin(q: number, r: number): Promise<void> {
    const params = { ...this.rangeParams(), resolution: this.options.resolution };
    const detail = await this.api.binDetail(q, r, params);
    this.views.projection.showDetail(detail);
    const doc = await this.api.resolveSelection({
      kind: 'bin',
      ids: [[q, r]],
      resolution: this.options.resolution,
      ...this.rangeParams(),
    });
    await this.applyResolved(doc);
  }

  /** Heatmap row click: trajectories traversing the transition. */
  async selectEdges(edges: EdgeRef[]): Promise<void> {
    const doc = await this.api.resolveSelection({ kind: 'edges', ids: edges, ...this.rangeParams() });
    await this.applyResolved(doc);
  }

  /** DAG node click: trajectories through the state. */
  async selectNode(key: string): Promise<void> {
    const doc = await this.api.resolveSelection({ kind: 'node', ids: [key], ...this.rangeParams() });
    await this.applyResolved(doc);
  }

  /** In hexbin mode selected samples are overlaid as scatter dots. */
  private async overlayProjection(selection: Selection): Promise<void> {
    if (this.views.projection.mode !== 'binned' || selection.projectionIds.size === 0) return;
    const doc = await this.channels.overlay.run((signal) => this.api.scatter(this.rangeParams(), signal));
    if (!doc) return;
    this.views.projection.overlaySelected(
      doc.points.filter((point) => selection.projectionIds.has(point.trajectory_id)),
    );
  }

  // -- dag session management -----------------------------------------------

  /** True when the server no longer reflects an expansion we performed. */
  private sessionLostPins(doc: SessionDoc): boolean {
    return this.expansionLog.some((entry) => !doc.pinned.includes(entry.child));
  }

  /**
   * Replay the expansion log against a fresh server session. Entries that no
   * longer apply (e.g. the child fell outside the range) are dropped.
   */
  private async replayIfReset(doc: SessionDoc): Promise<SessionDoc> {
    if (!this.sessionLostPins(doc)) return doc;
    let current = doc;
    const kept: { key: string; child: string }[] = [];
    for (const entry of this.expansionLog) {
      if (current.pinned.includes(entry.child)) {
        kept.push(entry);
        continue;
      }
      try {
        current = await this.api.dagExpand(this.sessionId, entry.key, entry.child, this.rangeParams());
        kept.push(entry);
      } catch (error) {
        if (!(error instanceof ApiError)) throw error;
      }
    }
    this.expansionLog.splice(0, this.expansionLog.length, ...kept);
    return current;
  }

  async showChildren(key: string): Promise<void> {
    const doc = await this.api.dagChildren(key, this.rangeParams());
    this.views.dag.showChildren(doc);
  }

  async expand(key: string, child: string): Promise<void> {
    try {
      const doc = await this.api.dagExpand(this.sessionId, key, child, this.rangeParams());
      this.expansionLog.push({ key, child });
      this.views.dag.update(doc);
    } catch (error) {
      if (!(error instanceof ApiError) || (error.status !== 400 && error.status !== 404)) throw error;
      // expired session: rebuild silently, then retry once
      const fresh = await this.api.dagSession(this.sessionId, this.rangeParams());
      await this.replayIfReset(fresh);
      const doc = await this.api.dagExpand(this.sessionId, key, child, this.rangeParams());
      this.expansionLog.push({ key, child });
      this.views.dag.update(doc);
    }
    this.views.dag.clearChildren();
  }

  async collapse(key: string): Promise<void> {
    const doc = await this.api.dagCollapse(this.sessionId, key, this.rangeParams());
    // the server unpins the collapsed subtree; mirror that in the log
    const kept = this.expansionLog.filter((entry) => doc.pinned.includes(entry.child));
    this.expansionLog.splice(0, this.expansionLog.length, ...kept);
    this.views.dag.update(doc);
  }

  // -- hover flows ------------------------------------------------------------

  async hoverTransition(row: TransitionRow): Promise<void> {
    const [history, src, dst] = await Promise.all([
      this.api.history({
        src: row.src,
        dst: row.dst,
        terminal: row.terminal,
        ...this.rangeParams(),
      }),
      this.api.renderState(row.src),
      row.terminal ? this.api.renderState(row.src) : this.api.renderState(row.dst),
    ]);
    this.views.heatmap.showHover(row, history, src.render, dst.render);
  }
}
