/**
 * Transition heatmap: one row per transition, ranked top-to-bottom, with an
 * iteration axis across. A cell is drawn only where the transition was
 * actually traversed; hovering shows both endpoint renders plus the
 * probability history, and clicking emits an edges selection.
 */

import { colorForMetric } from '../color.js';
import { extent } from '../scale.js';
import { renderSpecSvg, svgElement } from '../render.js';
import { edgeId } from '../state.js';
import type { Selection } from '../state.js';
import type { HistoryDoc, RenderSpec, TransitionRow, TransitionsDoc } from '../types.js';

export const HEATMAP_METRICS = ['frequency', 'probability', 'variance'] as const;
export type HeatmapMetric = (typeof HEATMAP_METRICS)[number];

/**
 * Presence of a transition per iteration bucket.
 *
 * Buckets partition [lo, hi] into `buckets` equal spans; a bucket is active
 * when it contains at least one active iteration.
 */
export function bucketCells(
  activeIterations: number[],
  lo: number,
  hi: number,
  buckets: number,
): boolean[] {
  const cells = new Array<boolean>(buckets).fill(false);
  const span = hi - lo + 1;
  for (const iteration of activeIterations) {
    if (iteration < lo || iteration > hi) continue;
    const index = Math.min(Math.floor(((iteration - lo) / span) * buckets), buckets - 1);
    cells[index] = true;
  }
  return cells;
}

export function rowLabel(row: TransitionRow): string {
  return row.terminal ? `${row.src} → ●` : `${row.src} → ${row.dst}`;
}

export interface HeatmapCallbacks {
  onSelectRow(row: TransitionRow): void;
  onHoverRow(row: TransitionRow): void;
  onLeave(): void;
  onMetricChange(metric: HeatmapMetric): void;
  onDirectionChange(direction: 'forward' | 'backward'): void;
}

export class HeatmapView {
  readonly el: HTMLElement;
  metric: HeatmapMetric = 'frequency';
  direction: 'forward' | 'backward' = 'forward';
  private readonly callbacks: HeatmapCallbacks;
  private readonly plot: HTMLDivElement;
  private readonly hoverPanel: HTMLDivElement;
  private doc: TransitionsDoc | null = null;
  private selection: Selection | null = null;

  constructor(container: HTMLElement, callbacks: HeatmapCallbacks) {
    this.callbacks = callbacks;
    this.el = document.createElement('div');
    this.el.className = 'view heatmap-view';

    const controls = document.createElement('div');
    controls.className = 'controls';
    const metricSelect = document.createElement('select');
    metricSelect.className = 'metric-select';
    for (const metric of HEATMAP_METRICS) {
      const option = document.createElement('option');
      option.value = metric;
      option.textContent = metric;
      metricSelect.appendChild(option);
    }
    metricSelect.addEventListener('change', () => {
      this.metric = metricSelect.value as HeatmapMetric;
      this.callbacks.onMetricChange(this.metric);
    });
    const directionButton = document.createElement('button');
    directionButton.className = 'direction-toggle';
    directionButton.textContent = 'direction: forward';
    directionButton.addEventListener('click', () => {
      this.direction = this.direction === 'forward' ? 'backward' : 'forward';
      directionButton.textContent = `direction: ${this.direction}`;
      this.callbacks.onDirectionChange(this.direction);
    });
    controls.append(metricSelect, directionButton);

    this.plot = document.createElement('div');
    this.plot.className = 'plot';
    this.hoverPanel = document.createElement('div');
    this.hoverPanel.className = 'hover-panel';
    this.el.append(controls, this.plot, this.hoverPanel);
    container.appendChild(this.el);
  }

  update(doc: TransitionsDoc): void {
    this.doc = doc;
    this.render();
  }

  applySelection(selection: Selection | null): void {
    this.selection = selection;
    this.render();
  }

  /** Endpoint renders plus probability history for the hovered transition. */
  showHover(row: TransitionRow, history: HistoryDoc, src: RenderSpec, dst: RenderSpec): void {
    this.hoverPanel.replaceChildren();
    const title = document.createElement('h3');
    title.textContent = rowLabel(row);
    const renders = document.createElement('div');
    renders.className = 'renders';
    renders.append(renderSpecSvg(src, 56), renderSpecSvg(dst, 56));
    this.hoverPanel.append(title, renders);

    if (history.series.length > 0) {
      const width = 240;
      const height = 64;
      const svg = svgElement('svg', { viewBox: `0 0 ${width} ${height}` });
      svg.classList.add('history-chart');
      const iterations = history.series.map((p) => p.iteration);
      const [i0, i1] = extent(iterations);
      const probability = (p: { p_forward: number; p_backward: number }) =>
        this.direction === 'forward' ? p.p_forward : p.p_backward;
      const values = history.series.map(probability);
      const [v0, v1] = extent(values);
      const points = history.series
        .map((p) => {
          const px = i1 === i0 ? width / 2 : ((p.iteration - i0) / (i1 - i0)) * width;
          const py = v1 === v0 ? height / 2 : height - ((probability(p) - v0) / (v1 - v0)) * height;
          return `${px.toFixed(1)},${py.toFixed(1)}`;
        })
        .join(' ');
      svg.appendChild(svgElement('polyline', { points, fill: 'none', stroke: '#1d4ed8', 'stroke-width': 1.5 }));
      this.hoverPanel.appendChild(svg);
    }
  }

  clearHover(): void {
    this.hoverPanel.replaceChildren();
  }

  private render(): void {
    this.plot.replaceChildren();
    const doc = this.doc;
    if (!doc) return;
    if (doc.rows.length === 0) {
      const empty = document.createElement('div');
      empty.className = 'empty-state';
      empty.textContent = 'no transitions in this iteration range';
      this.plot.appendChild(empty);
      return;
    }
    const labelWidth = 120; // px
    const rowHeight = 18; // px
    const cellArea = 420; // px
    const buckets = Math.min(doc.to - doc.from + 1, 60);
    const width = labelWidth + cellArea;
    const height = doc.rows.length * rowHeight;
    const svg = svgElement('svg', { viewBox: `0 0 ${width} ${height}` });
    svg.classList.add('heatmap-svg');
    const domain = extent(doc.rows.map((row) => row.value));
    const cellWidth = cellArea / buckets;

    doc.rows.forEach((row, rowIndex) => {
      const group = svgElement('g', { transform: `translate(0,${rowIndex * rowHeight})` });
      group.classList.add('heatmap-row');
      group.dataset.src = row.src;
      group.dataset.dst = row.dst;
      group.dataset.terminal = String(row.terminal);
      const id = edgeId(row.src, row.dst, row.terminal);
      if (this.selection) {
        group.classList.toggle('selected', this.selection.edgeIds.has(id));
        group.classList.toggle('dimmed', !this.selection.edgeIds.has(id));
      }

      const label = svgElement('text', { x: labelWidth - 6, y: rowHeight - 5, 'text-anchor': 'end', 'font-size': 10 });
      label.textContent = rowLabel(row);
      group.appendChild(label);

      const fill = colorForMetric(doc.metric, row.value, domain);
      bucketCells(row.active_iterations, doc.from, doc.to, buckets).forEach((active, cellIndex) => {
        if (!active) return;
        group.appendChild(
          svgElement('rect', {
            x: labelWidth + cellIndex * cellWidth,
            y: 2,
            width: Math.max(cellWidth - 1, 0.75),
            height: rowHeight - 4,
            fill,
            class: 'heatmap-cell',
          }),
        );
      });

      group.addEventListener('click', () => this.callbacks.onSelectRow(row));
      group.addEventListener('mouseenter', () => this.callbacks.onHoverRow(row));
      group.addEventListener('mouseleave', () => this.callbacks.onLeave());
      svg.appendChild(group);
    });
    this.plot.appendChild(svg);
  }
}
