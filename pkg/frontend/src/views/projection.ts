/**
 * State-space projection: hex-binned aggregates or a per-sample scatter.
 *
 * Bin fills use the shared ramps — diverging (zero-centered) for odds_score
 * and correlation, sequential for reward and loss; bins without a value stay
 * neutral. Clicking a bin opens its detail panel and emits a bin selection.
 */

import { colorForMetric, isDivergingMetric, NEUTRAL, sequential } from '../color.js';
import { hexPath } from '../hex.js';
import { extent } from '../scale.js';
import { renderSpecSvg, svgElement } from '../render.js';
import type { Selection } from '../state.js';
import type { BinDetailDoc, ProjectionBin, ProjectionDoc, ScatterDoc, ScatterPoint } from '../types.js';

export type ProjectionMetric = 'reward' | 'loss' | 'odds_score' | 'correlation';
export const PROJECTION_METRICS: ProjectionMetric[] = ['reward', 'loss', 'odds_score', 'correlation'];

/** Value of one metric on one bin; null when absent. */
export function binValue(bin: ProjectionBin, metric: ProjectionMetric): number | null {
  switch (metric) {
    case 'reward':
      return bin.mean_reward;
    case 'loss':
      return bin.mean_loss;
    case 'odds_score':
      return bin.odds_score;
    case 'correlation':
      return bin.correlation;
  }
}

export interface Fit {
  /** Data -> pixel, uniform scale with centering. */
  x(v: number): number;
  y(v: number): number;
  scale: number;
}

/** Uniform fit of a data bounding box into a pixel viewport. */
export function fitViewport(
  xs: number[],
  ys: number[],
  width: number,
  height: number,
  pad: number,
): Fit {
  const [x0, x1] = extent(xs);
  const [y0, y1] = extent(ys);
  const spanX = Math.max(x1 - x0, 1e-9);
  const spanY = Math.max(y1 - y0, 1e-9);
  const scale = Math.min((width - 2 * pad) / spanX, (height - 2 * pad) / spanY);
  const offsetX = (width - scale * spanX) / 2;
  const offsetY = (height - scale * spanY) / 2;
  return {
    x: (v) => offsetX + (v - x0) * scale,
    // data y grows upward; pixels grow downward
    y: (v) => height - offsetY - (v - y0) * scale,
    scale,
  };
}

export interface ProjectionCallbacks {
  onBinClick(q: number, r: number): void;
  onModeChange(mode: 'binned' | 'scatter'): void;
  onPointClick(trajectoryId: number): void;
}

export class ProjectionView {
  readonly el: HTMLElement;
  metric: ProjectionMetric = 'reward';
  mode: 'binned' | 'scatter' = 'binned';
  private readonly callbacks: ProjectionCallbacks;
  private readonly plot: HTMLDivElement;
  private readonly detail: HTMLDivElement;
  private doc: ProjectionDoc | ScatterDoc | null = null;
  private overlay: ScatterPoint[] = [];
  private selection: Selection | null = null;

  constructor(container: HTMLElement, callbacks: ProjectionCallbacks) {
    this.callbacks = callbacks;
    this.el = document.createElement('div');
    this.el.className = 'view projection-view';

    const controls = document.createElement('div');
    controls.className = 'controls';
    const metricSelect = document.createElement('select');
    metricSelect.className = 'metric-select';
    for (const metric of PROJECTION_METRICS) {
      const option = document.createElement('option');
      option.value = metric;
      option.textContent = metric;
      metricSelect.appendChild(option);
    }
    metricSelect.addEventListener('change', () => {
      this.metric = metricSelect.value as ProjectionMetric;
      this.render();
    });
    const modeButton = document.createElement('button');
    modeButton.className = 'mode-toggle';
    modeButton.textContent = 'scatter';
    modeButton.addEventListener('click', () => {
      this.mode = this.mode === 'binned' ? 'scatter' : 'binned';
      modeButton.textContent = this.mode === 'binned' ? 'scatter' : 'hexbin';
      this.callbacks.onModeChange(this.mode);
    });
    controls.append(metricSelect, modeButton);

    this.plot = document.createElement('div');
    this.plot.className = 'plot';
    this.detail = document.createElement('div');
    this.detail.className = 'bin-detail';
    this.el.append(controls, this.plot, this.detail);
    container.appendChild(this.el);
  }

  update(doc: ProjectionDoc | ScatterDoc): void {
    this.doc = doc;
    this.overlay = [];
    this.render();
  }

  /** Dots for selected samples, drawn on top of the hexbins. */
  overlaySelected(points: ScatterPoint[]): void {
    this.overlay = points;
    this.render();
  }

  applySelection(selection: Selection | null): void {
    this.selection = selection;
    if (selection === null) this.overlay = [];
    this.render();
  }

  showDetail(detail: BinDetailDoc): void {
    this.detail.replaceChildren();
    const title = document.createElement('h3');
    title.textContent = `bin (${detail.q}, ${detail.r})`;
    const counts = document.createElement('p');
    counts.textContent =
      `${detail.count_samples} samples, ${detail.count_validation} validation states` +
      (detail.mean_reward !== null ? `, mean reward ${detail.mean_reward.toPrecision(4)}` : '');
    this.detail.append(title, counts);

    if (detail.loss_series.length > 0) {
      const width = 220;
      const height = 60;
      const svg = svgElement('svg', { viewBox: `0 0 ${width} ${height}` });
      svg.classList.add('loss-series');
      const [l0, l1] = extent(detail.loss_series.map((p) => p.mean_loss));
      const [i0, i1] = extent(detail.loss_series.map((p) => p.iteration));
      const points = detail.loss_series
        .map((p) => {
          const px = i1 === i0 ? width / 2 : ((p.iteration - i0) / (i1 - i0)) * width;
          const py = l1 === l0 ? height / 2 : height - ((p.mean_loss - l0) / (l1 - l0)) * height;
          return `${px.toFixed(1)},${py.toFixed(1)}`;
        })
        .join(' ');
      const line = svgElement('polyline', { points, fill: 'none', stroke: '#334155', 'stroke-width': 1.5 });
      svg.appendChild(line);
      this.detail.appendChild(svg);
    }

    const histogram = detail.reward_histogram;
    if (histogram.counts.length > 0) {
      const width = 220;
      const height = 48;
      const svg = svgElement('svg', { viewBox: `0 0 ${width} ${height}` });
      svg.classList.add('reward-histogram');
      const max = Math.max(1, ...histogram.counts);
      const barWidth = width / histogram.counts.length;
      histogram.counts.forEach((count, index) => {
        const barHeight = (count / max) * height;
        svg.appendChild(
          svgElement('rect', {
            x: index * barWidth,
            y: height - barHeight,
            width: Math.max(barWidth - 1, 0.5),
            height: barHeight,
            fill: '#64748b',
          }),
        );
      });
      this.detail.appendChild(svg);
    }

    this.detail.appendChild(renderSpecSvg(detail.render, 96));
  }

  clearDetail(): void {
    this.detail.replaceChildren();
  }

  private render(): void {
    this.plot.replaceChildren();
    const doc = this.doc;
    if (!doc) return;
    if (doc.mode === 'binned') this.renderBinned(doc);
    else this.renderScatter(doc);
  }

  private renderBinned(doc: ProjectionDoc): void {
    const width = 460;
    const height = 400;
    if (doc.bins.length === 0) {
      const empty = document.createElement('div');
      empty.className = 'empty-state';
      empty.textContent = 'no samples in this iteration range';
      this.plot.appendChild(empty);
      return;
    }
    const fit = fitViewport(
      doc.bins.map((b) => b.center[0]),
      doc.bins.map((b) => b.center[1]),
      width,
      height,
      24, // px
    );
    const svg = svgElement('svg', { viewBox: `0 0 ${width} ${height}` });
    svg.classList.add('projection-svg');
    const values = doc.bins
      .map((bin) => binValue(bin, this.metric))
      .filter((v): v is number => v !== null);
    const domain = extent(values);
    for (const bin of doc.bins) {
      const value = binValue(bin, this.metric);
      const cell = svgElement('path', {
        d: hexPath(fit.x(bin.center[0]), fit.y(bin.center[1]), doc.radius * fit.scale),
        fill: value === null ? NEUTRAL : colorForMetric(this.metric, value, domain),
        stroke: '#ffffff',
        'stroke-width': 1,
      });
      cell.classList.add('hex-cell');
      cell.dataset.q = String(bin.q);
      cell.dataset.r = String(bin.r);
      if (value === null) cell.classList.add('absent');
      if (this.selection?.bins.has(`${bin.q},${bin.r}`)) cell.classList.add('selected');
      cell.addEventListener('click', () => this.callbacks.onBinClick(bin.q, bin.r));
      svg.appendChild(cell);
    }
    for (const point of this.overlay) {
      svg.appendChild(
        svgElement('circle', {
          cx: fit.x(point.x),
          cy: fit.y(point.y),
          r: 3,
          fill: '#0f172a',
          class: 'overlay-point',
        }),
      );
    }
    this.plot.appendChild(svg);
    this.renderLegend(domain);
  }

  private renderScatter(doc: ScatterDoc): void {
    const width = 460;
    const height = 400;
    if (doc.points.length === 0) {
      const empty = document.createElement('div');
      empty.className = 'empty-state';
      empty.textContent = 'no samples in this iteration range';
      this.plot.appendChild(empty);
      return;
    }
    const fit = fitViewport(
      doc.points.map((p) => p.x),
      doc.points.map((p) => p.y),
      width,
      height,
      24, // px
    );
    const svg = svgElement('svg', { viewBox: `0 0 ${width} ${height}` });
    svg.classList.add('projection-svg');
    const span = Math.max(1, doc.to - doc.from);
    for (const point of doc.points) {
      const circle = svgElement('circle', {
        cx: fit.x(point.x),
        cy: fit.y(point.y),
        r: 3,
        fill: sequential((point.iteration - doc.from) / span),
      });
      circle.classList.add('scatter-point');
      circle.dataset.trajectoryId = String(point.trajectory_id);
      if (this.selection) {
        const hit = this.selection.projectionIds.has(point.trajectory_id);
        circle.classList.toggle('selected', hit);
        circle.classList.toggle('dimmed', !hit);
      }
      circle.addEventListener('click', () => this.callbacks.onPointClick(point.trajectory_id));
      svg.appendChild(circle);
    }
    this.plot.appendChild(svg);
  }

  private renderLegend(domain: [number, number]): void {
    const legend = document.createElement('div');
    legend.className = 'legend';
    const lo = document.createElement('span');
    const hi = document.createElement('span');
    if (isDivergingMetric(this.metric)) {
      const scale = Math.max(Math.abs(domain[0]), Math.abs(domain[1]));
      lo.textContent = (-scale).toPrecision(3);
      hi.textContent = scale.toPrecision(3);
    } else {
      lo.textContent = domain[0].toPrecision(3);
      hi.textContent = domain[1].toPrecision(3);
    }
    const swatch = document.createElement('span');
    swatch.className = `ramp ${isDivergingMetric(this.metric) ? 'ramp-diverging' : 'ramp-sequential'}`;
    legend.append(lo, swatch, hi);
    this.plot.appendChild(legend);
  }
}
