/**
 * Trajectory-DAG view: pinned nodes as state renders, layered left-to-right
 * by depth, with a per-node handle that aggregates unpinned children.
 *
 * The view is presentation-only: expand/collapse intents are raised through
 * callbacks and the controller feeds back complete session documents.
 */

import { colorForMetric } from '../color.js';
import { extent } from '../scale.js';
import { renderSpecSvg, svgElement } from '../render.js';
import { edgeId } from '../state.js';
import type { Selection } from '../state.js';
import type { ChildrenDoc, DagEdgeDoc, SessionDoc } from '../types.js';

export interface NodePosition {
  x: number;
  y: number;
}

export interface DagLayout {
  positions: Map<string, NodePosition>;
  width: number;
  height: number;
}

const NODE_SIZE = 40; // px render square
const MARGIN = 48; // px

/** Pure layout: columns by depth hint, rows ordered by key within a column. */
export function layoutDag(doc: SessionDoc, width: number, height: number): DagLayout {
  const byDepth = new Map<number, string[]>();
  for (const node of doc.nodes) {
    const column = byDepth.get(node.depth) ?? [];
    column.push(node.key);
    byDepth.set(node.depth, column);
  }
  const depths = [...byDepth.keys()].sort((a, b) => a - b);
  const positions = new Map<string, NodePosition>();
  const innerWidth = Math.max(width - 2 * MARGIN, 1);
  const step = depths.length > 1 ? innerWidth / (depths.length - 1) : 0;
  depths.forEach((depth, columnIndex) => {
    const keys = (byDepth.get(depth) ?? []).sort();
    keys.forEach((key, rowIndex) => {
      positions.set(key, {
        x: MARGIN + (depths.length > 1 ? columnIndex * step : innerWidth / 2),
        y: ((rowIndex + 1) * height) / (keys.length + 1),
      });
    });
  });
  return { positions, width, height };
}

/**
 * Edge stand-in value for the heatmap's current metric. Session edges carry
 * no variance aggregate, so that metric renders edges neutrally.
 */
export function edgeMetricValue(
  edge: DagEdgeDoc,
  metric: string,
  direction: 'forward' | 'backward',
): number | null {
  if (metric === 'frequency') return edge.frequency;
  if (metric === 'probability') {
    return direction === 'forward' ? edge.mean_p_forward : edge.mean_p_backward;
  }
  return null;
}

export interface DagCallbacks {
  onHandleClick(key: string): void;
  onExpand(key: string, child: string): void;
  onCollapse(key: string): void;
  onNodeClick(key: string): void;
}

export class DagView {
  readonly el: HTMLElement;
  private readonly callbacks: DagCallbacks;
  private readonly plot: HTMLDivElement;
  private readonly childrenPanel: HTMLDivElement;
  private doc: SessionDoc | null = null;
  private selection: Selection | null = null;
  private heatmapMetric = 'frequency';
  private direction: 'forward' | 'backward' = 'forward';

  constructor(container: HTMLElement, callbacks: DagCallbacks) {
    this.callbacks = callbacks;
    this.el = document.createElement('div');
    this.el.className = 'view dag-view';
    this.plot = document.createElement('div');
    this.plot.className = 'plot';
    this.childrenPanel = document.createElement('div');
    this.childrenPanel.className = 'children-panel';
    this.el.append(this.plot, this.childrenPanel);
    container.appendChild(this.el);
  }

  update(doc: SessionDoc): void {
    this.doc = doc;
    this.render();
  }

  setEdgeMetric(metric: string, direction: 'forward' | 'backward'): void {
    this.heatmapMetric = metric;
    this.direction = direction;
    this.render();
  }

  applySelection(selection: Selection | null): void {
    this.selection = selection;
    this.render();
  }

  /** Children table for one pinned node; rows expand on click. */
  showChildren(doc: ChildrenDoc): void {
    this.childrenPanel.replaceChildren();
    const title = document.createElement('h3');
    title.textContent = `children of ${doc.key}`;
    const table = document.createElement('table');
    const head = document.createElement('tr');
    for (const column of ['child', 'frequency', 'mean p_f', 'max p_f', 'first iter', 'trajectories']) {
      const th = document.createElement('th');
      th.textContent = column;
      head.appendChild(th);
    }
    table.appendChild(head);
    for (const row of doc.children) {
      const tr = document.createElement('tr');
      tr.className = 'child-row';
      tr.dataset.child = row.key;
      const cells = [
        row.contracted_path.length > 0 ? `${row.key} (via ${row.contracted_path.length})` : row.key,
        String(row.frequency),
        row.mean_p_forward.toPrecision(3),
        row.max_p_forward.toPrecision(3),
        String(row.first_iteration),
        String(row.trajectory_count),
      ];
      for (const text of cells) {
        const td = document.createElement('td');
        td.textContent = text;
        tr.appendChild(td);
      }
      tr.addEventListener('click', () => this.callbacks.onExpand(doc.key, row.key));
      table.appendChild(tr);
    }
    this.childrenPanel.append(title, table);
  }

  clearChildren(): void {
    this.childrenPanel.replaceChildren();
  }

  private render(): void {
    this.plot.replaceChildren();
    const doc = this.doc;
    if (!doc) return;
    const width = 640;
    const height = 380;
    const layout = layoutDag(doc, width, height);
    const svg = svgElement('svg', { viewBox: `0 0 ${width} ${height}` });
    svg.classList.add('dag-svg');

    const values = doc.edges
      .map((edge) => edgeMetricValue(edge, this.heatmapMetric, this.direction))
      .filter((v): v is number => v !== null);
    const domain = extent(values);

    for (const edge of doc.edges) {
      const src = layout.positions.get(edge.src);
      const dst = layout.positions.get(edge.dst);
      if (!src || !dst) continue;
      const value = edgeMetricValue(edge, this.heatmapMetric, this.direction);
      const line = svgElement('line', {
        x1: src.x + NODE_SIZE / 2,
        y1: src.y,
        x2: dst.x - NODE_SIZE / 2,
        y2: dst.y,
        stroke: value === null ? '#94a3b8' : colorForMetric(this.heatmapMetric, value, domain),
        'stroke-width': 2,
      });
      line.classList.add('dag-edge');
      line.dataset.src = edge.src;
      line.dataset.dst = edge.dst;
      if (edge.contracted_path.length > 0) {
        line.setAttribute('stroke-dasharray', '5 3');
        line.dataset.contracted = String(edge.contracted_path.length);
      }
      if (this.selection?.edgeIds.has(edgeId(edge.src, edge.dst, false))) line.classList.add('pinned');
      svg.appendChild(line);
    }

    for (const node of doc.nodes) {
      const position = layout.positions.get(node.key);
      if (!position) continue;
      const group = svgElement('g', {
        transform: `translate(${position.x - NODE_SIZE / 2},${position.y - NODE_SIZE / 2})`,
      });
      group.classList.add('dag-node');
      group.dataset.key = node.key;
      if (this.selection?.pins.some((pin) => pin.keys.includes(node.key))) group.classList.add('pinned');

      const inner = renderSpecSvg(node.render, NODE_SIZE);
      inner.addEventListener('click', () => this.callbacks.onNodeClick(node.key));
      group.appendChild(inner);

      const label = svgElement('text', { x: NODE_SIZE / 2, y: NODE_SIZE + 12, 'text-anchor': 'middle', 'font-size': 10 });
      label.textContent = `${node.key} ·${node.visit_count}`;
      group.appendChild(label);

      const hidden = doc.placeholders[node.key] ?? 0;
      if (hidden > 0) {
        const handle = svgElement('g', { transform: `translate(${NODE_SIZE + 10},${NODE_SIZE / 2})` });
        handle.classList.add('dag-handle');
        handle.dataset.key = node.key;
        handle.appendChild(svgElement('circle', { r: 9, fill: '#e2e8f0', stroke: '#94a3b8' }));
        const text = svgElement('text', { y: 3.5, 'text-anchor': 'middle', 'font-size': 9 });
        text.textContent = `+${hidden}`;
        handle.appendChild(text);
        handle.addEventListener('click', () => this.callbacks.onHandleClick(node.key));
        group.appendChild(handle);
      }

      if (node.key !== doc.root && doc.pinned.includes(node.key)) {
        const collapse = svgElement('g', { transform: `translate(${NODE_SIZE + 10},${-2})` });
        collapse.classList.add('dag-collapse');
        collapse.dataset.key = node.key;
        collapse.appendChild(svgElement('circle', { r: 7, fill: '#fee2e2', stroke: '#fca5a5' }));
        const text = svgElement('text', { y: 3, 'text-anchor': 'middle', 'font-size': 10 });
        text.textContent = '–';
        collapse.appendChild(text);
        collapse.addEventListener('click', () => this.callbacks.onCollapse(node.key));
        group.appendChild(collapse);
      }
      svg.appendChild(group);
    }
    this.plot.appendChild(svg);
  }
}
