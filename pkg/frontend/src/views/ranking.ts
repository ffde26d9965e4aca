/**
 * Sample rankings as a bump chart: one line per distinct terminal object,
 * x = frame iteration, y = rank. Line color encodes the iteration at which
 * the object first entered the ranking, on the shared sequential ramp.
 */

import { sequential } from '../color.js';
import { linearScale } from '../scale.js';
import { svgElement } from '../render.js';
import type { Selection } from '../state.js';
import type { RankingDoc, RankingFrame } from '../types.js';

export interface RankPoint {
  x: number;
  y: number;
  iteration: number;
  rank: number;
  value: number;
}

export interface RankLine {
  key: string;
  firstRanked: number;
  /** One slot per frame; null where the key is unranked. */
  points: (RankPoint | null)[];
}

export interface RankingLayout {
  lines: RankLine[];
  frames: RankingFrame[];
  width: number;
  height: number;
}

const MARGIN = { top: 14, right: 110, bottom: 22, left: 34 }; // px

/** Pure layout: pixel positions for every key across frames. */
export function layoutRanking(doc: RankingDoc, width: number, height: number): RankingLayout {
  const frames = doc.frames;
  const maxRank = Math.max(1, ...frames.flatMap((f) => f.entries.map((e) => e.rank)));
  const x = linearScale([0, Math.max(1, frames.length - 1)], [MARGIN.left, width - MARGIN.right]);
  const y = linearScale([1, maxRank], [MARGIN.top, height - MARGIN.bottom]);

  const byKey = new Map<string, RankLine>();
  frames.forEach((frame, index) => {
    for (const entry of frame.entries) {
      let line = byKey.get(entry.key);
      if (!line) {
        line = { key: entry.key, firstRanked: entry.first_ranked_iteration, points: frames.map(() => null) };
        byKey.set(entry.key, line);
      }
      line.points[index] = {
        x: x(index),
        y: y(entry.rank),
        iteration: frame.iteration,
        rank: entry.rank,
        value: entry.value,
      };
    }
  });
  return { lines: [...byKey.values()], frames, width, height };
}

/** Path with `M` restarts across unranked gaps. */
export function linePath(points: (RankPoint | null)[]): string {
  const parts: string[] = [];
  let pen = false;
  for (const point of points) {
    if (point === null) {
      pen = false;
      continue;
    }
    parts.push(`${pen ? 'L' : 'M'}${point.x.toFixed(1)},${point.y.toFixed(1)}`);
    pen = true;
  }
  return parts.join('');
}

export interface RankingCallbacks {
  onSelectKey(key: string): void;
  onHoverKey(key: string, clientX: number, clientY: number): void;
  onLeave(): void;
}

export class RankingView {
  readonly el: HTMLElement;
  private readonly callbacks: RankingCallbacks;
  private doc: RankingDoc | null = null;
  private selection: Selection | null = null;

  constructor(container: HTMLElement, callbacks: RankingCallbacks) {
    this.el = document.createElement('div');
    this.el.className = 'view ranking-view';
    container.appendChild(this.el);
    this.callbacks = callbacks;
  }

  update(doc: RankingDoc): void {
    this.doc = doc;
    this.render();
  }

  applySelection(selection: Selection | null): void {
    this.selection = selection;
    this.render();
  }

  private render(): void {
    this.el.replaceChildren();
    const doc = this.doc;
    if (!doc) return;
    if (doc.frames.every((frame) => frame.entries.length === 0)) {
      const empty = document.createElement('div');
      empty.className = 'empty-state';
      empty.textContent = 'no ranked samples in this iteration range';
      this.el.appendChild(empty);
      return;
    }
    const width = 760;
    const height = 340;
    const layout = layoutRanking(doc, width, height);
    const svg = svgElement('svg', { viewBox: `0 0 ${width} ${height}` });
    svg.classList.add('ranking-svg');

    // color by first appearance within the requested range
    const span = Math.max(1, doc.to - doc.from);
    for (const line of layout.lines) {
      const color = sequential((line.firstRanked - doc.from) / span);
      const group = svgElement('g');
      group.classList.add('rank-line');
      group.dataset.key = line.key;

      const path = svgElement('path', {
        d: linePath(line.points),
        fill: 'none',
        stroke: color,
        'stroke-width': 2,
      });
      group.appendChild(path);
      for (const point of line.points) {
        if (!point) continue;
        group.appendChild(svgElement('circle', { cx: point.x, cy: point.y, r: 3, fill: color }));
      }
      const last = [...line.points].reverse().find((p) => p !== null);
      if (last) {
        const label = svgElement('text', { x: last.x + 8, y: last.y + 4, 'font-size': 11, fill: '#334155' });
        label.textContent = line.key;
        group.appendChild(label);
      }
      group.addEventListener('click', () => this.callbacks.onSelectKey(line.key));
      group.addEventListener('mousemove', (event) =>
        this.callbacks.onHoverKey(line.key, event.clientX, event.clientY),
      );
      group.addEventListener('mouseleave', () => this.callbacks.onLeave());
      svg.appendChild(group);
    }

    if (this.selection) {
      for (const group of svg.querySelectorAll<SVGGElement>('g.rank-line')) {
        const key = group.dataset.key ?? '';
        group.classList.toggle('selected', this.selection.rankingKeys.has(key));
        group.classList.toggle('dimmed', !this.selection.rankingKeys.has(key));
      }
    }
    this.el.appendChild(svg);
  }
}
