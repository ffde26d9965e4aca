/**
 * Tiny renderer for environment-provided {@link RenderSpec} payloads.
 *
 * grid_highlight marks explicit cells; grid_density shades keys by count.
 * Unknown kinds degrade to a labeled box so new environments stay visible.
 */

import { sequential } from './color.js';
import type { RenderSpec } from './types.js';

export const SVG_NS = 'http://www.w3.org/2000/svg';

export function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [name, value] of Object.entries(attrs)) el.setAttribute(name, String(value));
  return el;
}

/** Render a spec into an SVG of the given pixel size. */
export function renderSpecSvg(spec: RenderSpec, size = 64): SVGSVGElement {
  const svg = svgElement('svg', { width: size, height: size, viewBox: `0 0 ${size} ${size}` });
  svg.classList.add('state-render');
  const height = spec.payload.height;
  if ((spec.kind === 'grid_highlight' || spec.kind === 'grid_density') && height > 0) {
    const cell = size / height;
    const fills = new Map<string, number>();
    if (spec.kind === 'grid_highlight') {
      for (const [x, y] of spec.payload.cells ?? []) fills.set(`${x},${y}`, 1);
    } else {
      const counts = spec.payload.counts ?? {};
      const max = Math.max(1, ...Object.values(counts));
      for (const [key, count] of Object.entries(counts)) fills.set(key, count / max);
    }
    for (let y = 0; y < height; y += 1) {
      for (let x = 0; x < height; x += 1) {
        const weight = fills.get(`${x},${y}`);
        const rect = svgElement('rect', {
          x: x * cell,
          // grid y grows upward; screen y grows downward
          y: (height - 1 - y) * cell,
          width: cell,
          height: cell,
          fill: weight === undefined ? '#ffffff' : sequential(weight),
          stroke: '#cbd5e1',
          'stroke-width': 0.5,
        });
        if (weight !== undefined) rect.dataset.key = `${x},${y}`;
        svg.appendChild(rect);
      }
    }
    return svg;
  }
  const box = svgElement('rect', { x: 0, y: 0, width: size, height: size, fill: '#f1f5f9' });
  const label = svgElement('text', { x: size / 2, y: size / 2, 'text-anchor': 'middle', 'font-size': 10 });
  label.textContent = spec.kind;
  svg.append(box, label);
  return svg;
}
