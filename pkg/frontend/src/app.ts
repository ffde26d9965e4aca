/**
 * Composition root: builds the page scaffold, wires the four views, the
 * range slider and the linker together, and runs the initial fetch.
 */

import { ApiClient } from './api.js';
import { Linker } from './linker.js';
import { renderSpecSvg } from './render.js';
import { createRangeSlider, SLIDER_DEBOUNCE_MS } from './slider.js';
import { LinkState } from './state.js';
import type { RangeSlider } from './slider.js';
import { DagView } from './views/dag.js';
import { HeatmapView } from './views/heatmap.js';
import { ProjectionView } from './views/projection.js';
import { RankingView } from './views/ranking.js';
import type { RunDoc } from './types.js';

export interface App {
  state: LinkState;
  linker: Linker;
  slider: RangeSlider;
  views: Linker['views'];
  el: HTMLElement;
}

/** Read the API base URL from the page; empty string means same-origin. */
export function readApiBase(doc: Document): string {
  const meta = doc.querySelector<HTMLMetaElement>('meta[name="gflowstate-api"]');
  return meta?.content ?? '';
}

export function createApp(
  root: HTMLElement,
  api: ApiClient,
  run: RunDoc,
  options: { debounceMs?: number; sessionId?: string } = {},
): App {
  const state = new LinkState([run.iteration_lo, run.iteration_hi]);

  const el = document.createElement('div');
  el.className = 'app';
  const header = document.createElement('header');
  const title = document.createElement('h1');
  title.textContent = `gflowstate — ${run.env} run, ${run.iterations} iterations`;
  header.appendChild(title);

  const clear = document.createElement('button');
  clear.className = 'clear-selection';
  clear.textContent = 'clear selection';
  clear.addEventListener('click', () => state.clearSelection());
  header.appendChild(clear);

  const sliderHost = document.createElement('div');
  sliderHost.className = 'slider-host';
  header.appendChild(sliderHost);

  const grid = document.createElement('div');
  grid.className = 'view-grid';
  const panes = {
    ranking: document.createElement('section'),
    projection: document.createElement('section'),
    dag: document.createElement('section'),
    heatmap: document.createElement('section'),
  };
  for (const [name, pane] of Object.entries(panes)) {
    pane.className = `pane pane-${name}`;
    const heading = document.createElement('h2');
    heading.textContent = name;
    pane.appendChild(heading);
    grid.appendChild(pane);
  }
  el.append(header, grid);
  root.appendChild(el);

  const tooltip = document.createElement('div');
  tooltip.className = 'tooltip hidden';
  el.appendChild(tooltip);
  const renderCache = new Map<string, Promise<ReturnType<typeof renderSpecSvg>>>();
  const showTooltip = (key: string, x: number, y: number) => {
    let pending = renderCache.get(key);
    if (!pending) {
      pending = api.renderState(key).then((doc) => renderSpecSvg(doc.render, 72));
      renderCache.set(key, pending);
    }
    void pending.then((svg) => {
      tooltip.replaceChildren(svg.cloneNode(true));
      const label = document.createElement('div');
      label.textContent = key;
      tooltip.appendChild(label);
      tooltip.style.left = `${x + 12}px`;
      tooltip.style.top = `${y + 12}px`;
      tooltip.classList.remove('hidden');
    });
  };
  const hideTooltip = () => tooltip.classList.add('hidden');

  // views raise intents; the linker owns every API interaction
  let linker: Linker;
  const views = {
    ranking: new RankingView(panes.ranking, {
      onSelectKey: (key) => void linker.selectRankedKey(key),
      onHoverKey: showTooltip,
      onLeave: hideTooltip,
    }),
    projection: new ProjectionView(panes.projection, {
      onBinClick: (q, r) => void linker.selectBin(q, r),
      onModeChange: () => void linker.refetchProjection(),
      onPointClick: (trajectoryId) => void linker.selectSamples([trajectoryId]),
    }),
    dag: new DagView(panes.dag, {
      onHandleClick: (key) => void linker.showChildren(key),
      onExpand: (key, child) => void linker.expand(key, child),
      onCollapse: (key) => void linker.collapse(key),
      onNodeClick: (key) => void linker.selectNode(key),
    }),
    heatmap: new HeatmapView(panes.heatmap, {
      onSelectRow: (row) => void linker.selectEdges([{ src: row.src, dst: row.dst, terminal: row.terminal }]),
      onHoverRow: (row) => void linker.hoverTransition(row),
      onLeave: () => views.heatmap.clearHover(),
      onMetricChange: (metric) => state.setHeatmapMetric(metric),
      onDirectionChange: (direction) => state.setDirection(direction),
    }),
  };
  linker = new Linker(api, state, views, { sessionId: options.sessionId });

  const slider = createRangeSlider(
    sliderHost,
    state.bounds,
    (range) => state.setRange(range[0], range[1]),
    options.debounceMs ?? SLIDER_DEBOUNCE_MS,
  );

  return { state, linker, slider, views, el };
}

/** Fetch the run and boot the workbench into `root`. */
export async function boot(root: HTMLElement, apiBase: string): Promise<App> {
  const api = new ApiClient(apiBase);
  const run = await api.run();
  const app = createApp(root, api, run);
  await app.linker.refetchAll();
  return app;
}
