import { beforeEach, describe, expect, it, vi } from 'vitest';

import { normalizeResolve } from '../src/state.js';
import { DagView, edgeMetricValue, layoutDag } from '../src/views/dag.js';
import { makeChildren, makeExpandedSession, makeResolveEdges, makeRootSession } from './fixtures.js';

function mount() {
  const host = document.createElement('div');
  document.body.appendChild(host);
  const onHandleClick = vi.fn();
  const onExpand = vi.fn();
  const onCollapse = vi.fn();
  const onNodeClick = vi.fn();
  const view = new DagView(host, { onHandleClick, onExpand, onCollapse, onNodeClick });
  return { host, view, onHandleClick, onExpand, onCollapse, onNodeClick };
}

beforeEach(() => {
  document.body.replaceChildren();
});

describe('layoutDag', () => {
  it('layers nodes left-to-right by depth hint', () => {
    const layout = layoutDag(makeExpandedSession(0, 9), 640, 380);
    const root = layout.positions.get('0,0')!;
    const child = layout.positions.get('1,0')!;
    expect(root.x).toBeLessThan(child.x);
  });

  it('spreads same-depth nodes vertically', () => {
    const doc = makeExpandedSession(0, 9);
    doc.nodes.push({ ...doc.nodes[1]!, key: '0,1' });
    const layout = layoutDag(doc, 640, 380);
    const a = layout.positions.get('0,1')!;
    const b = layout.positions.get('1,0')!;
    expect(a.x).toBe(b.x);
    expect(a.y).not.toBe(b.y);
  });
});

describe('edgeMetricValue', () => {
  const edge = makeExpandedSession(0, 9).edges[0]!;

  it('maps frequency and direction-sensitive probability', () => {
    expect(edgeMetricValue(edge, 'frequency', 'forward')).toBe(22);
    expect(edgeMetricValue(edge, 'probability', 'forward')).toBe(0.35);
    expect(edgeMetricValue(edge, 'probability', 'backward')).toBe(1.0);
  });

  it('has no edge aggregate for variance', () => {
    expect(edgeMetricValue(edge, 'variance', 'forward')).toBeNull();
  });
});

describe('DagView', () => {
  it('renders the root with an aggregated-children handle', () => {
    const { host, view } = mount();
    view.update(makeRootSession(0, 9));
    expect(host.querySelectorAll('g.dag-node')).toHaveLength(1);
    const handle = host.querySelector('g.dag-handle[data-key="0,0"]')!;
    expect(handle.querySelector('text')?.textContent).toBe('+2');
  });

  it('draws edges between pinned nodes after expansion', () => {
    const { host, view } = mount();
    view.update(makeExpandedSession(0, 9));
    expect(host.querySelectorAll('g.dag-node')).toHaveLength(2);
    const edge = host.querySelector('line.dag-edge')!;
    expect(edge.getAttribute('data-src')).toBe('0,0');
    expect(edge.getAttribute('data-dst')).toBe('1,0');
  });

  it('dashes contracted edges', () => {
    const { host, view } = mount();
    const doc = makeExpandedSession(0, 9);
    doc.edges[0]!.contracted_path = ['0,1'];
    view.update(doc);
    const edge = host.querySelector('line.dag-edge')!;
    expect(edge.getAttribute('stroke-dasharray')).toBe('5 3');
    expect(edge.getAttribute('data-contracted')).toBe('1');
  });

  it('raises handle, node, expand and collapse intents', () => {
    const { host, view, onHandleClick, onNodeClick, onExpand, onCollapse } = mount();
    view.update(makeExpandedSession(0, 9));
    host.querySelector('g.dag-handle[data-key="1,0"]')!.dispatchEvent(new MouseEvent('click', { bubbles: true }));
    expect(onHandleClick).toHaveBeenCalledWith('1,0');
    host.querySelector('g.dag-node[data-key="0,0"] svg')!.dispatchEvent(new MouseEvent('click', { bubbles: true }));
    expect(onNodeClick).toHaveBeenCalledWith('0,0');
    view.showChildren(makeChildren('0,0', 0, 9));
    host.querySelector('tr.child-row[data-child="0,1"]')!.dispatchEvent(new MouseEvent('click', { bubbles: true }));
    expect(onExpand).toHaveBeenCalledWith('0,0', '0,1');
    host.querySelector('g.dag-collapse[data-key="1,0"]')!.dispatchEvent(new MouseEvent('click', { bubbles: true }));
    expect(onCollapse).toHaveBeenCalledWith('1,0');
  });

  it('never offers collapse on the root', () => {
    const { host, view } = mount();
    view.update(makeExpandedSession(0, 9));
    expect(host.querySelector('g.dag-collapse[data-key="0,0"]')).toBeNull();
    expect(host.querySelector('g.dag-collapse[data-key="1,0"]')).not.toBeNull();
  });

  it('lists children with contraction hints', () => {
    const { host, view } = mount();
    view.update(makeRootSession(0, 9));
    view.showChildren(makeChildren('0,0', 0, 9));
    const rows = host.querySelectorAll('tr.child-row');
    expect(rows).toHaveLength(2);
    expect(rows[1]!.querySelector('td')?.textContent).toBe('0,1 (via 1)');
  });

  it('recolors edges when the heatmap metric changes', () => {
    const { host, view } = mount();
    view.update(makeExpandedSession(0, 9));
    const before = host.querySelector('line.dag-edge')!.getAttribute('stroke');
    view.setEdgeMetric('variance', 'forward');
    const after = host.querySelector('line.dag-edge')!.getAttribute('stroke');
    expect(before).not.toBe(after);
    expect(after).toBe('#94a3b8'); // neutral: no per-edge variance aggregate
  });

  it('marks nodes and edges on selection pin paths', () => {
    const { host, view } = mount();
    view.update(makeExpandedSession(0, 9));
    view.applySelection(normalizeResolve(makeResolveEdges(0, 9)));
    expect(host.querySelector('g.dag-node[data-key="0,0"]')!.classList.contains('pinned')).toBe(true);
    expect(host.querySelector('g.dag-node[data-key="1,0"]')!.classList.contains('pinned')).toBe(true);
    expect(host.querySelector('line.dag-edge')!.classList.contains('pinned')).toBe(true);
    view.applySelection(null);
    expect(host.querySelector('.pinned')).toBeNull();
  });
});
