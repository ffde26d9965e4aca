/** Minimal linear scale helpers for positioning marks. */

export interface LinearScale {
  (x: number): number;
  domain: [number, number];
  range: [number, number];
}

/**
 * Affine map from a data domain onto a pixel range.
 *
 * A degenerate domain (lo === hi) maps every input to the range midpoint so
 * single-valued data still renders.
 */
export function linearScale(domain: [number, number], range: [number, number]): LinearScale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0;
  const fn = ((x: number) => (span === 0 ? (r0 + r1) / 2 : r0 + ((x - d0) / span) * (r1 - r0))) as LinearScale;
  fn.domain = domain;
  fn.range = range;
  return fn;
}

/** [min, max] of a numeric sequence; [0, 1] when empty. */
export function extent(values: Iterable<number>): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return lo <= hi ? [lo, hi] : [0, 1];
}

/** Clamp x into [lo, hi]. */
export function clamp(x: number, lo: number, hi: number): number {
  return Math.min(Math.max(x, lo), hi);
}
