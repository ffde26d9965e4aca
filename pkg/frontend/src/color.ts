/**
 * Project-wide color scales: one sequential ramp and one diverging ramp.
 *
 * The ramps are byte-identical to the ones used by the SVG report writer so a
 * bin rendered in the browser matches the same bin in an exported report.
 * Rounding is half-to-even to agree with the reference implementation.
 */

/** Fill used when a metric is absent (e.g. correlation over a single point). */
export const NEUTRAL = '#e2e8f0';

const SEQ_LO = '#e2e8f0'; // slate-200
const SEQ_HI = '#1d4ed8'; // blue-700
const DIV_MID = '#f8fafc'; // slate-50
const DIV_NEG = '#c2410c'; // orange-700
const DIV_POS = '#1d4ed8'; // blue-700

/** Round half-to-even (banker's rounding) for non-negative inputs. */
export function roundHalfEven(x: number): number {
  const floor = Math.floor(x);
  const frac = x - floor;
  if (frac > 0.5) return floor + 1;
  if (frac < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

function channel(hex: string, offset: number): number {
  return parseInt(hex.slice(offset, offset + 2), 16);
}

/**
 * Linear interpolation between two #rrggbb colors.
 *
 * @param a start color at t = 0
 * @param b end color at t = 1
 * @param t mix fraction, clamped to [0, 1]
 */
export function lerpHex(a: string, b: string, t: number): string {
  const u = Math.min(Math.max(t, 0), 1);
  let out = '#';
  for (const offset of [1, 3, 5]) {
    const av = channel(a, offset);
    const bv = channel(b, offset);
    out += roundHalfEven(av + (bv - av) * u)
      .toString(16)
      .padStart(2, '0');
  }
  return out;
}

/** Sequential ramp for magnitudes; t in [0, 1]. */
export function sequential(t: number): string {
  return lerpHex(SEQ_LO, SEQ_HI, t);
}

/** Diverging ramp centered at zero; t in [-1, 1], negative toward orange. */
export function diverging(t: number): string {
  if (t < 0) return lerpHex(DIV_MID, DIV_NEG, -t);
  return lerpHex(DIV_MID, DIV_POS, t);
}

/** Metrics whose sign is meaningful and which therefore use the diverging ramp. */
const DIVERGING_METRICS = new Set(['odds_score', 'correlation']);

export function isDivergingMetric(metric: string): boolean {
  return DIVERGING_METRICS.has(metric);
}

/**
 * Color for one metric value given the observed value domain.
 *
 * Diverging metrics are centered at zero and scaled by the largest absolute
 * value in the domain; sequential metrics map [min, max] onto the ramp.
 * Absent values (null/undefined/NaN) map to the neutral fill.
 */
export function colorForMetric(
  metric: string,
  value: number | null | undefined,
  domain: [number, number],
): string {
  if (value === null || value === undefined || Number.isNaN(value)) return NEUTRAL;
  if (isDivergingMetric(metric)) {
    const scale = Math.max(Math.abs(domain[0]), Math.abs(domain[1]));
    return diverging(scale > 0 ? value / scale : 0);
  }
  const span = domain[1] - domain[0];
  return sequential(span > 0 ? (value - domain[0]) / span : 0.5);
}
