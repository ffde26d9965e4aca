/**
 * Pointy-top axial hex geometry, mirroring the server's binning math so bin
 * outlines drawn in the browser sit exactly where the server placed them.
 */

export const SQRT3 = Math.sqrt(3);

export interface HexGrid {
  originX: number;
  originY: number;
  radius: number;
}

/** Data-space center of axial cell (q, r). */
export function hexCenter(q: number, r: number, grid: HexGrid): [number, number] {
  const x = grid.radius * (SQRT3 * q + (SQRT3 / 2) * r) + grid.originX;
  const y = grid.radius * 1.5 * r + grid.originY;
  return [x, y];
}

/**
 * SVG path for a pointy-top hexagon centered at (cx, cy).
 *
 * Vertices sit at 30° + k·60°; the y axis points down as in screen space.
 */
export function hexPath(cx: number, cy: number, radius: number): string {
  const parts: string[] = [];
  for (let k = 0; k < 6; k += 1) {
    const angle = (Math.PI / 180) * (60 * k + 30);
    const x = cx + radius * Math.cos(angle);
    const y = cy + radius * Math.sin(angle);
    parts.push(`${k === 0 ? 'M' : 'L'}${x.toFixed(3)},${y.toFixed(3)}`);
  }
  return parts.join('') + 'Z';
}
