/** Marching-squares iso-lines for the field-map grids. */

export interface GridField {
  u: number[]; // ascending axis values, length nu
  v: number[]; // ascending axis values, length nv
  values: number[][]; // [iu][iv]
}

/**
 * Reshape field-map rows (one row per grid point, outer axis varying
 * slowest) into a 2D grid over the two named coordinate columns.  The third
 * spatial coordinate must be a singleton for a plottable slice.
 */
export function gridFromRows(
  rows: number[][],
  iu: number,
  iv: number,
  ival: number,
): GridField {
  const u = [...new Set(rows.map((r) => r[iu]))].sort((a, b) => a - b);
  const v = [...new Set(rows.map((r) => r[iv]))].sort((a, b) => a - b);
  if (u.length * v.length !== rows.length) {
    throw new Error(
      `field map is not a full ${u.length} x ${v.length} grid over the two axes`,
    );
  }
  const uIndex = new Map(u.map((x, i) => [x, i] as const));
  const vIndex = new Map(v.map((x, i) => [x, i] as const));
  const values: number[][] = u.map(() => new Array(v.length).fill(NaN));
  for (const r of rows) {
    values[uIndex.get(r[iu])!][vIndex.get(r[iv])!] = r[ival];
  }
  return { u, v, values };
}

type Segment = [number, number, number, number]; // u1, v1, u2, v2

/** Line segments of the iso-contour at `level` (marching squares, no linking). */
export function isoSegments(grid: GridField, level: number): Segment[] {
  const segs: Segment[] = [];
  const { u, v, values } = grid;

  const lerp = (a: number, b: number, fa: number, fb: number) =>
    a + ((level - fa) / (fb - fa || 1)) * (b - a);

  for (let i = 0; i < u.length - 1; i++) {
    for (let j = 0; j < v.length - 1; j++) {
      const f00 = values[i][j];
      const f10 = values[i + 1][j];
      const f01 = values[i][j + 1];
      const f11 = values[i + 1][j + 1];
      let caseId = 0;
      if (f00 > level) caseId |= 1;
      if (f10 > level) caseId |= 2;
      if (f11 > level) caseId |= 4;
      if (f01 > level) caseId |= 8;
      if (caseId === 0 || caseId === 15) continue;

      // edge crossing points
      const bottom: [number, number] = [lerp(u[i], u[i + 1], f00, f10), v[j]];
      const top: [number, number] = [lerp(u[i], u[i + 1], f01, f11), v[j + 1]];
      const left: [number, number] = [u[i], lerp(v[j], v[j + 1], f00, f01)];
      const right: [number, number] = [u[i + 1], lerp(v[j], v[j + 1], f10, f11)];

      const add = (a: [number, number], b: [number, number]) =>
        segs.push([a[0], a[1], b[0], b[1]]);

      switch (caseId) {
        case 1: case 14: add(left, bottom); break;
        case 2: case 13: add(bottom, right); break;
        case 3: case 12: add(left, right); break;
        case 4: case 11: add(top, right); break;
        case 6: case 9: add(bottom, top); break;
        case 7: case 8: add(left, top); break;
        case 5: add(left, bottom); add(top, right); break; // saddle cells:
        case 10: add(left, top); add(bottom, right); break; // simple split
      }
    }
  }
  return segs;
}

/** Evenly spaced levels between the grid's value quantiles. */
export function autoLevels(grid: GridField, n = 6): number[] {
  const flat = grid.values.flat().filter((x) => Number.isFinite(x));
  flat.sort((a, b) => a - b);
  const q = (p: number) => flat[Math.min(flat.length - 1, Math.floor(p * flat.length))];
  const lo = q(0.05);
  const hi = q(0.9);
  const levels: number[] = [];
  for (let k = 1; k <= n; k++) {
    levels.push(lo + ((hi - lo) * k) / (n + 1));
  }
  return levels;
}
