/** Minima-trace figure: two-panel projection of the tracked minima, onto the
 * chip surface (x, y) and height above it (x, z), with optional equipotential
 * contours from field-map slices. */

import { CsvSchemaError, parseCsv, Table } from "./csv.js";
import { autoLevels, gridFromRows, isoSegments } from "./contours.js";
import { axes, el, fmt, makePanel, Panel, polyline, svgDocument } from "./svg.js";

export const TRACE_COLUMNS = ["x_um", "track_id", "y_um", "z_um"];

export interface MinimaTraceOptions {
  title?: string;
  /** field-map CSV text sampled on an (x, y) plane (singleton z). */
  topContours?: string;
  /** field-map CSV text sampled on an (x, z) plane (singleton y). */
  sideContours?: string;
  contourLevels?: number[];
}

const TRACK_COLORS = ["#111111", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];

interface TrackData {
  id: number;
  pts: Array<{ x: number; y: number; z: number }>;
}

function tracks(table: Table): TrackData[] {
  const ix = table.index.get("x_um")!;
  const it = table.index.get("track_id")!;
  const iy = table.index.get("y_um")!;
  const iz = table.index.get("z_um")!;
  const byId = new Map<number, TrackData>();
  for (const r of table.rows) {
    const id = r[it];
    if (!byId.has(id)) byId.set(id, { id, pts: [] });
    byId.get(id)!.pts.push({ x: r[ix], y: r[iy], z: r[iz] });
  }
  const out = [...byId.values()];
  for (const t of out) t.pts.sort((a, b) => a.x - b.x);
  return out.sort((a, b) => a.id - b.id);
}

function contourLayer(
  panel: Panel,
  fieldCsv: string,
  vertical: "y_um" | "z_um",
  levels?: number[],
): string {
  const table = parseCsv(fieldCsv, ["x_um", "y_um", "z_um", "b_gauss"]);
  const singleton = vertical === "y_um" ? "z_um" : "y_um";
  const singles = new Set(table.rows.map((r) => r[table.index.get(singleton)!]));
  if (singles.size !== 1) {
    throw new CsvSchemaError(
      `contour field map must be a plane: expected a single ${singleton} value, got ${singles.size}`,
    );
  }
  const grid = gridFromRows(
    table.rows,
    table.index.get("x_um")!,
    table.index.get(vertical)!,
    table.index.get("b_gauss")!,
  );
  const lvls = levels ?? autoLevels(grid);
  const parts: string[] = [];
  for (const level of lvls) {
    for (const [u1, v1, u2, v2] of isoSegments(grid, level)) {
      parts.push(el("line", {
        x1: panel.x.apply(u1), y1: panel.y.apply(v1),
        x2: panel.x.apply(u2), y2: panel.y.apply(v2),
        stroke: "#999", "stroke-width": 0.6, "stroke-dasharray": "1.5,2.5",
        class: "contour",
      }));
    }
  }
  return parts.join("\n");
}

export function renderMinimaTrace(csvText: string, opts: MinimaTraceOptions = {}): string {
  const table = parseCsv(csvText, TRACE_COLUMNS);
  const trs = tracks(table);
  const allX = trs.flatMap((t) => t.pts.map((p) => p.x));
  const allY = trs.flatMap((t) => t.pts.map((p) => p.y));
  const allZ = trs.flatMap((t) => t.pts.map((p) => p.z));
  const xDom: [number, number] = [Math.min(...allX), Math.max(...allX)];
  const ySpan = Math.max(Math.max(...allY.map(Math.abs)), 1e-9);
  const yDom: [number, number] = [-1.3 * ySpan, 1.3 * ySpan];
  const zDom: [number, number] = [0, 1.15 * Math.max(...allZ)];

  const width = 640;
  const height = 640;
  const top = makePanel(xDom, yDom, 80, 50, width - 120, 240);
  const side = makePanel(xDom, zDom, 80, 360, width - 120, 240);

  const parts: string[] = [];
  if (opts.topContours) {
    parts.push(contourLayer(top, opts.topContours, "y_um", opts.contourLevels));
  }
  if (opts.sideContours) {
    parts.push(contourLayer(side, opts.sideContours, "z_um", opts.contourLevels));
  }
  parts.push(axes(top, "x (um)", "y (um)  [onto surface]"));
  parts.push(axes(side, "x (um)", "z (um)  [above surface]"));

  for (const t of trs) {
    const color = TRACK_COLORS[t.id % TRACK_COLORS.length];
    parts.push(polyline(
      t.pts.map((p) => [top.x.apply(p.x), top.y.apply(p.y)] as [number, number]),
      { stroke: color, "stroke-width": 1.6, class: `track-top track-${fmt(t.id)}` },
    ));
    parts.push(polyline(
      t.pts.map((p) => [side.x.apply(p.x), side.y.apply(p.z)] as [number, number]),
      { stroke: color, "stroke-width": 1.6, class: `track-side track-${fmt(t.id)}` },
    ));
  }

  if (opts.title) {
    parts.push(el("text", {
      x: width / 2, y: 24, "font-size": 14, "text-anchor": "middle", fill: "#111",
    }, opts.title));
  }
  return svgDocument(width, height, parts.join("\n"));
}
