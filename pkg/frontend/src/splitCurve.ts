/** Switching-curve figure: left/right fractions vs current fraction, with
 * binomial error bars. Consumes the split-curve CSV schema. */

import { parseCsv } from "./csv.js";
import { axes, el, makePanel, polyline, svgDocument } from "./svg.js";

export const SPLIT_CURVE_COLUMNS = [
  "fraction",
  "n_left",
  "n_right",
  "n_back",
  "n_lost",
  "left_frac",
  "err",
];

export interface SplitCurveOptions {
  title?: string;
}

export function renderSplitCurve(csvText: string, opts: SplitCurveOptions = {}): string {
  const table = parseCsv(csvText, SPLIT_CURVE_COLUMNS);
  const iFrac = table.index.get("fraction")!;
  const iLeft = table.index.get("left_frac")!;
  const iErr = table.index.get("err")!;

  const pts = table.rows
    .map((r) => ({ f: r[iFrac], left: r[iLeft], err: r[iErr] }))
    .filter((p) => Number.isFinite(p.left))
    .sort((a, b) => a.f - b.f);

  const width = 560;
  const height = 420;
  const panel = makePanel([0, 1], [0, 1], 70, 50, width - 100, height - 110);
  const parts: string[] = [];

  parts.push(axes(panel, "left-arm current fraction", "output population fraction"));
  // 50/50 guide line
  parts.push(
    el("line", {
      x1: panel.x.apply(0), y1: panel.y.apply(0.5),
      x2: panel.x.apply(1), y2: panel.y.apply(0.5),
      stroke: "#bbb", "stroke-dasharray": "2,3", "stroke-width": 1,
    }),
  );

  const series = [
    { key: "left", color: "#1f77b4", marker: "circle", pick: (p: { left: number }) => p.left },
    { key: "right", color: "#d62728", marker: "square", pick: (p: { left: number }) => 1 - p.left },
  ];
  for (const s of series) {
    const line = pts.map(
      (p) => [panel.x.apply(p.f), panel.y.apply(s.pick(p))] as [number, number],
    );
    parts.push(polyline(line, { stroke: s.color, "stroke-width": 1.2 }));
    for (const p of pts) {
      const cx = panel.x.apply(p.f);
      const val = s.pick(p);
      const cy = panel.y.apply(val);
      if (Number.isFinite(p.err) && p.err > 0) {
        const yLo = panel.y.apply(Math.max(0, val - p.err));
        const yHi = panel.y.apply(Math.min(1, val + p.err));
        parts.push(el("line", {
          x1: cx, y1: yLo, x2: cx, y2: yHi, stroke: s.color, "stroke-width": 1,
          class: "errorbar",
        }));
        for (const yy of [yLo, yHi]) {
          parts.push(el("line", {
            x1: cx - 3, y1: yy, x2: cx + 3, y2: yy, stroke: s.color, "stroke-width": 1,
          }));
        }
      }
      if (s.marker === "circle") {
        parts.push(el("circle", { cx, cy, r: 3, fill: s.color, class: "pt-left" }));
      } else {
        parts.push(el("rect", {
          x: cx - 3, y: cy - 3, width: 6, height: 6,
          fill: "white", stroke: s.color, "stroke-width": 1.2, class: "pt-right",
        }));
      }
    }
  }

  // legend
  const lx = panel.left + panel.width - 130;
  parts.push(el("circle", { cx: lx, cy: 62, r: 3, fill: "#1f77b4" }));
  parts.push(el("text", { x: lx + 8, y: 66, "font-size": 11, fill: "#333" }, "left arm"));
  parts.push(el("rect", {
    x: lx - 3, y: 77, width: 6, height: 6, fill: "white",
    stroke: "#d62728", "stroke-width": 1.2,
  }));
  parts.push(el("text", { x: lx + 8, y: 84, "font-size": 11, fill: "#333" }, "right arm"));

  if (opts.title) {
    parts.push(el("text", {
      x: width / 2, y: 24, "font-size": 14, "text-anchor": "middle", fill: "#111",
    }, opts.title));
  }
  return svgDocument(width, height, parts.join("\n"));
}
