/** Hand-rolled SVG assembly: scales, axes and shape primitives. */

export function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function el(
  tag: string,
  attrs: Record<string, string | number>,
  body = "",
): string {
  const a = Object.entries(attrs)
    .map(([k, v]) => `${k}="${typeof v === "number" ? fmt(v) : esc(v)}"`)
    .join(" ");
  return body === "" ? `<${tag} ${a}/>` : `<${tag} ${a}>${body}</${tag}>`;
}

export function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toPrecision(6).replace(/\.?0+$/, "");
}

export class LinearScale {
  constructor(
    readonly d0: number,
    readonly d1: number,
    readonly r0: number,
    readonly r1: number,
  ) {}

  apply(v: number): number {
    const t = (v - this.d0) / (this.d1 - this.d0 || 1);
    return this.r0 + t * (this.r1 - this.r0);
  }
}

/** Round tick positions covering [lo, hi] at a 1/2/5 step. */
export function niceTicks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const raw = span / Math.max(n - 1, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm >= 5 ? 10 : norm >= 2.5 ? 5 : norm >= 1.5 ? 2 : 1) * mag;
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-9 * span; v += step) {
    ticks.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return ticks;
}

export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 10000 || a < 0.001) return v.toExponential(1);
  return String(Number(v.toPrecision(4)));
}

export interface Panel {
  x: LinearScale;
  y: LinearScale;
  left: number;
  top: number;
  width: number;
  height: number;
}

export function makePanel(
  xDomain: [number, number],
  yDomain: [number, number],
  left: number,
  top: number,
  width: number,
  height: number,
): Panel {
  return {
    x: new LinearScale(xDomain[0], xDomain[1], left, left + width),
    y: new LinearScale(yDomain[0], yDomain[1], top + height, top), // y up
    left,
    top,
    width,
    height,
  };
}

export function axes(p: Panel, xLabel: string, yLabel: string): string {
  const parts: string[] = [];
  parts.push(
    el("rect", {
      x: p.left, y: p.top, width: p.width, height: p.height,
      fill: "none", stroke: "#333", "stroke-width": 1,
    }),
  );
  for (const t of niceTicks(p.x.d0, p.x.d1)) {
    const px = p.x.apply(t);
    parts.push(el("line", {
      x1: px, y1: p.top + p.height, x2: px, y2: p.top + p.height + 4,
      stroke: "#333", "stroke-width": 1,
    }));
    parts.push(el("text", {
      x: px, y: p.top + p.height + 16, "font-size": 10,
      "text-anchor": "middle", fill: "#333",
    }, esc(tickLabel(t))));
  }
  for (const t of niceTicks(p.y.d0, p.y.d1)) {
    const py = p.y.apply(t);
    parts.push(el("line", {
      x1: p.left - 4, y1: py, x2: p.left, y2: py,
      stroke: "#333", "stroke-width": 1,
    }));
    parts.push(el("text", {
      x: p.left - 6, y: py + 3, "font-size": 10,
      "text-anchor": "end", fill: "#333",
    }, esc(tickLabel(t))));
  }
  parts.push(el("text", {
    x: p.left + p.width / 2, y: p.top + p.height + 32,
    "font-size": 11, "text-anchor": "middle", fill: "#333",
  }, esc(xLabel)));
  parts.push(el("text", {
    x: p.left - 40, y: p.top + p.height / 2, "font-size": 11,
    "text-anchor": "middle", fill: "#333",
    transform: `rotate(-90 ${fmt(p.left - 40)} ${fmt(p.top + p.height / 2)})`,
  }, esc(yLabel)));
  return parts.join("\n");
}

export function polyline(
  pts: Array<[number, number]>,
  attrs: Record<string, string | number>,
): string {
  const d = pts.map((pt) => `${fmt(pt[0])},${fmt(pt[1])}`).join(" ");
  return el("polyline", { points: d, fill: "none", ...attrs });
}

export function svgDocument(width: number, height: number, body: string): string {
  return [
    '<?xml version="1.0" encoding="UTF-8"?>',
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    el("rect", { x: 0, y: 0, width, height, fill: "white" }),
    body,
    "</svg>",
  ].join("\n");
}
