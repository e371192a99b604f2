import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { CsvSchemaError } from "../src/csv.js";
import { main } from "../src/plot_split_curve.js";
import { renderSplitCurve } from "../src/splitCurve.js";

const EXAMPLE = readFileSync(join(__dirname, "..", "examples", "split_curve.csv"), "utf-8");

describe("renderSplitCurve", () => {
  it("renders both arm series with error bars from the shipped example", () => {
    const svg = renderSplitCurve(EXAMPLE, { title: "switching curve" });
    expect(svg).toContain("<svg");
    expect(svg).toContain("switching curve");
    const nRows = EXAMPLE.trim().split("\n").length - 1;
    const leftPts = (svg.match(/class="pt-left"/g) ?? []).length;
    const rightPts = (svg.match(/class="pt-right"/g) ?? []).length;
    expect(leftPts).toBe(nRows);
    expect(rightPts).toBe(nRows);
    expect((svg.match(/class="errorbar"/g) ?? []).length).toBeGreaterThan(0);
  });

  it("is monotone in pixel space for a monotone curve", () => {
    const csv = [
      "fraction,n_left,n_right,n_back,n_lost,left_frac,err",
      "0,0,90,5,5,0,0",
      "0.5,45,45,5,5,0.5,0.05",
      "1,90,0,5,5,1,0",
    ].join("\n");
    const svg = renderSplitCurve(csv);
    const ys = [...svg.matchAll(/<circle cx="[^"]+" cy="([^"]+)" r="3"/g)].map((m) =>
      Number(m[1]),
    );
    // svg y axis points down: growing fraction means decreasing pixel y
    const pts = ys.slice(0, 3);
    expect(pts[0]).toBeGreaterThan(pts[1]);
    expect(pts[1]).toBeGreaterThan(pts[2]);
  });

  it("rejects a CSV with a missing column", () => {
    const bad = "fraction,n_left\n0.5,10";
    expect(() => renderSplitCurve(bad)).toThrow(CsvSchemaError);
    expect(() => renderSplitCurve(bad)).toThrow(/missing column/);
  });

  it("rejects an empty CSV instead of drawing an empty figure", () => {
    const headerOnly = "fraction,n_left,n_right,n_back,n_lost,left_frac,err\n";
    expect(() => renderSplitCurve(headerOnly)).toThrow(/no data rows/);
    expect(() => renderSplitCurve("")).toThrow(/empty CSV/);
  });
});

describe("plot-split-curve CLI", () => {
  it("writes an SVG file from --in to --out", () => {
    const dir = mkdtempSync(join(tmpdir(), "figs-"));
    const out = join(dir, "sub", "curve.svg");
    const rc = main(["--in", join(__dirname, "..", "examples", "split_curve.csv"), "--out", out]);
    expect(rc).toBe(0);
    expect(readFileSync(out, "utf-8")).toContain("</svg>");
  });

  it("fails with a nonzero exit code on schema errors", () => {
    const dir = mkdtempSync(join(tmpdir(), "figs-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "a,b\n1,2\n");
    expect(main(["--in", bad, "--out", join(dir, "x.svg")])).toBe(1);
  });

  it("rejects unknown flags", () => {
    expect(main(["--in", "x", "--out", "y", "--bogus", "1"])).toBe(1);
  });
});
