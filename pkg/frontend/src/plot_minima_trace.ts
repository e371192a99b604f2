/** Figure script: two-panel minima-trace SVG, optional equipotential overlays. */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { parseArgs } from "./args.js";
import { renderMinimaTrace } from "./minimaTrace.js";

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs(argv, ["contours-top", "contours-side"]);
    const topPath = args.extra.get("contours-top");
    const sidePath = args.extra.get("contours-side");
    const svg = renderMinimaTrace(readFileSync(args.inPath, "utf-8"), {
      title: args.title,
      topContours: topPath ? readFileSync(topPath, "utf-8") : undefined,
      sideContours: sidePath ? readFileSync(sidePath, "utf-8") : undefined,
    });
    mkdirSync(dirname(args.outPath), { recursive: true });
    writeFileSync(args.outPath, svg, "utf-8");
  } catch (err) {
    console.error(`plot-minima-trace: ${(err as Error).message}`);
    return 1;
  }
  console.log(args.outPath);
  return 0;
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
