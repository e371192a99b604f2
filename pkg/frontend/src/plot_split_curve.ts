/** Figure script: switching curve SVG from a split-curve CSV. */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { parseArgs } from "./args.js";
import { renderSplitCurve } from "./splitCurve.js";

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs(argv);
    const svg = renderSplitCurve(readFileSync(args.inPath, "utf-8"), {
      title: args.title,
    });
    mkdirSync(dirname(args.outPath), { recursive: true });
    writeFileSync(args.outPath, svg, "utf-8");
  } catch (err) {
    console.error(`plot-split-curve: ${(err as Error).message}`);
    return 1;
  }
  console.log(args.outPath);
  return 0;
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
