/** Shared --in/--out/--title flag parsing for the figure scripts. */

export interface CliArgs {
  inPath: string;
  outPath: string;
  title?: string;
  extra: Map<string, string>;
}

export function parseArgs(argv: string[], extraFlags: string[] = []): CliArgs {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (!a.startsWith("--")) {
      throw new Error(`unexpected argument: ${a}`);
    }
    const eq = a.indexOf("=");
    if (eq >= 0) {
      flags.set(a.slice(2, eq), a.slice(eq + 1));
    } else {
      const value = argv[i + 1];
      if (value === undefined) throw new Error(`flag ${a} needs a value`);
      flags.set(a.slice(2), value);
      i++;
    }
  }
  const known = new Set(["in", "out", "title", ...extraFlags]);
  for (const key of flags.keys()) {
    if (!known.has(key)) throw new Error(`unknown flag --${key}`);
  }
  const inPath = flags.get("in");
  const outPath = flags.get("out");
  if (!inPath || !outPath) throw new Error("both --in and --out are required");
  return { inPath, outPath, title: flags.get("title"), extra: flags };
}
