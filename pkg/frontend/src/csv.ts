/** Minimal CSV reader for the simulator's numeric tables. */

export interface Table {
  columns: string[];
  /** Column name -> column index. */
  index: Map<string, number>;
  rows: number[][];
}

export class CsvSchemaError extends Error {}

/**
 * Parse a simple comma-separated table (no quoting; the producer never quotes).
 * Throws CsvSchemaError naming the first missing required column, and on
 * header-only input: an empty figure is never the right answer.
 */
export function parseCsv(text: string, required: string[]): Table {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new CsvSchemaError("empty CSV: no header row");
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const index = new Map(columns.map((c, i) => [c, i] as const));
  for (const col of required) {
    if (!index.has(col)) {
      throw new CsvSchemaError(
        `missing column "${col}" (header has: ${columns.join(", ")})`,
      );
    }
  }
  if (lines.length === 1) {
    throw new CsvSchemaError("CSV has a header but no data rows");
  }
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new CsvSchemaError(
        `row ${i} has ${cells.length} cells, header has ${columns.length}`,
      );
    }
    rows.push(cells.map((c) => Number(c)));
  }
  return { columns, index, rows };
}

export function column(table: Table, name: string): number[] {
  const i = table.index.get(name);
  if (i === undefined) {
    throw new CsvSchemaError(`missing column "${name}"`);
  }
  return table.rows.map((r) => r[i]);
}
