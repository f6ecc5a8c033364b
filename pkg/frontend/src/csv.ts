import Papa from "papaparse";

/** Raised when an input file does not match the expected result schema. */
export class SchemaError extends Error {}

/**
 * A parsed result table: '#'-prefixed metadata lines, the header row, and
 * the data rows (still as strings; numeric conversion is per column).
 */
export interface ResultTable {
  metadata: string[];
  columns: string[];
  rows: string[][];
}

export function parseResultCsv(text: string): ResultTable {
  const lines = text.split(/\r?\n/);
  const metadata = lines
    .filter((line) => line.startsWith("#"))
    .map((line) => line.replace(/^#\s?/, ""));
  const body = lines
    .filter((line) => !line.startsWith("#") && line.trim() !== "")
    .join("\n");
  if (body === "") {
    throw new SchemaError("empty CSV: no header row found");
  }
  const parsed = Papa.parse<string[]>(body, { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`malformed CSV: ${parsed.errors[0].message}`);
  }
  const [columns, ...rows] = parsed.data;
  if (rows.length === 0) {
    throw new SchemaError(
      `empty CSV: header [${columns.join(", ")}] has no data rows`,
    );
  }
  const bad = rows.find((row) => row.length !== columns.length);
  if (bad !== undefined) {
    throw new SchemaError(
      `ragged CSV: expected ${columns.length} fields per row, ` +
        `got ${bad.length} in [${bad.join(", ")}]`,
    );
  }
  return { metadata, columns, rows };
}

/** Index of a required column, or a SchemaError naming what was found. */
export function requireColumn(table: ResultTable, name: string): number {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(
      `missing column "${name}": file has [${table.columns.join(", ")}]`,
    );
  }
  return idx;
}

export function numericColumn(table: ResultTable, index: number): number[] {
  const name = table.columns[index];
  return table.rows.map((row, i) => {
    const value = Number(row[index]);
    if (!Number.isFinite(value)) {
      throw new SchemaError(
        `column "${name}" is not numeric: row ${i + 1} holds "${row[index]}"`,
      );
    }
    return value;
  });
}
