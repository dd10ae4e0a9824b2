/**
 * Parser for the lvglass CSV dialect.
 *
 * Layout produced by the CLI:
 *
 *   # schema=lvglass/<kind>/v1
 *   # key=value                (zero or more, sorted)
 *   col1,col2,...
 *   1.5,0.25,...
 *
 * The raw file text is kept verbatim so figures can embed their source
 * data byte-for-byte.
 */

export interface CsvTable {
  /** exact file content as read, including header comments */
  raw: string;
  /** value of the # schema= line, e.g. "lvglass/frontier/v1" */
  schema: string;
  /** remaining # key=value header lines */
  params: Record<string, string>;
  columns: string[];
  /** row-major numeric cells; inf/-inf/nan parse to the JS equivalents */
  rows: number[][];
}

export class CsvFormatError extends Error {}

function parseCell(cell: string, line: number): number {
  switch (cell) {
    case "inf":
      return Infinity;
    case "-inf":
      return -Infinity;
    case "nan":
      return NaN;
    default: {
      const v = Number(cell);
      if (cell === "" || Number.isNaN(v)) {
        throw new CsvFormatError(`line ${line}: non-numeric cell "${cell}"`);
      }
      return v;
    }
  }
}

export function parseCsv(raw: string): CsvTable {
  const lines = raw.split("\n");
  let i = 0;
  let schema = "";
  const params: Record<string, string> = {};

  for (; i < lines.length && lines[i].startsWith("# "); i++) {
    const body = lines[i].slice(2);
    const eq = body.indexOf("=");
    if (eq < 0) {
      throw new CsvFormatError(`line ${i + 1}: malformed header "${lines[i]}"`);
    }
    const key = body.slice(0, eq);
    const value = body.slice(eq + 1);
    if (i === 0) {
      if (key !== "schema") {
        throw new CsvFormatError('first line must be "# schema=..."');
      }
      schema = value;
    } else {
      params[key] = value;
    }
  }
  if (schema === "") {
    throw new CsvFormatError('first line must be "# schema=..."');
  }
  if (i >= lines.length || lines[i] === "") {
    throw new CsvFormatError("missing column header row");
  }

  const columns = lines[i].split(",");
  i += 1;
  const rows: number[][] = [];
  for (; i < lines.length; i++) {
    if (lines[i] === "") continue; // trailing newline
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new CsvFormatError(
        `line ${i + 1}: expected ${columns.length} cells, got ${cells.length}`,
      );
    }
    rows.push(cells.map((c) => parseCell(c, i + 1)));
  }
  return { raw, schema, params, columns, rows };
}

/** Column values by name; throws if the column is absent. */
export function column(table: CsvTable, name: string): number[] {
  const j = table.columns.indexOf(name);
  if (j < 0) {
    throw new CsvFormatError(
      `missing column "${name}" (have: ${table.columns.join(", ")})`,
    );
  }
  return table.rows.map((r) => r[j]);
}
