/**
 * RFC-4180-style CSV reading with schema checks.
 *
 * The simulator writes comma-separated files with a header row and
 * minimal quoting; numeric cells carry 17 significant digits.
 */

export class SchemaError extends Error {}

export interface Table {
  header: string[];
  rows: string[][];
}

/** Parse CSV text, honoring quoted fields and escaped quotes. */
export function parseCsv(text: string): Table {
  if (text.trim().length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  const rows: string[][] = [];
  let field = "";
  let row: string[] = [];
  let inQuotes = false;
  const pushField = () => {
    row.push(field);
    field = "";
  };
  const pushRow = () => {
    pushField();
    rows.push(row);
    row = [];
  };
  for (let i = 0; i < text.length; i++) {
    const c = text[i];
    if (inQuotes) {
      if (c === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i++;
        } else {
          inQuotes = false;
        }
      } else {
        field += c;
      }
    } else if (c === '"') {
      inQuotes = true;
    } else if (c === ",") {
      pushField();
    } else if (c === "\n") {
      pushRow();
    } else if (c === "\r") {
      if (text[i + 1] === "\n") i++;
      pushRow();
    } else {
      field += c;
    }
  }
  if (field.length > 0 || row.length > 0) pushRow();
  if (inQuotes) throw new SchemaError("unterminated quoted field");
  const header = rows[0];
  const body = rows.slice(1).filter((r) => !(r.length === 1 && r[0] === ""));
  for (const r of body) {
    if (r.length !== header.length) {
      throw new SchemaError(
        `row has ${r.length} fields, header has ${header.length}`
      );
    }
  }
  return { header, rows: body };
}

/** Require columns by name; the error names the first missing one. */
export function requireColumns(table: Table, columns: string[], source = "input"): void {
  for (const col of columns) {
    if (!table.header.includes(col)) {
      throw new SchemaError(`${source}: missing required column '${col}'`);
    }
  }
}

/** Extract one column as numbers; NaN cells are rejected by name. */
export function numericColumn(table: Table, name: string, source = "input"): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`${source}: missing required column '${name}'`);
  }
  return table.rows.map((row, i) => {
    const v = Number(row[idx]);
    if (!Number.isFinite(v)) {
      throw new SchemaError(
        `${source}: column '${name}' row ${i + 1} is not a finite number: '${row[idx]}'`
      );
    }
    return v;
  });
}

/** Column as raw strings (e.g. the per-point error column). */
export function stringColumn(table: Table, name: string, source = "input"): string[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`${source}: missing required column '${name}'`);
  }
  return table.rows.map((row) => row[idx]);
}
