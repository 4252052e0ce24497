import { describe, expect, it } from "vitest";
import { numericColumn, parseCsv, requireColumns, SchemaError } from "../src/csv.js";

describe("parseCsv", () => {
  it("parses a plain table", () => {
    const t = parseCsv("a,b\n1,2\n3,4\n");
    expect(t.header).toEqual(["a", "b"]);
    expect(t.rows).toEqual([
      ["1", "2"],
      ["3", "4"],
    ]);
  });

  it("handles quoted fields with commas and escaped quotes", () => {
    const t = parseCsv('a,b\n"x,y","he said ""hi"""\n');
    expect(t.rows[0]).toEqual(["x,y", 'he said "hi"']);
  });

  it("handles CRLF line endings", () => {
    const t = parseCsv("a,b\r\n1,2\r\n");
    expect(t.rows).toEqual([["1", "2"]]);
  });

  it("rejects empty input", () => {
    expect(() => parseCsv("")).toThrow(SchemaError);
  });

  it("rejects ragged rows", () => {
    expect(() => parseCsv("a,b\n1\n")).toThrow(/fields/);
  });
});

describe("columns", () => {
  it("names the missing column", () => {
    const t = parseCsv("a,b\n1,2\n");
    expect(() => requireColumns(t, ["zzz"], "f.csv")).toThrow(
      /f\.csv: missing required column 'zzz'/
    );
  });

  it("rejects non-numeric cells by column and row", () => {
    const t = parseCsv("a\nx\n");
    expect(() => numericColumn(t, "a", "f.csv")).toThrow(/row 1/);
  });

  it("reads 17-digit doubles exactly", () => {
    const t = parseCsv("a\n2.8874577334871352\n");
    expect(numericColumn(t, "a")[0]).toBe(2.8874577334871352);
  });
});
