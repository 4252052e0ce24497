import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";
import { numericColumn, parseCsv } from "../src/csv.js";
import { renderFigure } from "../src/figures.js";
import { main } from "../src/cli.js";

// CSV fixtures produced by the simulator's acceptance run
const ARTIFACTS = join(__dirname, "..", "..", "artifacts");

function attr(svg: string, name: string): number {
  const m = svg.match(new RegExp(`${name}="([^"]+)"`));
  if (!m) throw new Error(`attribute ${name} missing`);
  return Number(m[1]);
}

function extrema(path: string, column: string): [number, number] {
  const vals = numericColumn(parseCsv(readFileSync(path, "utf-8")), column);
  return [Math.min(...vals), Math.max(...vals)];
}

const close = (a: number, b: number) =>
  Math.abs(a - b) <= 1e-6 * Math.max(1, Math.abs(a), Math.abs(b));

describe("acceptance artifacts", () => {
  it("are present (run the simulator acceptance suite first)", () => {
    expect(existsSync(join(ARTIFACTS, "scan_n100.csv"))).toBe(true);
  });

  it("renders the resonance figure with fit overlay and exact axis ranges", () => {
    const input = join(ARTIFACTS, "scan_n100.csv");
    const svg = renderFigure({
      kind: "resonance",
      inputs: [input],
      fitJson: join(ARTIFACTS, "scan_n100.csv.fit.json"),
    });
    expect(svg).toContain("<svg");
    expect(svg).toContain("stroke-dasharray"); // dashed fit curve
    const [xlo, xhi] = extrema(input, "r");
    expect(close(attr(svg, "data-x-min"), xlo)).toBe(true);
    expect(close(attr(svg, "data-x-max"), xhi)).toBe(true);
  });

  it("renders overlaid time series with exact axis ranges", () => {
    const a = join(ARTIFACTS, "timeseries_r1.csv");
    const b = join(ARTIFACTS, "timeseries_r1.00111.csv");
    const svg = renderFigure({ kind: "timeseries", inputs: [a, b] });
    const [, xhi] = extrema(a, "kick_index");
    expect(close(attr(svg, "data-x-max"), xhi)).toBe(true);
    const hi = Math.max(extrema(a, "p2_m2")[1], extrema(b, "p2_m2")[1]);
    expect(close(attr(svg, "data-y-max"), hi)).toBe(true);
  });

  it("renders the diffusion curve with exact axis ranges", () => {
    const input = join(ARTIFACTS, "diffusion_vs_r.csv");
    const svg = renderFigure({ kind: "diffusion_vs_r", inputs: [input] });
    const [ylo, yhi] = extrema(input, "d_quantum_m2");
    expect(close(attr(svg, "data-y-min"), ylo)).toBe(true);
    expect(close(attr(svg, "data-y-max"), yhi)).toBe(true);
  });

  it("renders level dynamics with thick and thin weight classes", () => {
    const input = join(ARTIFACTS, "level_dynamics.csv");
    const svg = renderFigure({ kind: "level_dynamics", inputs: [input] });
    expect(svg).toContain('stroke-width="1.8"'); // thick: weight class 2
    expect(svg).toContain('stroke-width="0.7"'); // thin: weight class 1
    const [xlo, xhi] = extrema(input, "lambda");
    expect(close(attr(svg, "data-x-min"), xlo)).toBe(true);
    expect(close(attr(svg, "data-x-max"), xhi)).toBe(true);
  });

  it("is deterministic: same inputs give identical output", () => {
    const spec = {
      kind: "resonance" as const,
      inputs: [join(ARTIFACTS, "scan_n100.csv")],
    };
    expect(renderFigure(spec)).toBe(renderFigure(spec));
  });
});

describe("error handling", () => {
  it("names the offending column on schema mismatch", () => {
    const dir = mkdtempSync(join(tmpdir(), "figgen-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "r,wrong\n1.0,2.0\n");
    expect(() => renderFigure({ kind: "resonance", inputs: [bad] })).toThrow(
      /missing required column 'p0_mean'/
    );
  });

  it("rejects empty input explicitly", () => {
    const dir = mkdtempSync(join(tmpdir(), "figgen-"));
    const empty = join(dir, "empty.csv");
    writeFileSync(empty, "");
    expect(() => renderFigure({ kind: "timeseries", inputs: [empty] })).toThrow(
      /empty CSV/
    );
  });

  it("cli exits nonzero and writes no partial file on malformed input", () => {
    const dir = mkdtempSync(join(tmpdir(), "figgen-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "kick_index\n1\n2\n"); // p2_m2 missing
    const out = join(dir, "fig.svg");
    const code = main(["--kind", "timeseries", "--input", bad, "--output", out]);
    expect(code).toBe(3);
    expect(existsSync(out)).toBe(false);
  });

  it("cli rejects unknown kinds", () => {
    const code = main(["--kind", "pie", "--input", "x.csv", "--output", "y.svg"]);
    expect(code).toBe(2);
  });

  it("cli renders all four kinds end to end", () => {
    const dir = mkdtempSync(join(tmpdir(), "figgen-"));
    const cases: [string, string[]][] = [
      ["resonance", ["--input", join(ARTIFACTS, "scan_n100.csv"), "--fit", join(ARTIFACTS, "scan_n100.csv.fit.json")]],
      [
        "timeseries",
        [
          "--input",
          join(ARTIFACTS, "timeseries_r1.csv"),
          "--input",
          join(ARTIFACTS, "timeseries_r1.00111.csv"),
        ],
      ],
      ["diffusion_vs_r", ["--input", join(ARTIFACTS, "diffusion_vs_r.csv")]],
      ["level_dynamics", ["--input", join(ARTIFACTS, "level_dynamics.csv")]],
    ];
    for (const [kind, args] of cases) {
      const out = join(dir, `${kind}.svg`);
      const code = main(["--kind", kind, ...args, "--output", out]);
      expect(code, kind).toBe(0);
      const svg = readFileSync(out, "utf-8");
      expect(svg.startsWith("<svg"), kind).toBe(true);
      expect(svg.trimEnd().endsWith("</svg>"), kind).toBe(true);
    }
  });
});
