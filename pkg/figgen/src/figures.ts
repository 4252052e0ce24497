/**
 * The four figure kinds rendered from simulator CSV output.
 *
 *   resonance      — zero-momentum population vs period ratio, with the
 *                    fitted lineshape overlaid as a dashed curve
 *   timeseries     — <p^2> vs kick number, one curve per input file
 *   diffusion_vs_r — residual quantum diffusion constant vs period ratio
 *   level_dynamics — eigenphases vs phase offset; tracks drawn thick
 *                    (weight class 2), thin (class 1) or not at all
 *
 * Rendering never reinterprets data: axis ranges are the data extrema.
 */

import { readFileSync } from "fs";
import { basename } from "path";
import { numericColumn, parseCsv, requireColumns, SchemaError, Table } from "./csv.js";
import { renderChart, Series } from "./svg.js";

export type FigureKind =
  | "resonance"
  | "timeseries"
  | "diffusion_vs_r"
  | "level_dynamics";

export interface FigureSpec {
  kind: FigureKind;
  inputs: string[];
  fitJson?: string;
  logY?: boolean;
}

interface LineshapeFitReport {
  p2_dl: number;
  d_cl: number;
  lambda_scale: number;
  amplitude: number;
  N: number;
  converged: boolean;
}

const PALETTE = ["#1347a4", "#c0392b", "#1e8449", "#8e44ad", "#b7950b", "#2c3e50"];

function loadTable(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new SchemaError(`cannot read ${path}: ${(err as Error).message}`);
  }
  try {
    return parseCsv(text);
  } catch (err) {
    if (err instanceof SchemaError) {
      throw new SchemaError(`${path}: ${err.message}`);
    }
    throw err;
  }
}

export function renderFigure(spec: FigureSpec): string {
  switch (spec.kind) {
    case "resonance":
      return renderResonance(spec);
    case "timeseries":
      return renderTimeseries(spec);
    case "diffusion_vs_r":
      return renderDiffusion(spec);
    case "level_dynamics":
      return renderLevelDynamics(spec);
    default:
      throw new SchemaError(`unknown figure kind '${spec.kind as string}'`);
  }
}

// ── resonance ──────────────────────────────────────────────────────────

function renderResonance(spec: FigureSpec): string {
  if (spec.inputs.length !== 1) {
    throw new SchemaError("resonance takes exactly one scan CSV");
  }
  const table = loadTable(spec.inputs[0]);
  requireColumns(table, ["r", "p0_mean"], spec.inputs[0]);
  const r = numericColumn(table, "r", spec.inputs[0]);
  const p0 = numericColumn(table, "p0_mean", spec.inputs[0]);
  const series: Series[] = [
    { x: r, y: p0, color: PALETTE[0], label: "measured", points: true },
  ];
  if (spec.fitJson) {
    const fit = JSON.parse(readFileSync(spec.fitJson, "utf-8")) as LineshapeFitReport;
    if (fit.converged) {
      const y = r.map((ri) => {
        const x = Math.abs(ri - 1.0);
        const p2 = fit.p2_dl + (fit.d_cl * x * fit.N) / (x + fit.lambda_scale);
        return fit.amplitude / Math.sqrt(p2);
      });
      series.push({ x: r, y, color: PALETTE[1], label: "lineshape fit", dash: "6,4" });
    }
  }
  return renderChart({
    title: "Zero-momentum population vs period ratio",
    xLabel: "period ratio r",
    yLabel: "P(p = 0)",
    series,
  });
}

// ── timeseries ─────────────────────────────────────────────────────────

function renderTimeseries(spec: FigureSpec): string {
  if (spec.inputs.length < 1) {
    throw new SchemaError("timeseries needs at least one CSV");
  }
  const series: Series[] = spec.inputs.map((path, i) => {
    const table = loadTable(path);
    requireColumns(table, ["kick_index", "p2_m2"], path);
    return {
      x: numericColumn(table, "kick_index", path),
      y: numericColumn(table, "p2_m2", path),
      color: PALETTE[i % PALETTE.length],
      label: basename(path).replace(/\.csv$/, ""),
    };
  });
  return renderChart({
    title: "Momentum spread vs kick number",
    xLabel: "double-kick period",
    yLabel: "<p^2> (lattice units)",
    series,
    logY: spec.logY,
  });
}

// ── diffusion_vs_r ─────────────────────────────────────────────────────

function renderDiffusion(spec: FigureSpec): string {
  if (spec.inputs.length !== 1) {
    throw new SchemaError("diffusion_vs_r takes exactly one CSV");
  }
  const table = loadTable(spec.inputs[0]);
  requireColumns(table, ["r", "d_quantum_m2"], spec.inputs[0]);
  return renderChart({
    title: "Residual quantum diffusion vs period ratio",
    xLabel: "period ratio r",
    yLabel: "D_quantum (lattice units / period)",
    series: [
      {
        x: numericColumn(table, "r", spec.inputs[0]),
        y: numericColumn(table, "d_quantum_m2", spec.inputs[0]),
        color: PALETTE[0],
        points: true,
      },
    ],
  });
}

// ── level_dynamics ─────────────────────────────────────────────────────

function renderLevelDynamics(spec: FigureSpec): string {
  if (spec.inputs.length !== 1) {
    throw new SchemaError("level_dynamics takes exactly one tracks CSV");
  }
  const path = spec.inputs[0];
  const table = loadTable(path);
  requireColumns(
    table,
    ["lambda", "track_id", "eigenphase", "weight_class"],
    path
  );
  const lambda = numericColumn(table, "lambda", path);
  const trackId = numericColumn(table, "track_id", path);
  const phase = numericColumn(table, "eigenphase", path);
  const wclass = numericColumn(table, "weight_class", path);

  // group rows by track, then split into segments: drop points below the
  // thin threshold and break on branch-cut jumps of the phase
  const byTrack = new Map<number, { lam: number; eps: number; cls: number }[]>();
  for (let i = 0; i < lambda.length; i++) {
    const rec = { lam: lambda[i], eps: phase[i], cls: wclass[i] };
    const list = byTrack.get(trackId[i]);
    if (list) list.push(rec);
    else byTrack.set(trackId[i], [rec]);
  }
  const series: Series[] = [];
  for (const [, rows] of [...byTrack.entries()].sort((a, b) => a[0] - b[0])) {
    rows.sort((a, b) => a.lam - b.lam);
    let seg: { lam: number; eps: number; cls: number }[] = [];
    const flush = () => {
      if (seg.length >= 2) {
        const thick = seg.some((p) => p.cls >= 2);
        series.push({
          x: seg.map((p) => p.lam),
          y: seg.map((p) => p.eps),
          color: thick ? "#111111" : "#888888",
          width: thick ? 1.8 : 0.7,
        });
      }
      seg = [];
    };
    for (let i = 0; i < rows.length; i++) {
      const p = rows[i];
      if (p.cls < 1) {
        flush();
        continue;
      }
      if (seg.length > 0 && Math.abs(p.eps - seg[seg.length - 1].eps) > Math.PI) {
        flush(); // eigenphase wrapped around the circle
      }
      seg.push(p);
    }
    flush();
  }
  if (series.length === 0) {
    throw new SchemaError(`${path}: no tracks above the weight threshold to draw`);
  }
  return renderChart({
    title: "Floquet eigenphases vs phase offset",
    xLabel: "phase offset",
    yLabel: "eigenphase",
    series,
  });
}
