#!/usr/bin/env node
/**
 * dkrotor-figgen — render simulator CSV output to SVG.
 *
 * Usage:
 *   dkrotor-figgen --kind resonance --input scan.csv [--fit scan.csv.fit.json] --output fig.svg
 *   dkrotor-figgen --kind timeseries --input a.csv --input b.csv [--log-y] --output fig.svg
 *   dkrotor-figgen --kind diffusion_vs_r --input dvr.csv --output fig.svg
 *   dkrotor-figgen --kind level_dynamics --input tracks.csv --output fig.svg
 *
 * The SVG is built fully in memory and written once, so a failing run
 * never leaves a partial file behind.
 */

import { writeFileSync } from "fs";
import { FigureKind, FigureSpec, renderFigure } from "./figures.js";
import { SchemaError } from "./csv.js";

const KINDS: FigureKind[] = [
  "resonance",
  "timeseries",
  "diffusion_vs_r",
  "level_dynamics",
];

function parseArgs(argv: string[]): FigureSpec & { output: string } {
  let kind: string | undefined;
  let output: string | undefined;
  let fitJson: string | undefined;
  let logY = false;
  const inputs: string[] = [];
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    switch (a) {
      case "--kind":
        kind = argv[++i];
        break;
      case "--input":
        inputs.push(argv[++i]);
        break;
      case "--fit":
        fitJson = argv[++i];
        break;
      case "--output":
        output = argv[++i];
        break;
      case "--log-y":
        logY = true;
        break;
      default:
        throw new Error(`unknown argument '${a}'`);
    }
  }
  if (!kind || !KINDS.includes(kind as FigureKind)) {
    throw new Error(`--kind must be one of ${KINDS.join(", ")}`);
  }
  if (inputs.length === 0) throw new Error("at least one --input is required");
  if (!output) throw new Error("--output is required");
  return { kind: kind as FigureKind, inputs, fitJson, logY, output };
}

export function main(argv: string[]): number {
  let spec: FigureSpec & { output: string };
  try {
    spec = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const svg = renderFigure(spec);
    writeFileSync(spec.output, svg);
    console.log(`wrote ${spec.output}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 3;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && /cli\.(js|ts)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
