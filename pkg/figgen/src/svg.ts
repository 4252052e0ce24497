/**
 * Minimal deterministic SVG chart builder.
 *
 * No dependencies, no timestamps, no randomness: a given dataset always
 * produces byte-identical output.  Axis ranges equal the data extrema
 * exactly and are recorded as data-* attributes on the root element so
 * downstream checks can verify them without parsing geometry.
 */

export interface Series {
  x: number[];
  y: number[];
  color: string;
  label?: string;
  width?: number;
  dash?: string; // stroke-dasharray
  points?: boolean; // draw markers instead of/with the line
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  logY?: boolean;
  width?: number;
  height?: number;
}

const MARGIN = { left: 72, right: 16, top: 34, bottom: 46 };

function fmt(v: number): string {
  return Number(v.toPrecision(6)).toString();
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

function ticks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const out: number[] = [];
  for (let i = 0; i < n; i++) out.push(lo + ((hi - lo) * i) / (n - 1));
  return out;
}

export function renderChart(spec: ChartSpec): string {
  const W = spec.width ?? 800;
  const H = spec.height ?? 560;
  const pw = W - MARGIN.left - MARGIN.right;
  const ph = H - MARGIN.top - MARGIN.bottom;

  const allX = spec.series.flatMap((s) => s.x);
  let allY = spec.series.flatMap((s) => s.y);
  if (spec.logY) {
    allY = allY.filter((v) => v > 0);
    if (allY.length === 0) throw new Error("log axis needs positive values");
  }
  if (allX.length === 0) throw new Error("no data to plot");
  const [x0, x1] = extent(allX);
  const [y0, y1] = extent(allY);

  const sx = (v: number) =>
    MARGIN.left + (x1 > x0 ? ((v - x0) / (x1 - x0)) * pw : pw / 2);
  const syLin = (v: number) =>
    MARGIN.top + ph - (y1 > y0 ? ((v - y0) / (y1 - y0)) * ph : ph / 2);
  const syLog = (v: number) => {
    const l0 = Math.log10(y0);
    const l1 = Math.log10(y1);
    return MARGIN.top + ph - (l1 > l0 ? ((Math.log10(v) - l0) / (l1 - l0)) * ph : ph / 2);
  };
  const sy = spec.logY ? syLog : syLin;

  let s = `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}"`;
  s += ` data-x-min="${fmt(x0)}" data-x-max="${fmt(x1)}"`;
  s += ` data-y-min="${fmt(y0)}" data-y-max="${fmt(y1)}"`;
  s += ` font-family="Helvetica, Arial, sans-serif">\n`;
  s += `<rect width="${W}" height="${H}" fill="white"/>\n`;
  s += `<text x="${W / 2}" y="20" text-anchor="middle" font-size="15">${spec.title}</text>\n`;

  // frame
  s += `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${pw}" height="${ph}" fill="none" stroke="#222" stroke-width="1"/>\n`;

  // x ticks
  for (const t of ticks(x0, x1)) {
    const x = sx(t);
    s += `<line x1="${x.toFixed(2)}" y1="${MARGIN.top + ph}" x2="${x.toFixed(2)}" y2="${MARGIN.top + ph + 5}" stroke="#222"/>\n`;
    s += `<text x="${x.toFixed(2)}" y="${MARGIN.top + ph + 20}" text-anchor="middle" font-size="11">${fmt(t)}</text>\n`;
  }
  // y ticks
  const yTicks = spec.logY
    ? logTicks(y0, y1)
    : ticks(y0, y1);
  for (const t of yTicks) {
    const y = sy(t);
    s += `<line x1="${MARGIN.left - 5}" y1="${y.toFixed(2)}" x2="${MARGIN.left}" y2="${y.toFixed(2)}" stroke="#222"/>\n`;
    s += `<text x="${MARGIN.left - 8}" y="${(y + 4).toFixed(2)}" text-anchor="end" font-size="11">${fmt(t)}</text>\n`;
  }

  s += `<text x="${MARGIN.left + pw / 2}" y="${H - 8}" text-anchor="middle" font-size="13">${spec.xLabel}</text>\n`;
  s += `<text x="18" y="${MARGIN.top + ph / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 ${MARGIN.top + ph / 2})">${spec.yLabel}</text>\n`;

  for (const series of spec.series) {
    const pts: string[] = [];
    for (let i = 0; i < series.x.length; i++) {
      if (spec.logY && !(series.y[i] > 0)) {
        if (pts.length > 1) s += polyline(pts, series);
        pts.length = 0;
        continue;
      }
      pts.push(`${sx(series.x[i]).toFixed(2)},${sy(series.y[i]).toFixed(2)}`);
    }
    if (pts.length > 1) s += polyline(pts, series);
    if (series.points) {
      for (let i = 0; i < series.x.length; i++) {
        if (spec.logY && !(series.y[i] > 0)) continue;
        s += `<circle cx="${sx(series.x[i]).toFixed(2)}" cy="${sy(series.y[i]).toFixed(2)}" r="2.2" fill="${series.color}"/>\n`;
      }
    }
  }

  // legend
  let ly = MARGIN.top + 14;
  for (const series of spec.series) {
    if (!series.label) continue;
    const lx = MARGIN.left + pw - 150;
    s += `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 26}" y2="${ly - 4}" stroke="${series.color}" stroke-width="${series.width ?? 1.4}"${series.dash ? ` stroke-dasharray="${series.dash}"` : ""}/>\n`;
    s += `<text x="${lx + 32}" y="${ly}" font-size="11">${series.label}</text>\n`;
    ly += 16;
  }
  s += `</svg>\n`;
  return s;
}

function polyline(pts: string[], series: Series): string {
  const dash = series.dash ? ` stroke-dasharray="${series.dash}"` : "";
  return `<polyline fill="none" stroke="${series.color}" stroke-width="${series.width ?? 1.4}"${dash} points="${pts.join(" ")}"/>\n`;
}

function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  const d0 = Math.ceil(Math.log10(lo));
  const d1 = Math.floor(Math.log10(hi));
  out.push(lo);
  for (let d = d0; d <= d1; d++) {
    const v = Math.pow(10, d);
    if (v > lo && v < hi) out.push(v);
  }
  out.push(hi);
  return out;
}
