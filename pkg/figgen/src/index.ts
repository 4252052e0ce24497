export { parseCsv, requireColumns, numericColumn, stringColumn, SchemaError } from "./csv.js";
export { renderChart } from "./svg.js";
export type { ChartSpec, Series } from "./svg.js";
export { renderFigure } from "./figures.js";
export type { FigureKind, FigureSpec } from "./figures.js";
export { main } from "./cli.js";
