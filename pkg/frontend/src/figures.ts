import {
  numericColumn,
  parseResultCsv,
  requireColumn,
  ResultTable,
  SchemaError,
} from "./csv.js";
import { renderChart, Series } from "./svg.js";

export type FigureKind = "distribution" | "sweep" | "g2-family";

export const FIGURE_KINDS: FigureKind[] = [
  "distribution",
  "sweep",
  "g2-family",
];

function experimentTitle(table: ResultTable, fallback: string): string {
  const line = table.metadata.find((m) => m.startsWith("experiment:"));
  return line ? line.slice("experiment:".length).trim() : fallback;
}

/** Split rows into one (x, y) series per distinct value of a label column. */
function groupByLabel(
  table: ResultTable,
  labelIdx: number,
  xIdx: number,
  yIdx: number,
): Series[] {
  const x = numericColumn(table, xIdx);
  const y = numericColumn(table, yIdx);
  const series = new Map<string, Series>();
  table.rows.forEach((row, i) => {
    const label = row[labelIdx];
    let s = series.get(label);
    if (s === undefined) {
      s = { name: label, x: [], y: [] };
      series.set(label, s);
    }
    s.x.push(x[i]);
    s.y.push(y[i]);
  });
  return [...series.values()];
}

/** Photon-number distributions: column "n" plus one series per method. */
function distributionSeries(table: ResultTable): Series[] {
  const nIdx = requireColumn(table, "n");
  const rest = table.columns.filter((_, i) => i !== nIdx);
  if (rest.length === 0) {
    throw new SchemaError(
      `no distribution columns next to "n": file has ` +
        `[${table.columns.join(", ")}]`,
    );
  }
  const n = numericColumn(table, nIdx);
  return rest.map((name) => ({
    name,
    x: n,
    y: numericColumn(table, requireColumn(table, name)),
  }));
}

/**
 * Parameter sweeps.  Long format has a leading "label" column and exactly
 * one x and one y column; wide format has an x column followed by one or
 * more numeric series named by their headers.
 */
function sweepSeries(table: ResultTable): Series[] {
  if (table.columns[0] === "label") {
    if (table.columns.length !== 3) {
      throw new SchemaError(
        `labeled sweep needs [label, x, y] columns: file has ` +
          `[${table.columns.join(", ")}]`,
      );
    }
    return groupByLabel(table, 0, 1, 2);
  }
  if (table.columns.length < 2) {
    throw new SchemaError(
      `sweep needs an x column plus at least one series: file has ` +
        `[${table.columns.join(", ")}]`,
    );
  }
  const x = numericColumn(table, 0);
  return table.columns
    .slice(1)
    .map((name, i) => ({ name, x, y: numericColumn(table, i + 1) }));
}

/**
 * Intensity-correlation curves.  Requires "tau" and "g2" columns, accepts
 * an optional leading "label" column (one curve per label) and an optional
 * "g2_regression" column drawn dashed alongside each estimate.
 */
function g2FamilySeries(table: ResultTable): Series[] {
  const tauIdx = requireColumn(table, "tau");
  const g2Idx = requireColumn(table, "g2");
  const regIdx = table.columns.indexOf("g2_regression");
  const labelIdx = table.columns.indexOf("label");

  if (labelIdx < 0) {
    const tau = numericColumn(table, tauIdx);
    const out: Series[] = [{ name: "g2", x: tau, y: numericColumn(table, g2Idx) }];
    if (regIdx >= 0) {
      out.push({
        name: "g2 (regression)",
        x: tau,
        y: numericColumn(table, regIdx),
        dash: "5,3",
      });
    }
    return out;
  }
  const estimates = groupByLabel(table, labelIdx, tauIdx, g2Idx);
  if (regIdx < 0) return estimates;
  const regression = groupByLabel(table, labelIdx, tauIdx, regIdx).map(
    (s): Series => ({ ...s, name: `${s.name} (regression)`, dash: "5,3" }),
  );
  return [...estimates, ...regression];
}

const BUILDERS: Record<
  FigureKind,
  { build: (t: ResultTable) => Series[]; xLabel: string; yLabel: string;
    guideY?: number }
> = {
  distribution: {
    build: distributionSeries,
    xLabel: "photon number n",
    yLabel: "probability",
  },
  sweep: { build: sweepSeries, xLabel: "sweep parameter", yLabel: "value" },
  "g2-family": {
    build: g2FamilySeries,
    xLabel: "delay tau (units of 1/gamma)",
    yLabel: "g2(tau)",
    guideY: 1.0,
  },
};

/** Render a result CSV (text) of the given figure kind to SVG markup. */
export function renderFigure(kind: FigureKind, csvText: string): string {
  const table = parseResultCsv(csvText);
  const spec = BUILDERS[kind];
  const series = spec.build(table);
  return renderChart(series, {
    title: experimentTitle(table, kind),
    xLabel: kind === "sweep" ? table.columns[table.columns[0] === "label" ? 1 : 0]
      : spec.xLabel,
    yLabel: spec.yLabel,
    guideY: spec.guideY,
  });
}
