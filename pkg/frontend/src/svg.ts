/**
 * Minimal deterministic SVG line-chart renderer.
 *
 * No timestamps, random ids, or environment-dependent output: the same
 * series always produce byte-identical SVG.
 */

export interface Series {
  name: string;
  x: number[];
  y: number[];
  /** Dash pattern, e.g. "5,3"; solid when omitted. */
  dash?: string;
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  /** Draw a dotted horizontal guide at this y value (e.g. g2 = 1). */
  guideY?: number;
}

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { top: 40, right: 160, bottom: 50, left: 65 };
const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

function fmt(value: number): string {
  if (value === 0) return "0";
  const s = value.toPrecision(6);
  return s.includes(".") && !s.includes("e")
    ? s.replace(/\.?0+$/, "")
    : s;
}

/** Round tick positions covering [lo, hi] at a 1/2/5 step. */
function ticks(lo: number, hi: number, count = 6): number[] {
  if (lo === hi) return [lo];
  const raw = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= raw)!;
  const out: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + step / 1e9; t += step) {
    out.push(Math.abs(t) < step / 1e9 ? 0 : t);
  }
  return out;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

export function renderChart(series: Series[], opts: ChartOptions): string {
  const [x0, x1] = extent(series.flatMap((s) => s.x));
  let [y0, y1] = extent(series.flatMap((s) => s.y));
  if (opts.guideY !== undefined) {
    y0 = Math.min(y0, opts.guideY);
    y1 = Math.max(y1, opts.guideY);
  }
  const pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const sx = (x: number) => MARGIN.left + ((x - x0) / (x1 - x0)) * plotW;
  const sy = (y: number) => MARGIN.top + plotH - ((y - y0) / (y1 - y0)) * plotH;

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
      `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
      `font-family="sans-serif" font-size="12">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    `<text x="${MARGIN.left + plotW / 2}" y="22" text-anchor="middle" ` +
      `font-size="15">${opts.title}</text>`,
  ];

  // axes and ticks
  const axis = `stroke="black" stroke-width="1"`;
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" ` +
      `x2="${MARGIN.left + plotW}" y2="${MARGIN.top + plotH}" ${axis}/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" ` +
      `y2="${MARGIN.top + plotH}" ${axis}/>`,
  );
  for (const t of ticks(x0, x1)) {
    const px = fmt(sx(t));
    parts.push(
      `<line x1="${px}" y1="${MARGIN.top + plotH}" x2="${px}" ` +
        `y2="${MARGIN.top + plotH + 5}" ${axis}/>`,
      `<text x="${px}" y="${MARGIN.top + plotH + 18}" ` +
        `text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  for (const t of ticks(y0, y1)) {
    const py = fmt(sy(t));
    parts.push(
      `<line x1="${MARGIN.left - 5}" y1="${py}" x2="${MARGIN.left}" ` +
        `y2="${py}" ${axis}/>`,
      `<text x="${MARGIN.left - 8}" y="${py}" text-anchor="end" ` +
        `dominant-baseline="middle">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 12}" ` +
      `text-anchor="middle">${opts.xLabel}</text>`,
    `<text x="18" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 18 ${MARGIN.top + plotH / 2})">` +
      `${opts.yLabel}</text>`,
  );

  if (opts.guideY !== undefined) {
    const py = fmt(sy(opts.guideY));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${py}" x2="${MARGIN.left + plotW}" ` +
        `y2="${py}" stroke="#999999" stroke-width="1" ` +
        `stroke-dasharray="2,4"/>`,
    );
  }

  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = s.x
      .map((x, j) => `${fmt(sx(x))},${fmt(sy(s.y[j]))}`)
      .join(" ");
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" ` +
        `stroke-width="1.5"${dash}/>`,
    );
    const ly = MARGIN.top + 14 + 18 * i;
    parts.push(
      `<line x1="${MARGIN.left + plotW + 10}" y1="${ly - 4}" ` +
        `x2="${MARGIN.left + plotW + 34}" y2="${ly - 4}" ` +
        `stroke="${color}" stroke-width="1.5"${dash}/>`,
      `<text x="${MARGIN.left + plotW + 40}" y="${ly}">${s.name}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
