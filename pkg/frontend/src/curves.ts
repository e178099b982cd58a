import type { CurvePoint, CurveQuery, CurveResponse, ExplorerApi } from './api.js';

// Stable palette: a method keeps its color no matter which subset is drawn.
export const METHOD_COLORS: Record<string, string> = {
  kr: '#1f77b4',
  js: '#7f7f7f',
  'kji-a': '#2ca02c',
  'kji-b': '#98df8a',
  'kji-c': '#17becf',
  'kji-d': '#9edae5',
  'kct-a': '#d62728',
  'kct-b': '#ff9896',
  'kct-c': '#e377c2',
  'kct-d': '#f7b6d2',
  rank: '#8c564b',
  fdp_hat: '#111111',
};

export interface CurveSeries {
  label: string;
  color: string;
  points: CurvePoint[];
}

export interface CurveSet {
  series: CurveSeries[];
  /** Realized-proportion reference line (same for every method). */
  fdpHat: Array<{ i: number; value: number }>;
  maxI: number;
}

export interface MethodSpec {
  label: string;
  query: Omit<CurveQuery, 'session'>;
}

/** Translate a UI method label into a /nested-curve query. */
export function methodQuery(label: string, alpha: number, opts: { planName?: string; k?: number } = {}): MethodSpec {
  const lower = label.toLowerCase();
  if (lower === 'kr') return { label: lower, query: { method: 'kr', alpha } };
  if (lower === 'js') return { label: lower, query: { method: 'js', alpha, k: opts.k ?? 10 } };
  const [head, family] = lower.split('-');
  if (head === 'kji') {
    if (opts.planName) return { label: lower, query: { method: 'kji', alpha, plan: opts.planName } };
    return { label: lower, query: { method: 'kji', alpha, plan: undefined, family: family?.toUpperCase() } };
  }
  if (head === 'kct') {
    return { label: lower, query: { method: 'kct', alpha, family: family?.toUpperCase() } };
  }
  if (head === 'rank') return { label: lower, query: { method: 'rank', alpha } };
  throw new Error(`unknown method label "${label}"`);
}

export async function fetchCurves(
  api: ExplorerApi,
  session: string,
  methods: MethodSpec[],
): Promise<CurveSet> {
  const responses: Array<{ label: string; res: CurveResponse }> = [];
  for (const m of methods) {
    const res = await api.nestedCurve({ ...m.query, session });
    responses.push({ label: m.label, res });
  }
  return buildCurveSet(responses);
}

export function buildCurveSet(responses: Array<{ label: string; res: CurveResponse }>): CurveSet {
  const series = responses.map(({ label, res }) => ({
    label,
    color: METHOD_COLORS[label] ?? '#444444',
    points: res.points,
  }));
  const first = series[0];
  const fdpHat = first ? first.points.map((pt) => ({ i: pt.i, value: pt.fdp_hat })) : [];
  const maxI = first ? first.points.length : 0;
  return { series, fdpHat, maxI };
}

export interface ChartModel {
  width: number;
  height: number;
  pad: number;
  curves: CurveSet;
  xOf(i: number): number;
  yOf(bound: number): number;
  /** Inverse of xOf, clamped to [1, maxI]; used for hover and range-drag. */
  rankAt(x: number): number;
}

export function buildChartModel(curves: CurveSet, width = 640, height = 320): ChartModel {
  const pad = 36;
  const maxI = Math.max(curves.maxI, 1);
  const xOf = (i: number) => pad + ((i - 1) / Math.max(maxI - 1, 1)) * (width - 2 * pad);
  const yOf = (bound: number) => height - pad - Math.min(Math.max(bound, 0), 1) * (height - 2 * pad);
  const rankAt = (x: number) => {
    const raw = 1 + ((x - pad) / (width - 2 * pad)) * (maxI - 1);
    return Math.min(maxI, Math.max(1, Math.round(raw)));
  };
  return { width, height, pad, curves, xOf, yOf, rankAt };
}

export interface HoverInfo {
  i: number;
  setSize: number;
  fdpHat: number;
  perMethod: Array<{ label: string; bound: number; trueDiscoveriesLower: number }>;
}

export function hoverAt(model: ChartModel, i: number): HoverInfo | null {
  const clamped = Math.min(Math.max(i, 1), model.curves.maxI);
  const perMethod = [];
  let setSize = clamped;
  let fdpHat = 0;
  for (const s of model.curves.series) {
    const pt = s.points[clamped - 1];
    if (!pt) continue;
    setSize = pt.set_size;
    fdpHat = pt.fdp_hat;
    perMethod.push({ label: s.label, bound: pt.bound, trueDiscoveriesLower: pt.true_discoveries_lower });
  }
  if (perMethod.length === 0) return null;
  return { i: clamped, setSize, fdpHat, perMethod };
}

function polyline(points: Array<[number, number]>, color: string, dashed = false): string {
  const coords = points.map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`).join(' ');
  const dash = dashed ? ' stroke-dasharray="5,4"' : '';
  return `<polyline fill="none" stroke="${color}" stroke-width="1.6"${dash} points="${coords}" />`;
}

/**
 * Render the bound-versus-rejections chart as an SVG string: one line per
 * method, a dashed realized-proportion reference, axes, and a legend.
 */
export function renderCurvesSVG(model: ChartModel): string {
  const { width, height, pad, curves } = model;
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">`,
  );
  if (curves.maxI === 0) {
    parts.push(
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="empty-state">upload statistics to see bound curves</text>`,
    );
    parts.push('</svg>');
    return parts.join('\n');
  }
  // axes
  parts.push(
    `<line x1="${pad}" y1="${height - pad}" x2="${width - pad}" y2="${height - pad}" stroke="#999" />`,
    `<line x1="${pad}" y1="${pad}" x2="${pad}" y2="${height - pad}" stroke="#999" />`,
    `<text x="${width / 2}" y="${height - 6}" text-anchor="middle" font-size="11">rejections (top-i sets)</text>`,
    `<text x="10" y="${height / 2}" font-size="11" transform="rotate(-90 10 ${height / 2})" text-anchor="middle">FDP bound</text>`,
  );
  for (const tick of [0, 0.25, 0.5, 0.75, 1]) {
    const y = model.yOf(tick);
    parts.push(
      `<line x1="${pad - 3}" y1="${y}" x2="${pad}" y2="${y}" stroke="#999" />`,
      `<text x="${pad - 6}" y="${y + 3.5}" text-anchor="end" font-size="10">${tick}</text>`,
    );
  }
  parts.push(
    polyline(
      curves.fdpHat.map((pt) => [model.xOf(pt.i), model.yOf(pt.value)]),
      METHOD_COLORS.fdp_hat,
      true,
    ),
  );
  for (const s of curves.series) {
    parts.push(polyline(s.points.map((pt) => [model.xOf(pt.i), model.yOf(pt.bound)]), s.color));
  }
  // legend
  let ly = pad;
  for (const s of [...curves.series, { label: 'fdp_hat', color: METHOD_COLORS.fdp_hat }]) {
    parts.push(
      `<line x1="${width - pad - 72}" y1="${ly}" x2="${width - pad - 52}" y2="${ly}" stroke="${s.color}" stroke-width="2" />`,
      `<text x="${width - pad - 46}" y="${ly + 3.5}" font-size="10">${s.label.toUpperCase()}</text>`,
    );
    ly += 14;
  }
  parts.push('</svg>');
  return parts.join('\n');
}
