/**
 * Figure renderers for lvglass CLI outputs.
 *
 * Four kinds:
 *   frontier        realizability frontier curve from the frontier CSV
 *   sde-trace       observable time series + their long-run averages
 *   fe-trend        free energy vs system size against the saddle value
 *   parisi-measure  bar chart of an optimized overlap measure
 *
 * Renderers never recompute mathematics; everything drawn comes from the
 * input files. Each figure embeds its inputs verbatim in a metadata block.
 */

import { z } from "zod";

import { CsvTable, column, parseCsv } from "./csv.js";
import {
  FreeEnergyReport,
  ParisiOptReport,
  SdeSummary,
  firstIssue,
  freeEnergySchema,
  parisiOptSchema,
  sdeSummarySchema,
} from "./schemas.js";
import {
  EmbeddedSource,
  HEIGHT,
  MARGIN,
  Scale,
  WIDTH,
  axes,
  document,
  escapeXml,
  linearScale,
  padded,
  polyline,
} from "./svg.js";

export const KINDS = ["frontier", "sde-trace", "fe-trend", "parisi-measure"] as const;
export type Kind = (typeof KINDS)[number];

export interface PlotSpec {
  kind: Kind;
  /** input files, already read; path retained for the metadata block */
  inputs: EmbeddedSource[];
}

export class ValidationError extends Error {}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function plotScales(
  xDomain: [number, number],
  yDomain: [number, number],
): { xs: Scale; ys: Scale } {
  return {
    xs: linearScale(xDomain, [MARGIN.left, WIDTH - MARGIN.right]),
    ys: linearScale(yDomain, [HEIGHT - MARGIN.bottom, MARGIN.top]),
  };
}

function parseJsonInput<T>(
  source: EmbeddedSource,
  schema: z.ZodType<T>,
): T {
  let obj: unknown;
  try {
    obj = JSON.parse(source.content);
  } catch {
    throw new ValidationError(`${source.path}: not valid JSON`);
  }
  const res = schema.safeParse(obj);
  if (!res.success) {
    throw new ValidationError(`${source.path}: ${firstIssue(res.error)}`);
  }
  return res.data;
}

function csvInput(source: EmbeddedSource, wantSchema: string): CsvTable {
  const table = parseCsv(source.content);
  if (table.schema !== wantSchema) {
    throw new ValidationError(
      `${source.path}: schema: expected ${wantSchema}, got ${table.schema}`,
    );
  }
  return table;
}

function splitByExtension(inputs: EmbeddedSource[]): {
  csvs: EmbeddedSource[];
  jsons: EmbeddedSource[];
} {
  const csvs = inputs.filter((s) => s.path.endsWith(".csv"));
  const jsons = inputs.filter((s) => s.path.endsWith(".json"));
  if (csvs.length + jsons.length !== inputs.length) {
    const odd = inputs.find(
      (s) => !s.path.endsWith(".csv") && !s.path.endsWith(".json"),
    );
    throw new ValidationError(`${odd!.path}: expected a .csv or .json input`);
  }
  return { csvs, jsons };
}

// ---------------------------------------------------------------------------
// frontier

const ANCHORS: Array<{ alpha: number; kappa: number; label: string }> = [
  { alpha: 0, kappa: Math.SQRT1_2, label: "(0, 1/√2)" },
  { alpha: 1, kappa: 0, label: "(1, 0)" },
];

function renderFrontier(spec: PlotSpec): string {
  if (spec.inputs.length !== 1) {
    throw new ValidationError("frontier takes exactly one CSV input");
  }
  const table = csvInput(spec.inputs[0], "lvglass/frontier/v1");
  if (table.rows.length === 0) {
    throw new ValidationError(`${spec.inputs[0].path}: rows: no frontier points`);
  }
  const alphas = column(table, "alpha");
  const kappas = column(table, "kappa");

  const xd = padded(
    Math.min(...alphas, 0),
    Math.max(...alphas, 1),
  );
  const yd = padded(Math.min(...kappas, 0), Math.max(...kappas, Math.SQRT1_2));
  const { xs, ys } = plotScales(xd, yd);

  const pts: Array<[number, number]> = kappas.map((k, i) => [
    xs(alphas[i]),
    ys(k),
  ]);
  // draw in increasing kappa so the curve runs anchor-to-anchor
  pts.sort((a, b) => b[1] - a[1]);

  const parts: string[] = [];
  parts.push(axes(xs, ys, "mean interaction strength α", "disorder strength κ"));
  parts.push(polyline(pts, PALETTE[0], 2));
  for (const [x, y] of pts) {
    parts.push(
      `<circle cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="2.5" fill="${PALETTE[0]}"/>`,
    );
  }
  for (const a of ANCHORS) {
    const x = xs(a.alpha);
    const y = ys(a.kappa);
    parts.push(
      `<circle cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="4.5" fill="none" stroke="${PALETTE[1]}" stroke-width="1.5"/>`,
      `<text x="${(x + 8).toFixed(2)}" y="${(y - 8).toFixed(2)}" class="note">anchor ${escapeXml(a.label)}</text>`,
    );
  }
  parts.push(
    `<text x="${MARGIN.left + 10}" y="${MARGIN.top + 16}" class="note">normalizable side below the curve</text>`,
  );
  return document("Realizability frontier", parts.join("\n  "), spec.inputs);
}

// ---------------------------------------------------------------------------
// sde-trace

function renderSdeTrace(spec: PlotSpec): string {
  const { csvs, jsons } = splitByExtension(spec.inputs);
  if (csvs.length !== 1 || jsons.length !== 1) {
    throw new ValidationError(
      "sde-trace takes one trajectory CSV and one summary JSON",
    );
  }
  const table = csvInput(csvs[0], "lvglass/sde/v1");
  const summary: SdeSummary = parseJsonInput(jsons[0], sdeSummarySchema);

  const time = column(table, "time");
  for (const name of summary.observables) {
    if (!table.columns.includes(name)) {
      throw new ValidationError(
        `${csvs[0].path}: columns: missing observable "${name}" from the summary`,
      );
    }
  }

  const series = summary.observables.map((name) => column(table, name));
  const finite = series.flat().filter((v) => Number.isFinite(v));
  if (finite.length === 0) {
    throw new ValidationError(`${csvs[0].path}: rows: no finite samples`);
  }
  const { xs, ys } = plotScales(
    padded(Math.min(...time), Math.max(...time), 0.02),
    padded(Math.min(...finite), Math.max(...finite)),
  );

  const parts: string[] = [];
  parts.push(axes(xs, ys, "time", "observable"));
  summary.observables.forEach((name, k) => {
    const color = PALETTE[k % PALETTE.length];
    const pts: Array<[number, number]> = [];
    series[k].forEach((v, i) => {
      if (Number.isFinite(v)) pts.push([xs(time[i]), ys(v)]);
    });
    parts.push(polyline(pts, color, 1.2));
    const avg = summary.time_averages[name];
    if (avg !== null && avg !== undefined && Number.isFinite(avg)) {
      parts.push(
        polyline(
          [
            [xs.range[0], ys(avg)],
            [xs.range[1], ys(avg)],
          ],
          color,
          1,
          "6 4",
        ),
      );
    }
    parts.push(
      `<text x="${WIDTH - MARGIN.right - 6}" y="${MARGIN.top + 16 + 15 * k}" text-anchor="end" class="note" fill="${color}" style="fill:${color}">${escapeXml(name)}</text>`,
    );
  });
  if (summary.exploded) {
    parts.push(
      `<text x="${MARGIN.left + 10}" y="${MARGIN.top + 16}" class="note">trajectory hit the norm cap</text>`,
    );
  }
  const p = summary.params;
  const sub = `n=${p.n}, κ=${p.kappa}, α=${p.alpha}, T=${p.temperature}, dt=${p.dt}`;
  parts.push(
    `<text x="${WIDTH / 2}" y="${MARGIN.top - 6}" text-anchor="middle" class="note">${escapeXml(sub)}</text>`,
  );
  return document(
    "Time averages along the population dynamics",
    parts.join("\n  "),
    spec.inputs,
  );
}

// ---------------------------------------------------------------------------
// fe-trend

function renderFeTrend(spec: PlotSpec): string {
  const { csvs, jsons } = splitByExtension(spec.inputs);
  if (csvs.length !== 0 || jsons.length < 2) {
    throw new ValidationError(
      "fe-trend takes one or more free-energy JSONs plus one saddle report JSON",
    );
  }
  const fes: Array<{ src: EmbeddedSource; rep: FreeEnergyReport }> = [];
  let saddle: ParisiOptReport | null = null;
  for (const src of jsons) {
    let head: { schema?: string };
    try {
      head = JSON.parse(src.content) as { schema?: string };
    } catch {
      throw new ValidationError(`${src.path}: not valid JSON`);
    }
    if (head.schema === "lvglass/parisi-opt/v1") {
      if (saddle !== null) {
        throw new ValidationError("fe-trend takes exactly one saddle report");
      }
      saddle = parseJsonInput(src, parisiOptSchema);
    } else {
      fes.push({ src, rep: parseJsonInput(src, freeEnergySchema) });
    }
  }
  if (saddle === null) {
    throw new ValidationError("fe-trend needs a saddle report input");
  }
  if (fes.length === 0) {
    throw new ValidationError("fe-trend needs at least one free-energy input");
  }
  fes.sort((a, b) => a.rep.n - b.rep.n);

  const ns = fes.map((f) => f.rep.n);
  const vals = fes.map((f) => f.rep.value);
  const halfBars = fes.map((f) => 3 * f.rep.std_error);
  const yLo = Math.min(...vals.map((v, i) => v - halfBars[i]), saddle.value);
  const yHi = Math.max(...vals.map((v, i) => v + halfBars[i]), saddle.value);
  const { xs, ys } = plotScales(
    padded(Math.min(...ns), Math.max(...ns), 0.12),
    padded(yLo, yHi),
  );

  const parts: string[] = [];
  parts.push(axes(xs, ys, "system size n", "free energy per site"));
  const sy = ys(saddle.value);
  parts.push(
    polyline(
      [
        [xs.range[0], sy],
        [xs.range[1], sy],
      ],
      PALETTE[1],
      1.5,
      "8 5",
    ),
    `<text x="${WIDTH - MARGIN.right - 6}" y="${(sy - 6).toFixed(2)}" text-anchor="end" class="note">saddle value (${saddle.levels} level${saddle.levels === 1 ? "" : "s"})</text>`,
  );
  if (ns.length > 1) {
    parts.push(
      polyline(
        ns.map((n, i) => [xs(n), ys(vals[i])]),
        PALETTE[0],
        1.5,
      ),
    );
  }
  ns.forEach((n, i) => {
    const x = xs(n);
    const lo = ys(vals[i] - halfBars[i]);
    const hi = ys(vals[i] + halfBars[i]);
    parts.push(
      `<line x1="${x.toFixed(2)}" y1="${lo.toFixed(2)}" x2="${x.toFixed(2)}" y2="${hi.toFixed(2)}" stroke="${PALETTE[0]}" stroke-width="1.2"/>`,
      `<circle cx="${x.toFixed(2)}" cy="${ys(vals[i]).toFixed(2)}" r="3.5" fill="${PALETTE[0]}"/>`,
    );
  });
  parts.push(
    `<text x="${MARGIN.left + 10}" y="${MARGIN.top + 16}" class="note">bars span ±3 standard errors</text>`,
  );
  return document(
    "Disorder-averaged free energy vs system size",
    parts.join("\n  "),
    spec.inputs,
  );
}

// ---------------------------------------------------------------------------
// parisi-measure

function renderParisiMeasure(spec: PlotSpec): string {
  if (spec.inputs.length !== 1) {
    throw new ValidationError("parisi-measure takes exactly one report JSON");
  }
  const rep = parseJsonInput(spec.inputs[0], parisiOptSchema);
  const { lambdas, atoms } = rep.arguments;
  if (atoms.length !== lambdas.length + 1) {
    throw new ValidationError(
      `${spec.inputs[0].path}: arguments.atoms: expected ${lambdas.length + 1} entries, got ${atoms.length}`,
    );
  }
  // masses are consecutive differences of the cumulative weights [0, ..., 1]
  const cum = [0, ...lambdas, 1];
  const masses = atoms.map((_, k) => cum[k + 1] - cum[k]);

  const xd = padded(Math.min(...atoms, 0), Math.max(...atoms), 0.15);
  const { xs, ys } = plotScales(xd, [0, 1.05]);
  const barHalf = Math.min(
    18,
    ((xs.range[1] - xs.range[0]) / Math.max(atoms.length, 2)) * 0.12,
  );

  const parts: string[] = [];
  parts.push(axes(xs, ys, "overlap support point", "mass"));
  atoms.forEach((d, k) => {
    const x = xs(d);
    const y = ys(masses[k]);
    const y0 = ys(0);
    parts.push(
      `<rect x="${(x - barHalf).toFixed(2)}" y="${y.toFixed(2)}" width="${(2 * barHalf).toFixed(2)}" height="${(y0 - y).toFixed(2)}" fill="${PALETTE[2]}" fill-opacity="0.75" stroke="${PALETTE[2]}"/>`,
      `<text x="${x.toFixed(2)}" y="${(y - 6).toFixed(2)}" text-anchor="middle" class="note">${masses[k].toFixed(3)}</text>`,
    );
  });
  const m = rep.model;
  const sub = `levels=${rep.levels}, β=${m.beta}, κ=${m.kappa}, α=${m.alpha}, converged=${rep.converged}`;
  parts.push(
    `<text x="${WIDTH / 2}" y="${MARGIN.top - 6}" text-anchor="middle" class="note">${escapeXml(sub)}</text>`,
  );
  return document("Optimized overlap measure", parts.join("\n  "), spec.inputs);
}

// ---------------------------------------------------------------------------

export function render(spec: PlotSpec): string {
  if (spec.inputs.length === 0) {
    throw new ValidationError("at least one --input is required");
  }
  switch (spec.kind) {
    case "frontier":
      return renderFrontier(spec);
    case "sde-trace":
      return renderSdeTrace(spec);
    case "fe-trend":
      return renderFeTrend(spec);
    case "parisi-measure":
      return renderParisiMeasure(spec);
    default:
      throw new ValidationError(`unknown kind "${spec.kind as string}"`);
  }
}
