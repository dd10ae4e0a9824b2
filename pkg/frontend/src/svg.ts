/**
 * Small SVG assembly toolkit: linear scales, axes with tick labels, and the
 * metadata block that embeds each figure's source files verbatim.
 *
 * Assembled by hand (no plotting library) so the embedded data tables and
 * the data-to-axes mapping stay under byte-exact control.
 */

export const WIDTH = 720;
export const HEIGHT = 480;
export const MARGIN = { top: 48, right: 24, bottom: 56, left: 72 };

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 === 0 ? 1 : d1 - d0;
  const f = (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
  return Object.assign(f, { domain, range }) as Scale;
}

/** Pad a data extent by a fraction on both sides (never collapses). */
export function padded(lo: number, hi: number, frac = 0.08): [number, number] {
  if (lo === hi) {
    const d = lo === 0 ? 1 : Math.abs(lo) * 0.5;
    return [lo - d, hi + d];
  }
  const pad = (hi - lo) * frac;
  return [lo - pad, hi + pad];
}

/** Tick positions: 4-8 round values covering the domain. */
export function ticks(lo: number, hi: number, count = 6): number[] {
  const span = hi - lo;
  const step0 = Math.pow(10, Math.floor(Math.log10(span / count)));
  let step = step0;
  for (const m of [1, 2, 5, 10]) {
    step = m * step0;
    if (span / step <= count) break;
  }
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return String(parseFloat(v.toPrecision(6)));
}

export function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function unescapeXml(s: string): string {
  return s.replace(/&lt;/g, "<").replace(/&gt;/g, ">").replace(/&amp;/g, "&");
}

export interface EmbeddedSource {
  path: string;
  content: string;
}

/**
 * Metadata block carrying every input file byte-for-byte (XML-escaped).
 * Readers recover the original bytes with unescapeXml.
 */
export function metadataBlock(sources: EmbeddedSource[]): string {
  const items = sources
    .map(
      (s) =>
        `    <data path="${escapeXml(s.path)}">${escapeXml(s.content)}</data>`,
    )
    .join("\n");
  return `  <metadata id="source-data">\n${items}\n  </metadata>`;
}

export function polyline(
  pts: Array<[number, number]>,
  stroke: string,
  width = 2,
  dash = "",
): string {
  const d = pts.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<polyline points="${d}" fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`;
}

export function axes(
  xs: Scale,
  ys: Scale,
  xLabel: string,
  yLabel: string,
): string {
  const [x0, x1] = xs.range;
  const [y0, y1] = ys.range; // y0 is the bottom (larger pixel value)
  const parts: string[] = [];
  parts.push(
    `<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="#333" stroke-width="1"/>`,
    `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="#333" stroke-width="1"/>`,
  );
  for (const t of ticks(xs.domain[0], xs.domain[1])) {
    const px = xs(t);
    parts.push(
      `<line x1="${px.toFixed(2)}" y1="${y0}" x2="${px.toFixed(2)}" y2="${y0 + 5}" stroke="#333" stroke-width="1"/>`,
      `<text x="${px.toFixed(2)}" y="${y0 + 20}" text-anchor="middle" class="tick">${fmtTick(t)}</text>`,
    );
  }
  for (const t of ticks(ys.domain[0], ys.domain[1])) {
    const py = ys(t);
    parts.push(
      `<line x1="${x0 - 5}" y1="${py.toFixed(2)}" x2="${x0}" y2="${py.toFixed(2)}" stroke="#333" stroke-width="1"/>`,
      `<text x="${x0 - 9}" y="${(py + 4).toFixed(2)}" text-anchor="end" class="tick">${fmtTick(t)}</text>`,
    );
  }
  const midX = (x0 + x1) / 2;
  const midY = (y0 + y1) / 2;
  parts.push(
    `<text x="${midX}" y="${y0 + 42}" text-anchor="middle" class="label">${escapeXml(xLabel)}</text>`,
    `<text x="${x0 - 52}" y="${midY}" text-anchor="middle" class="label" transform="rotate(-90 ${x0 - 52} ${midY})">${escapeXml(yLabel)}</text>`,
  );
  return parts.join("\n  ");
}

/** Wrap body content into a complete standalone SVG document. */
export function document(
  title: string,
  body: string,
  sources: EmbeddedSource[],
): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
    `  <title>${escapeXml(title)}</title>`,
    metadataBlock(sources),
    `  <style>`,
    `    text { font-family: Helvetica, Arial, sans-serif; fill: #222; }`,
    `    .tick { font-size: 11px; }`,
    `    .label { font-size: 13px; }`,
    `    .title { font-size: 16px; font-weight: bold; }`,
    `    .note { font-size: 11px; fill: #555; }`,
    `  </style>`,
    `  <rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`,
    `  <text x="${WIDTH / 2}" y="28" text-anchor="middle" class="title">${escapeXml(title)}</text>`,
    `  ${body}`,
    `</svg>`,
    ``,
  ].join("\n");
}

/** Extract the embedded sources back out of a rendered figure. */
export function extractSources(svg: string): EmbeddedSource[] {
  const out: EmbeddedSource[] = [];
  const re = /<data path="([^"]*)">([\s\S]*?)<\/data>/g;
  let m: RegExpExecArray | null;
  while ((m = re.exec(svg)) !== null) {
    out.push({ path: unescapeXml(m[1]), content: unescapeXml(m[2]) });
  }
  return out;
}
