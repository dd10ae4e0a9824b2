import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import { PlotSpec, ValidationError, render } from "../src/render.js";
import { extractSources } from "../src/svg.js";

let dir: string;

function cli(args: string[]): void {
  execFileSync("lvglass", args, { stdio: ["ignore", "pipe", "pipe"] });
}

function input(path: string) {
  return { path, content: readFileSync(path, "utf8") };
}

// All fixtures come from the producer CLI; nothing is hand-written except
// deliberately broken variants.
beforeAll(() => {
  dir = mkdtempSync(join(tmpdir(), "lvglass-plots-"));
  cli(["frontier", "--kappa-grid", "0.1:0.7:0.1", "--output", join(dir, "frontier.csv")]);
  cli([
    "sde", "--n", "2", "--kappa", "0.2", "--alpha", "0.1",
    "--phi", "1.0", "--temperature", "0.5", "--dt", "0.01", "--t-end", "20",
    "--seed", "3", "--output", join(dir, "run.csv"),
    "--summary", join(dir, "run-summary.json"),
  ]);
  for (const n of ["1", "2"]) {
    cli([
      "free-energy", "--n", n, "--kappa", "0.3", "--alpha", "0.0",
      "--phi", "1.0", "--temperature", "0.5", "--replicas", "2",
      "--chain-length", "400", "--t-points", "5", "--seed", "11",
      "--output", join(dir, `fe-n${n}.json`),
    ]);
  }
  cli([
    "parisi-opt", "--beta", "2.0", "--phi", "1.0", "--kappa", "1e-6",
    "--alpha", "0.0", "--levels", "1", "--outer-maxfev", "150",
    "--output", join(dir, "saddle.json"),
  ]);
}, 120_000);

describe("frontier", () => {
  it("renders the curve with both analytic anchors annotated", () => {
    const svg = render({ kind: "frontier", inputs: [input(join(dir, "frontier.csv"))] });
    expect(svg).toContain("<polyline");
    expect(svg).toContain("anchor (0, 1/√2)");
    expect(svg).toContain("anchor (1, 0)");
  });

  it("rejects a second input file", () => {
    const one = input(join(dir, "frontier.csv"));
    expect(() => render({ kind: "frontier", inputs: [one, one] })).toThrow(
      ValidationError,
    );
  });

  it("rejects a CSV of the wrong schema kind", () => {
    const sde = input(join(dir, "run.csv"));
    expect(() => render({ kind: "frontier", inputs: [sde] })).toThrow(
      /expected lvglass\/frontier\/v1/,
    );
  });
});

describe("sde-trace", () => {
  it("renders one line per observable plus its average", () => {
    const svg = render({
      kind: "sde-trace",
      inputs: [input(join(dir, "run.csv")), input(join(dir, "run-summary.json"))],
    });
    const lines = svg.match(/<polyline/g) ?? [];
    // 3 observables + 3 dashed average lines
    expect(lines.length).toBe(6);
    expect(svg).toContain("logmean");
  });

  it("rejects a summary with an empty observable list", () => {
    const summary = JSON.parse(readFileSync(join(dir, "run-summary.json"), "utf8"));
    summary.observables = [];
    const broken = join(dir, "broken-summary.json");
    writeFileSync(broken, JSON.stringify(summary));
    expect(() =>
      render({
        kind: "sde-trace",
        inputs: [input(join(dir, "run.csv")), input(broken)],
      }),
    ).toThrow(/observables/);
  });

  it("requires exactly one CSV and one JSON", () => {
    expect(() =>
      render({ kind: "sde-trace", inputs: [input(join(dir, "run.csv"))] }),
    ).toThrow(ValidationError);
  });
});

describe("fe-trend", () => {
  it("renders points with error bars and the saddle line", () => {
    const svg = render({
      kind: "fe-trend",
      inputs: [
        input(join(dir, "fe-n1.json")),
        input(join(dir, "fe-n2.json")),
        input(join(dir, "saddle.json")),
      ],
    });
    expect((svg.match(/<circle/g) ?? []).length).toBe(2);
    expect(svg).toContain("saddle value (1 level)");
    expect(svg).toContain("standard errors");
  });

  it("handles a single system size: one point plus the horizontal line", () => {
    const svg = render({
      kind: "fe-trend",
      inputs: [input(join(dir, "fe-n2.json")), input(join(dir, "saddle.json"))],
    });
    expect((svg.match(/<circle/g) ?? []).length).toBe(1);
    expect(svg).toContain("saddle value");
  });

  it("refuses to run without a saddle report", () => {
    expect(() =>
      render({
        kind: "fe-trend",
        inputs: [input(join(dir, "fe-n1.json")), input(join(dir, "fe-n2.json"))],
      }),
    ).toThrow(/saddle report/);
  });

  it("names the failing field on a mangled report", () => {
    const rep = JSON.parse(readFileSync(join(dir, "fe-n1.json"), "utf8"));
    delete rep.std_error;
    const broken = join(dir, "broken-fe.json");
    writeFileSync(broken, JSON.stringify(rep));
    expect(() =>
      render({
        kind: "fe-trend",
        inputs: [input(broken), input(join(dir, "saddle.json"))],
      }),
    ).toThrow(/std_error/);
  });
});

describe("parisi-measure", () => {
  it("draws one bar per support atom with mass labels", () => {
    const rep = JSON.parse(readFileSync(join(dir, "saddle.json"), "utf8"));
    const svg = render({
      kind: "parisi-measure",
      inputs: [input(join(dir, "saddle.json"))],
    });
    expect((svg.match(/<rect x=/g) ?? []).length).toBe(rep.arguments.atoms.length);
    expect(svg).toContain("levels=1");
  });
});

describe("embedding", () => {
  it("every figure carries its inputs verbatim", () => {
    const sources = [
      input(join(dir, "fe-n1.json")),
      input(join(dir, "saddle.json")),
    ];
    const svg = render({ kind: "fe-trend", inputs: sources });
    const embedded = extractSources(svg);
    expect(embedded.map((e) => e.path)).toEqual(sources.map((s) => s.path));
    expect(embedded.map((e) => e.content)).toEqual(sources.map((s) => s.content));
  });
});
