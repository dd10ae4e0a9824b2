import { describe, expect, it } from "vitest";

import { CsvFormatError, column, parseCsv } from "../src/csv.js";

const SAMPLE = [
  "# schema=lvglass/frontier/v1",
  "# kappa_grid=0.05:0.7:0.05",
  "kappa,alpha,c,lambda_plus",
  "0.05,0.9974937186,19.92479579,1",
  "0.1,0.9898979486,9.8483397,1",
  "",
].join("\n");

describe("parseCsv", () => {
  it("reads schema, params, columns, rows", () => {
    const t = parseCsv(SAMPLE);
    expect(t.schema).toBe("lvglass/frontier/v1");
    expect(t.params).toEqual({ kappa_grid: "0.05:0.7:0.05" });
    expect(t.columns).toEqual(["kappa", "alpha", "c", "lambda_plus"]);
    expect(t.rows).toHaveLength(2);
    expect(t.rows[0][0]).toBeCloseTo(0.05, 12);
    expect(t.raw).toBe(SAMPLE);
  });

  it("parses inf, -inf, nan cells", () => {
    const t = parseCsv(
      "# schema=lvglass/sde/v1\ntime,logmean\n0.5,-inf\n1,nan\n1.5,inf\n",
    );
    expect(t.rows[0][1]).toBe(-Infinity);
    expect(Number.isNaN(t.rows[1][1])).toBe(true);
    expect(t.rows[2][1]).toBe(Infinity);
  });

  it("rejects a file whose first line is not the schema header", () => {
    expect(() => parseCsv("kappa,alpha\n0.1,0.2\n")).toThrow(CsvFormatError);
    expect(() => parseCsv("# kappa_grid=x\nkappa\n0.1\n")).toThrow(/schema/);
  });

  it("rejects ragged rows and non-numeric cells", () => {
    expect(() =>
      parseCsv("# schema=s/v1\na,b\n1,2,3\n"),
    ).toThrow(/expected 2 cells/);
    expect(() => parseCsv("# schema=s/v1\na,b\n1,zap\n")).toThrow(
      /non-numeric cell/,
    );
  });

  it("looks up columns by name and reports missing ones", () => {
    const t = parseCsv(SAMPLE);
    expect(column(t, "alpha")[1]).toBeCloseTo(0.9898979486, 12);
    expect(() => column(t, "beta")).toThrow(/missing column "beta"/);
  });
});
