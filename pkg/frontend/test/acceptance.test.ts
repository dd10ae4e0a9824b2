/**
 * Acceptance gate for the figure pipeline: the frontier plot's embedded
 * data table must equal the producer CLI's CSV byte-for-byte, and the two
 * analytic anchor points must be annotated on the figure.
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { render } from "../src/render.js";
import { extractSources } from "../src/svg.js";

describe("frontier figure golden data", () => {
  it("embeds the CLI CSV byte-for-byte and annotates both anchors", () => {
    const dir = mkdtempSync(join(tmpdir(), "lvglass-golden-"));
    const csvPath = join(dir, "frontier.csv");
    execFileSync(
      "lvglass",
      ["frontier", "--kappa-grid", "0.05:0.7:0.05", "--output", csvPath],
      { stdio: ["ignore", "pipe", "pipe"] },
    );
    const csvBytes = readFileSync(csvPath, "utf8");

    const svg = render({
      kind: "frontier",
      inputs: [{ path: csvPath, content: csvBytes }],
    });

    const embedded = extractSources(svg);
    expect(embedded).toHaveLength(1);
    expect(embedded[0].content).toBe(csvBytes);

    expect(svg).toContain("anchor (0, 1/√2)");
    expect(svg).toContain("anchor (1, 0)");
  }, 60_000);
});
