#!/usr/bin/env node
/**
 * lvglass-plot: render an SVG figure from lvglass CLI output files.
 *
 *   lvglass-plot --kind frontier --input frontier.csv --output frontier.svg
 *   lvglass-plot --kind sde-trace --input run.csv --input run-summary.json -o fig.svg
 *
 * Exit codes: 0 success, 2 validation problem (bad flags, missing file,
 * schema mismatch; the message names the failing field).
 */

import { readFileSync, writeFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { CsvFormatError } from "./csv.js";
import { KINDS, Kind, PlotSpec, ValidationError, render } from "./render.js";

export function run(argv: string[]): number {
  const parser = yargs(argv)
    .scriptName("lvglass-plot")
    .usage("$0 --kind <kind> --input <file> [--input <file> ...] --output <file>")
    .option("kind", {
      choices: KINDS,
      demandOption: true,
      describe: "figure kind",
    })
    .option("input", {
      type: "string",
      array: true,
      demandOption: true,
      describe: "input CSV/JSON file (repeatable)",
    })
    .option("output", {
      alias: "o",
      type: "string",
      demandOption: true,
      describe: "output SVG path",
    })
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw err ?? new ValidationError(msg);
    });

  let args: { kind: Kind; input: string[]; output: string };
  try {
    args = parser.parseSync() as unknown as typeof args;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }

  try {
    const spec: PlotSpec = {
      kind: args.kind,
      inputs: args.input.map((path) => {
        let content: string;
        try {
          content = readFileSync(path, "utf8");
        } catch {
          throw new ValidationError(`cannot read input file ${path}`);
        }
        return { path, content };
      }),
    };
    const svg = render(spec);
    writeFileSync(args.output, svg);
    console.log(`wrote ${args.output}`);
    return 0;
  } catch (err) {
    if (err instanceof ValidationError || err instanceof CsvFormatError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("lvglass-plot")) {
  process.exit(run(hideBin(process.argv)));
}
