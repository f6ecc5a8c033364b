#!/usr/bin/env node
import { readFileSync, writeFileSync } from "node:fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { SchemaError } from "./csv.js";
import { FIGURE_KINDS, FigureKind, renderFigure } from "./figures.js";

interface Args {
  kind: FigureKind;
  in: string;
  out: string;
}

/** Parse argv and render; returns a process exit code. */
export function main(argv: string[]): number {
  let args: Args;
  try {
    args = yargs(argv)
      .command("$0 <kind>", "render a result CSV as an SVG figure", (y) =>
        y.positional("kind", {
          describe: "figure kind",
          choices: FIGURE_KINDS,
          demandOption: true,
        }),
      )
      .option("in", {
        type: "string",
        describe: "result.csv produced by the simulator CLI",
        demandOption: true,
      })
      .option("out", {
        type: "string",
        describe: "destination SVG path",
        demandOption: true,
      })
      .strict()
      .exitProcess(false)
      .fail((msg, err) => {
        throw err ?? new Error(msg);
      })
      .parseSync() as unknown as Args;
  } catch (err) {
    process.stderr.write(`usage error: ${(err as Error).message}\n`);
    return 2;
  }

  let text: string;
  try {
    text = readFileSync(args.in, "utf8");
  } catch (err) {
    process.stderr.write(`cannot read ${args.in}: ${(err as Error).message}\n`);
    return 2;
  }

  try {
    const svg = renderFigure(args.kind, text);
    writeFileSync(args.out, svg);
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`schema error: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
  process.stderr.write(`wrote ${args.out}\n`);
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(hideBin(process.argv)));
}
