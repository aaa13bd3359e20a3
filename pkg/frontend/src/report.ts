/** CLI: mdvsim-report --in <csv...> --fig breakdown|ratios|insts --out <dir> */

import * as fs from "node:fs";
import * as path from "node:path";

import { parseStats, StatsRow } from "./csv.js";
import { buildFigure, FIGURES, FigureKind, sidecarText } from "./figures.js";

interface Args {
  inputs: string[];
  figs: FigureKind[];
  outDir: string;
  baseline: string;
}

export function parseArgs(argv: string[]): Args {
  const args: Args = { inputs: [], figs: [], outDir: "figures", baseline: "mve" };
  let i = 0;
  while (i < argv.length) {
    const flag = argv[i];
    if (flag === "--in") {
      i += 1;
      while (i < argv.length && !argv[i].startsWith("--")) {
        args.inputs.push(argv[i]);
        i += 1;
      }
    } else if (flag === "--fig") {
      i += 1;
      while (i < argv.length && !argv[i].startsWith("--")) {
        for (const name of argv[i].split(",")) {
          if (!(FIGURES as readonly string[]).includes(name)) {
            throw new UsageError(`unknown figure '${name}' (have ${FIGURES.join("|")})`);
          }
          args.figs.push(name as FigureKind);
        }
        i += 1;
      }
    } else if (flag === "--out") {
      args.outDir = argv[i + 1];
      i += 2;
    } else if (flag === "--baseline") {
      args.baseline = argv[i + 1];
      i += 2;
    } else {
      throw new UsageError(`unknown flag '${flag}'`);
    }
  }
  if (args.inputs.length === 0) {
    throw new UsageError("missing --in <csv...>");
  }
  if (args.figs.length === 0) {
    args.figs = [...FIGURES];
  }
  return args;
}

export class UsageError extends Error {}

export function loadRows(inputs: string[]): StatsRow[] {
  const rows: StatsRow[] = [];
  for (const input of inputs) {
    rows.push(...parseStats(fs.readFileSync(input, "utf-8"), input));
  }
  return rows;
}

export function run(argv: string[], log: (line: string) => void = console.log): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      log(`usage error: ${err.message}`);
      log("usage: mdvsim-report --in <csv...> [--fig breakdown|ratios|insts] " +
          "[--out <dir>] [--baseline <isa>]");
      return 2;
    }
    throw err;
  }
  try {
    const rows = loadRows(args.inputs);
    fs.mkdirSync(args.outDir, { recursive: true });
    for (const kind of args.figs) {
      const figure = buildFigure(kind, rows, args.baseline);
      const svgPath = path.join(args.outDir, `${figure.name}.svg`);
      const dataPath = path.join(args.outDir, `${figure.name}.data.csv`);
      fs.writeFileSync(svgPath, figure.svg);
      fs.writeFileSync(dataPath, sidecarText(figure));
      log(`wrote ${svgPath} and ${dataPath}`);
      for (const line of figure.summary) {
        log(`  ${line}`);
      }
    }
    return 0;
  } catch (err) {
    log(`error: ${(err as Error).message}`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("report.js") || entry.endsWith("mdvsim-report")) {
  process.exit(run(process.argv.slice(2)));
}
