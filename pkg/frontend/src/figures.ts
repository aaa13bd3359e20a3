/** Figure builders: each returns SVG text plus a data sidecar CSV. */

import { StatsRow, toCsv, formatNumber } from "./csv.js";
import { geomean, mean } from "./stats.js";
import { Bar, barChart, stackedBarChart } from "./svg.js";

export interface Figure {
  name: string;
  svg: string;
  sidecarHeader: string[];
  sidecarRows: (string | number)[][];
  summary: string[];
}

export const FIGURES = ["breakdown", "ratios", "insts"] as const;
export type FigureKind = (typeof FIGURES)[number];

const COLORS = {
  idle: "#c8c8c8",
  compute: "#3b6fb6",
  mem: "#d98032",
  config: "#8f8f8f",
  memory: "#d98032",
  move: "#67a661",
  arith: "#3b6fb6",
};

function rowKey(row: StatsRow): string {
  return `${row.kernel}/${row.isa}/${row.scheme}`;
}

function sortedRows(rows: StatsRow[]): StatsRow[] {
  return [...rows].sort((a, b) => rowKey(a).localeCompare(rowKey(b)));
}

/** Stacked idle/compute/data-access shares per run. */
export function buildBreakdown(rows: StatsRow[]): Figure {
  const ordered = sortedRows(rows);
  const bars: Bar[] = [];
  const sidecar: (string | number)[][] = [];
  const summary: string[] = [];
  for (const row of ordered) {
    const total = row.cyclesIdle + row.cyclesCompute + row.cyclesMem;
    if (total <= 0) {
      throw new Error(`${rowKey(row)}: no cycle data`);
    }
    const idle = (100 * row.cyclesIdle) / total;
    const compute = (100 * row.cyclesCompute) / total;
    const memAccess = (100 * row.cyclesMem) / total;
    bars.push({
      label: rowKey(row),
      segments: [
        { value: compute, color: COLORS.compute },
        { value: memAccess, color: COLORS.mem },
        { value: idle, color: COLORS.idle },
      ],
    });
    sidecar.push([row.kernel, row.isa, row.scheme, idle, compute, memAccess]);
    summary.push(
      `${rowKey(row)}: ${formatNumber(idle)}% idle, ` +
        `${formatNumber(compute)}% compute, ${formatNumber(memAccess)}% data access`,
    );
  }
  const svg = stackedBarChart(
    "Execution-time breakdown (% of control-block cycles)",
    bars,
    [
      { label: "compute", color: COLORS.compute },
      { label: "data access", color: COLORS.mem },
      { label: "idle", color: COLORS.idle },
    ],
    "percent",
    100,
  );
  return {
    name: "breakdown",
    svg,
    sidecarHeader: ["kernel", "isa", "scheme", "idle_pct", "compute_pct", "mem_pct"],
    sidecarRows: sidecar,
    summary,
  };
}

/** Cycle ratios of every other ISA against the baseline, plus mean bars. */
export function buildRatios(rows: StatsRow[], baseline = "mve"): Figure {
  const byConfig = new Map<string, Map<string, StatsRow>>();
  for (const row of rows) {
    const key = `${row.kernel}/${row.scheme}`;
    if (!byConfig.has(key)) {
      byConfig.set(key, new Map());
    }
    byConfig.get(key)!.set(row.isa, row);
  }
  const sidecar: (string | number)[][] = [];
  const bars: { label: string; value: number }[] = [];
  const unmatched: string[] = [];
  const ratios: number[] = [];
  for (const key of [...byConfig.keys()].sort()) {
    const group = byConfig.get(key)!;
    const base = group.get(baseline);
    if (!base) {
      unmatched.push(key);
      continue;
    }
    for (const [isa, row] of [...group.entries()].sort()) {
      if (isa === baseline) {
        continue;
      }
      const ratio = row.cyclesTotal / base.cyclesTotal;
      ratios.push(ratio);
      bars.push({ label: `${key}/${isa}`, value: ratio });
      sidecar.push([row.kernel, row.scheme, isa, baseline, ratio]);
    }
  }
  if (unmatched.length > 0) {
    throw new Error(`no ${baseline} row for: ${unmatched.join(", ")}`);
  }
  if (ratios.length === 0) {
    throw new Error("ratios need at least two ISA flavors per (kernel, scheme)");
  }
  const g = geomean(ratios);
  const m = mean(ratios);
  bars.push({ label: "geomean", value: g });
  sidecar.push(["geomean", "-", "-", baseline, g]);
  sidecar.push(["mean", "-", "-", baseline, m]);
  const svg = barChart(
    `Cycles normalized to ${baseline}`,
    bars,
    COLORS.compute,
    `x slower than ${baseline}`,
  );
  return {
    name: "ratios",
    svg,
    sidecarHeader: ["kernel", "scheme", "isa", "baseline", "cycles_ratio"],
    sidecarRows: sidecar,
    summary: [
      ...bars.map((b) => `${b.label}: ${formatNumber(b.value)}x`),
      `arithmetic mean: ${formatNumber(m)}x`,
    ],
  };
}

/** Dynamic instruction mix (config/memory/move/arith) plus scalar counts. */
export function buildInsts(rows: StatsRow[]): Figure {
  const ordered = sortedRows(rows);
  const bars: Bar[] = [];
  const sidecar: (string | number)[][] = [];
  const summary: string[] = [];
  for (const row of ordered) {
    bars.push({
      label: rowKey(row),
      segments: [
        { value: row.vinstsArith, color: COLORS.arith },
        { value: row.vinstsMove, color: COLORS.move },
        { value: row.vinstsMemory, color: COLORS.memory },
        { value: row.vinstsConfig, color: COLORS.config },
      ],
    });
    sidecar.push([
      row.kernel, row.isa, row.scheme,
      row.vinstsConfig, row.vinstsMemory, row.vinstsMove, row.vinstsArith,
      row.vinstsTotal, row.sinsts,
    ]);
    summary.push(`${rowKey(row)}: ${row.vinstsTotal} vector, ${row.sinsts} scalar`);
  }
  const svg = stackedBarChart(
    "Dynamic vector instruction distribution",
    bars,
    [
      { label: "arithmetic", color: COLORS.arith },
      { label: "move", color: COLORS.move },
      { label: "memory", color: COLORS.memory },
      { label: "config", color: COLORS.config },
    ],
    "instructions",
  );
  return {
    name: "insts",
    svg,
    sidecarHeader: [
      "kernel", "isa", "scheme",
      "vinsts_config", "vinsts_memory", "vinsts_move", "vinsts_arith",
      "vinsts_total", "sinsts",
    ],
    sidecarRows: sidecar,
    summary,
  };
}

export function buildFigure(kind: FigureKind, rows: StatsRow[], baseline = "mve"): Figure {
  switch (kind) {
    case "breakdown":
      return buildBreakdown(rows);
    case "ratios":
      return buildRatios(rows, baseline);
    case "insts":
      return buildInsts(rows);
  }
}

export function sidecarText(figure: Figure): string {
  return toCsv(figure.sidecarHeader, figure.sidecarRows);
}
