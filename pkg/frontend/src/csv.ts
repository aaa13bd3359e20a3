/** Reading and writing the simulator's versioned stats CSV. */

export const SUPPORTED_SCHEMA = "mdvsim-1";

export interface StatsRow {
  kernel: string;
  isa: string;
  scheme: string;
  seed: number;
  cyclesTotal: number;
  cyclesIdle: number;
  cyclesCompute: number;
  cyclesMem: number;
  vinstsConfig: number;
  vinstsMemory: number;
  vinstsMove: number;
  vinstsArith: number;
  vinstsTotal: number;
  sinsts: number;
  bytesMoved: number;
  utilization: number;
}

export function parseCsv(text: string): string[][] {
  // the simulator never emits quoted or embedded-comma fields
  return text
    .split(/\r?\n/)
    .filter((line) => line.length > 0)
    .map((line) => line.split(","));
}

export function parseStats(text: string, source = "<csv>"): StatsRow[] {
  const rows = parseCsv(text);
  if (rows.length === 0) {
    throw new Error(`${source}: empty file`);
  }
  const header = rows[0];
  const col = new Map(header.map((name, i) => [name, i]));
  for (const required of ["schema", "kernel", "isa", "scheme", "cycles_total"]) {
    if (!col.has(required)) {
      throw new Error(`${source}: missing column '${required}'`);
    }
  }
  const out: StatsRow[] = [];
  rows.slice(1).forEach((cells, idx) => {
    const lineNo = idx + 2;
    if (cells.length !== header.length) {
      throw new Error(`${source}:${lineNo}: expected ${header.length} fields, got ${cells.length}`);
    }
    const get = (name: string) => cells[col.get(name)!];
    const num = (name: string) => {
      const value = Number(get(name));
      if (!Number.isFinite(value)) {
        throw new Error(`${source}:${lineNo}: bad number in '${name}': ${get(name)}`);
      }
      return value;
    };
    const schema = get("schema");
    if (schema !== SUPPORTED_SCHEMA) {
      throw new Error(`${source}:${lineNo}: unsupported schema '${schema}' (expected ${SUPPORTED_SCHEMA})`);
    }
    out.push({
      kernel: get("kernel"),
      isa: get("isa"),
      scheme: get("scheme"),
      seed: num("seed"),
      cyclesTotal: num("cycles_total"),
      cyclesIdle: num("cycles_idle"),
      cyclesCompute: num("cycles_compute"),
      cyclesMem: num("cycles_mem"),
      vinstsConfig: num("vinsts_config"),
      vinstsMemory: num("vinsts_memory"),
      vinstsMove: num("vinsts_move"),
      vinstsArith: num("vinsts_arith"),
      vinstsTotal: num("vinsts_total"),
      sinsts: num("sinsts"),
      bytesMoved: num("bytes_moved"),
      utilization: num("utilization"),
    });
  });
  return out;
}

export function toCsv(header: string[], rows: (string | number)[][]): string {
  const fmt = (v: string | number) =>
    typeof v === "number" ? formatNumber(v) : v;
  return [header.join(","), ...rows.map((r) => r.map(fmt).join(","))].join("\n") + "\n";
}

/** Stable numeric formatting so regenerated sidecars are byte-identical. */
export function formatNumber(v: number): string {
  if (Number.isInteger(v)) {
    return String(v);
  }
  return v.toFixed(6);
}
