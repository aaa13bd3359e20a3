/** Small numeric helpers for summary rows. */

export function geomean(values: number[]): number {
  if (values.length === 0) {
    throw new Error("geomean of empty list");
  }
  const logSum = values.reduce((acc, v) => {
    if (v <= 0) {
      throw new Error(`geomean needs positive values, got ${v}`);
    }
    return acc + Math.log(v);
  }, 0);
  return Math.exp(logSum / values.length);
}

export function mean(values: number[]): number {
  if (values.length === 0) {
    throw new Error("mean of empty list");
  }
  return values.reduce((a, b) => a + b, 0) / values.length;
}
