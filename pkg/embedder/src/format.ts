/**
 * The daily embedding file format shared with the forecasting pipeline:
 * a `dim=<d>` header line, then one record per day,
 * `date,count,v0,...,v{d-1}` with values in fixed 12-decimal notation.
 * Fixed-point output keeps reruns byte-identical and parses back to the
 * same doubles on the consuming side.
 */

export interface DayRecord {
  date: string;
  count: number;
  values: number[];
}

export function formatValue(v: number): string {
  // -0 would round-trip fine but prints as "-0.000000000000"; normalize it
  const x = Object.is(v, -0) ? 0 : v;
  return x.toFixed(12);
}

export function renderEmbeddingFile(records: DayRecord[], dim: number): string {
  const lines = [`dim=${dim}`];
  const sorted = [...records].sort((a, b) => a.date.localeCompare(b.date));
  for (const rec of sorted) {
    if (rec.values.length !== dim) {
      throw new Error(`${rec.date}: embedding has ${rec.values.length} dims, not ${dim}`);
    }
    lines.push(`${rec.date},${rec.count},${rec.values.map(formatValue).join(",")}`);
  }
  return lines.join("\n") + "\n";
}
