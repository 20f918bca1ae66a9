import { describe, expect, it } from "vitest";

import { formatValue, renderEmbeddingFile } from "../src/format.js";

describe("renderEmbeddingFile", () => {
  it("emits the header and fixed-point records in date order", () => {
    const text = renderEmbeddingFile(
      [
        { date: "2020-01-03", count: 2, values: [0.5, -0.25] },
        { date: "2020-01-02", count: 0, values: [0, 0] },
      ],
      2,
    );
    expect(text).toBe(
      "dim=2\n" +
      "2020-01-02,0,0.000000000000,0.000000000000\n" +
      "2020-01-03,2,0.500000000000,-0.250000000000\n",
    );
  });

  it("rejects dimension mismatches", () => {
    expect(() => renderEmbeddingFile([{ date: "2020-01-02", count: 1, values: [1] }], 2))
      .toThrow(/dims/);
  });

  it("never prints negative zero", () => {
    expect(formatValue(-0)).toBe("0.000000000000");
  });

  it("round-trips parsed values exactly at 12 decimals", () => {
    const values = [0.123456789012, -0.000000000001, 0.999999999999];
    const text = renderEmbeddingFile([{ date: "2020-01-02", count: 1, values }], 3);
    const parsed = text.split("\n")[1].split(",").slice(2).map(Number);
    for (let i = 0; i < values.length; i++) {
      expect(formatValue(parsed[i])).toBe(formatValue(values[i]));
    }
  });
});
