import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { InterchangeRow, manifestPath, writeDataset } from "../src/interchange";

let dir: string;

beforeAll(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "interchange-"));
});

afterAll(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function rows(): InterchangeRow[] {
  return [
    { label: 0, scores: [1.5, -0.25], features: [0.1, 0.2, 0.3] },
    { label: 1, scores: [1e-7, 12.125], features: [-1.0, 2.5, 1 / 3] },
    { label: -1, scores: [0.0, 0.0], features: [9.0, 9.0, 9.0] },
  ];
}

describe("writeDataset", () => {
  it("writes the expected header and row count", () => {
    const csv = path.join(dir, "a.csv");
    writeDataset(rows(), csv);
    const lines = fs.readFileSync(csv, "utf8").trim().split("\n");
    expect(lines[0]).toBe("label,f_0,f_1,xi_0,xi_1,xi_2");
    expect(lines).toHaveLength(4);
  });

  it("writes a manifest that counts labeled and unlabeled rows separately", () => {
    const csv = path.join(dir, "b.csv");
    writeDataset(rows(), csv);
    const manifest = JSON.parse(fs.readFileSync(manifestPath(csv), "utf8"));
    expect(manifest).toEqual({
      K: 2,
      p: 3,
      n: 2,
      n_unlabeled: 1,
      class_counts: [1, 1],
    });
  });

  it("round-trips every value exactly through decimal text", () => {
    const csv = path.join(dir, "c.csv");
    const data = rows();
    writeDataset(data, csv);
    const lines = fs.readFileSync(csv, "utf8").trim().split("\n").slice(1);
    lines.forEach((line, i) => {
      const fields = line.split(",");
      expect(Number(fields[0])).toBe(data[i].label);
      const values = fields.slice(1).map(Number);
      expect(values.slice(0, 2)).toEqual(data[i].scores);
      expect(values.slice(2)).toEqual(data[i].features);
    });
  });

  it("rejects empty batches, bad labels, ragged rows, non-finite values", () => {
    expect(() => writeDataset([], path.join(dir, "x.csv"))).toThrow(/empty/);
    expect(() =>
      writeDataset(
        [{ label: 5, scores: [1, 2], features: [0] }],
        path.join(dir, "x.csv")
      )
    ).toThrow(/label 5/);
    expect(() =>
      writeDataset(
        [
          { label: 0, scores: [1, 2], features: [0] },
          { label: 0, scores: [1], features: [0] },
        ],
        path.join(dir, "x.csv")
      )
    ).toThrow(/inconsistent/);
    expect(() =>
      writeDataset(
        [{ label: 0, scores: [Infinity, 0], features: [0] }],
        path.join(dir, "x.csv")
      )
    ).toThrow(/non-finite/);
  });
});
