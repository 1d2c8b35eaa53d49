/** Writer for the gpood dataset interchange format.
 *
 * CSV with header `label,f_0,...,f_{K-1},xi_0,...,xi_{p-1}` plus a JSON
 * manifest next to it (`<basename>.manifest.json`) counting labeled rows
 * under "n" and label -1 rows under "n_unlabeled".  JavaScript's default
 * number-to-string conversion already produces the shortest decimal that
 * round-trips a double, which is exactly what the format asks for.
 */

import * as fs from "fs";
import * as path from "path";

export interface InterchangeRow {
  label: number;
  scores: number[];
  features: number[];
}

export function manifestPath(csvPath: string): string {
  const parsed = path.parse(csvPath);
  return path.join(parsed.dir, `${parsed.name}.manifest.json`);
}

function formatValue(v: number): string {
  if (!Number.isFinite(v)) {
    throw new Error(`non-finite value ${v} cannot be exported`);
  }
  return String(v);
}

export function writeDataset(rows: InterchangeRow[], csvPath: string): void {
  if (rows.length === 0) {
    throw new Error("refusing to write an empty dataset");
  }
  const K = rows[0].scores.length;
  const p = rows[0].features.length;
  const header = [
    "label",
    ...Array.from({ length: K }, (_, j) => `f_${j}`),
    ...Array.from({ length: p }, (_, j) => `xi_${j}`),
  ].join(",");

  const lines = [header];
  const classCounts = new Array(K).fill(0);
  let unlabeled = 0;
  for (const row of rows) {
    if (row.scores.length !== K || row.features.length !== p) {
      throw new Error("inconsistent row widths in export batch");
    }
    if (row.label === -1) {
      unlabeled++;
    } else if (row.label >= 0 && row.label < K) {
      classCounts[row.label]++;
    } else {
      throw new Error(`label ${row.label} outside {-1} U [0, ${K})`);
    }
    lines.push(
      [
        String(row.label),
        ...row.scores.map(formatValue),
        ...row.features.map(formatValue),
      ].join(",")
    );
  }
  fs.mkdirSync(path.dirname(csvPath), { recursive: true });
  fs.writeFileSync(csvPath, lines.join("\n") + "\n");

  const manifest = {
    K,
    class_counts: classCounts,
    n: rows.length - unlabeled,
    n_unlabeled: unlabeled,
    p,
  };
  fs.writeFileSync(manifestPath(csvPath), JSON.stringify(manifest) + "\n");
}
