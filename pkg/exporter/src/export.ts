/** The export pipeline: classifier checkpoint -> interchange datasets. */

import * as path from "path";

import * as tf from "@tensorflow/tfjs";

import {
  LabeledImages,
  assertDatasetAvailable,
  loadDataset,
  loadIndSplits,
} from "./datasets";
import {
  DEFAULT_FEATURE_DIM,
  accuracy,
  extract,
  loadCheckpoint,
} from "./model";
import { InterchangeRow, writeDataset } from "./interchange";

export interface ExportSpec {
  checkpointDir: string;
  indDataset: string;
  oodDatasets: string[];
  layerDim: number;
  outDir: string;
  seed: number;
  caps: { train: number; valid: number; test: number; ood: number };
  /** InD test accuracy the checkpoint must reach before export proceeds. */
  accuracyGate: number;
}

export const DEFAULT_CAPS = { train: 6000, valid: 1200, test: 2800, ood: 3000 };

export interface ExportResult {
  files: string[];
  indTestAccuracy: number;
}

function toRows(
  data: LabeledImages,
  extracted: { features: number[][]; scores: number[][] },
  forceLabel?: number
): InterchangeRow[] {
  return data.images.map((_, i) => ({
    label: forceLabel ?? data.labels[i],
    scores: extracted.scores[i],
    features: extracted.features[i],
  }));
}

export async function exportFeatures(spec: ExportSpec): Promise<ExportResult> {
  // Fail on unknown or unobtainable datasets before any heavy work.
  assertDatasetAvailable(spec.indDataset);
  spec.oodDatasets.forEach(assertDatasetAvailable);
  const model = await loadCheckpoint(spec.checkpointDir);
  const splits = loadIndSplits(
    spec.indDataset,
    { train: spec.caps.train, valid: spec.caps.valid, test: spec.caps.test },
    spec.seed
  );

  const acc = accuracy(model, splits.test);
  if (acc < spec.accuracyGate) {
    throw new Error(
      `classifier accuracy ${acc.toFixed(4)} on the InD test split is below ` +
        `the ${spec.accuracyGate} gate; refusing to export`
    );
  }

  const files: string[] = [];
  const emit = (name: string, data: LabeledImages, forceLabel?: number) => {
    const extracted = extract(model, spec.layerDim, data.images);
    const csv = path.join(spec.outDir, name);
    writeDataset(toRows(data, extracted, forceLabel), csv);
    files.push(csv);
  };

  emit(`ind_${spec.indDataset}_train.csv`, splits.train);
  emit(`ind_${spec.indDataset}_valid.csv`, splits.valid);
  emit(`ind_${spec.indDataset}_test.csv`, splits.test);
  for (const ood of spec.oodDatasets) {
    const data = loadDataset(ood, spec.caps.ood, spec.seed + 17, true);
    emit(`ood_${ood}.csv`, data, -1);
  }
  // The JS backend keeps no GPU state, but free what tidy missed.
  tf.disposeVariables();
  return { files, indTestAccuracy: acc };
}

export { DEFAULT_FEATURE_DIM };
