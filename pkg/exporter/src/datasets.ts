/** Image sources for the exporter.
 *
 * Real datasets come from npm packages that bundle the actual images
 * (`mnist`: ~1000 digits per class at 28x28, pixels already in [0, 1];
 * `fashion-mnist`: 7000 images per class, pixels in [0, 255]).  CIFAR-10
 * and SVHN have no bundled-data packages on the mirror and this sandbox
 * cannot download, so requesting them reports the gap explicitly.
 *
 * A `synthetic` source generates class-structured images from a seed so
 * the full pipeline is testable without any real data.
 */

import * as tf from "@tensorflow/tfjs";

import { gaussian, mulberry32, shuffledIndices } from "./rng";

export const IMAGE_SIDE = 28;
export const NUM_CLASSES = 10;

export interface LabeledImages {
  /** Flattened 28x28 grayscale images, values in [0, 1]. */
  images: Float32Array[];
  /** Class labels aligned with images; -1 marks out-of-distribution rows. */
  labels: number[];
}

export class DatasetUnavailableError extends Error {}

/** Resize/recolor an arbitrary [h, w, c] image stack to 28x28 grayscale. */
export function conformImages(
  data: Float32Array[],
  height: number,
  width: number,
  channels: number
): Float32Array[] {
  if (height === IMAGE_SIDE && width === IMAGE_SIDE && channels === 1) {
    return data;
  }
  return tf.tidy(() => {
    const flat = new Float32Array(data.length * height * width * channels);
    data.forEach((d, i) => flat.set(d, i * height * width * channels));
    const stack = tf.tensor4d(flat, [data.length, height, width, channels]);
    const gray = channels === 1 ? stack : stack.mean(3, true);
    const resized = tf.image.resizeBilinear(gray as tf.Tensor4D, [IMAGE_SIDE, IMAGE_SIDE]);
    const values = resized.dataSync() as Float32Array;
    const per = IMAGE_SIDE * IMAGE_SIDE;
    return data.map((_, i) => values.slice(i * per, (i + 1) * per));
  });
}

function takePerClass(
  perClass: Float32Array[][],
  cap: number,
  seed: number,
  label: (k: number) => number
): LabeledImages {
  const images: Float32Array[] = [];
  const labels: number[] = [];
  const counts = perClass.map((c) => c.length);
  const total = counts.reduce((a, b) => a + b, 0);
  const want = Math.min(cap, total);
  // Proportional per-class quotas, then seeded order within each class.
  for (let k = 0; k < perClass.length; k++) {
    const quota = Math.min(counts[k], Math.round((want * counts[k]) / total));
    const order = shuffledIndices(counts[k], seed + 1000 * k);
    for (let i = 0; i < quota; i++) {
      images.push(perClass[k][order[i]]);
      labels.push(label(k));
    }
  }
  return { images, labels };
}

function loadMnistPerClass(): Float32Array[][] {
  // The `mnist` package stores each digit class as one flat array of
  // concatenated 784-pixel images, already normalized to [0, 1].
  const mnist = require("mnist");
  const perClass: Float32Array[][] = [];
  for (let k = 0; k < NUM_CLASSES; k++) {
    const raw: number[] = mnist[k].raw;
    const count = Math.floor(raw.length / 784);
    const cls: Float32Array[] = [];
    for (let i = 0; i < count; i++) {
      cls.push(Float32Array.from(raw.slice(i * 784, (i + 1) * 784)));
    }
    perClass.push(cls);
  }
  return perClass;
}

function loadFashionPerClass(): Float32Array[][] {
  // `fashion-mnist` stores nested arrays with byte pixels.
  const fashion = require("fashion-mnist");
  const perClass: Float32Array[][] = [];
  for (let k = 0; k < NUM_CLASSES; k++) {
    const raw: number[][] = fashion[k].raw;
    perClass.push(raw.map((img) => Float32Array.from(img, (v) => v / 255)));
  }
  return perClass;
}

/** Deterministic class-structured fake images: one bright block per class
 * on a noisy background.  Good enough to train a tiny CNN to high accuracy
 * in a few seconds, which is all the tests need. */
export function syntheticPerClass(
  perClassCount: number,
  seed: number,
  offset = 0
): Float32Array[][] {
  const perClass: Float32Array[][] = [];
  for (let k = 0; k < NUM_CLASSES; k++) {
    const rand = mulberry32(seed + 7919 * k);
    const gauss = gaussian(rand);
    const cls: Float32Array[] = [];
    const row0 = 2 + 2 * Math.floor(k / 2) + offset;
    const col0 = k % 2 === 0 ? 4 : 16;
    for (let i = 0; i < perClassCount; i++) {
      const img = new Float32Array(IMAGE_SIDE * IMAGE_SIDE);
      for (let j = 0; j < img.length; j++) {
        img[j] = Math.min(1, Math.max(0, 0.08 + 0.04 * gauss()));
      }
      for (let r = row0; r < row0 + 6; r++) {
        for (let c = col0; c < col0 + 8; c++) {
          img[r * IMAGE_SIDE + c] = Math.min(1, 0.9 + 0.05 * gauss());
        }
      }
      cls.push(img);
    }
    perClass.push(cls);
  }
  return perClass;
}

// Keys are normalized: lower case, separators stripped.
const LOADERS: Record<string, () => Float32Array[][]> = {
  mnist: loadMnistPerClass,
  fashionmnist: loadFashionPerClass,
  synthetic: () => syntheticPerClass(200, 1234),
  syntheticshifted: () => syntheticPerClass(200, 4321, 14),
};

const UNAVAILABLE: Record<string, string> = {
  cifar10:
    "cifar10: the npm 'cifar-10' package ships no data (its fetch script " +
    "needs network access, unavailable in this environment)",
  svhn: "svhn: no bundled-data package exists on the mirror",
};

export function availableDatasets(): string[] {
  return Object.keys(LOADERS);
}

/** Validate a dataset name without loading anything. */
export function assertDatasetAvailable(name: string): void {
  const key = name.toLowerCase().replace(/[-_]/g, "");
  if (key in UNAVAILABLE) {
    throw new DatasetUnavailableError(UNAVAILABLE[key]);
  }
  if (!(key in LOADERS)) {
    throw new DatasetUnavailableError(
      `unknown dataset '${name}' (available: ${availableDatasets().join(", ")})`
    );
  }
}

/** Load up to `cap` rows of a named dataset with the given label policy. */
export function loadDataset(
  name: string,
  cap: number,
  seed: number,
  asOod = false
): LabeledImages {
  const key = name.toLowerCase().replace(/[-_]/g, "");
  if (key in UNAVAILABLE) {
    throw new DatasetUnavailableError(UNAVAILABLE[key]);
  }
  const loader = LOADERS[key];
  if (!loader) {
    throw new DatasetUnavailableError(
      `unknown dataset '${name}' (available: ${availableDatasets().join(", ")})`
    );
  }
  const perClass = loader();
  return takePerClass(perClass, cap, seed, (k) => (asOod ? -1 : k));
}

/** Three disjoint in-distribution splits drawn without overlap. */
export function loadIndSplits(
  name: string,
  caps: { train: number; valid: number; test: number },
  seed: number
): { train: LabeledImages; valid: LabeledImages; test: LabeledImages } {
  const key = name.toLowerCase().replace(/[-_]/g, "");
  const loader = LOADERS[key];
  if (!loader) {
    if (key in UNAVAILABLE) throw new DatasetUnavailableError(UNAVAILABLE[key]);
    throw new DatasetUnavailableError(`unknown dataset '${name}'`);
  }
  const perClass = loader();
  const counts = perClass.map((c) => c.length);
  const total = counts.reduce((a, b) => a + b, 0);
  const wantTotal = caps.train + caps.valid + caps.test;
  const scale = Math.min(1, total / wantTotal);

  const out = {
    train: { images: [], labels: [] } as LabeledImages,
    valid: { images: [], labels: [] } as LabeledImages,
    test: { images: [], labels: [] } as LabeledImages,
  };
  for (let k = 0; k < perClass.length; k++) {
    const order = shuffledIndices(counts[k], seed + 1000 * k);
    const frac = counts[k] / total;
    const nTrain = Math.floor(caps.train * scale * frac);
    const nValid = Math.floor(caps.valid * scale * frac);
    const nTest = Math.min(
      Math.floor(caps.test * scale * frac),
      counts[k] - nTrain - nValid
    );
    let cursor = 0;
    for (const [split, count] of [
      ["train", nTrain],
      ["valid", nValid],
      ["test", nTest],
    ] as const) {
      for (let i = 0; i < count; i++) {
        out[split].images.push(perClass[k][order[cursor++]]);
        out[split].labels.push(k);
      }
    }
  }
  return out;
}
