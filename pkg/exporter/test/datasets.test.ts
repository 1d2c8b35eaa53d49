import { describe, expect, it } from "vitest";

import {
  DatasetUnavailableError,
  IMAGE_SIDE,
  conformImages,
  loadDataset,
  loadIndSplits,
  syntheticPerClass,
} from "../src/datasets";

describe("syntheticPerClass", () => {
  it("is deterministic for a fixed seed", () => {
    const a = syntheticPerClass(5, 42);
    const b = syntheticPerClass(5, 42);
    expect(a.length).toBe(10);
    for (let k = 0; k < 10; k++) {
      expect(Array.from(a[k][0])).toEqual(Array.from(b[k][0]));
    }
  });

  it("places a distinct bright block per class", () => {
    const perClass = syntheticPerClass(3, 1);
    const bright = perClass.map((cls) => {
      const img = cls[0];
      let best = 0;
      img.forEach((v, i) => {
        if (v > img[best]) best = i;
      });
      return Math.floor(best / IMAGE_SIDE / 2);
    });
    expect(new Set(bright).size).toBeGreaterThan(2);
  });
});

describe("loadDataset", () => {
  it("marks OOD rows with label -1 and respects the cap", () => {
    const ds = loadDataset("synthetic", 120, 0, true);
    expect(ds.images.length).toBeLessThanOrEqual(120);
    expect(ds.labels.every((l) => l === -1)).toBe(true);
  });

  it("keeps class labels for in-distribution loads", () => {
    const ds = loadDataset("synthetic", 200, 0);
    expect(new Set(ds.labels).size).toBe(10);
  });

  it("explains missing downloads for cifar10 and svhn", () => {
    expect(() => loadDataset("cifar10", 10, 0, true)).toThrow(DatasetUnavailableError);
    expect(() => loadDataset("svhn", 10, 0, true)).toThrow(/no bundled-data/);
  });

  it("rejects unknown dataset names", () => {
    expect(() => loadDataset("imagenet", 10, 0)).toThrow(/unknown dataset/);
  });
});

describe("loadIndSplits", () => {
  it("produces disjoint splits with roughly proportional sizes", () => {
    const splits = loadIndSplits(
      "synthetic",
      { train: 1000, valid: 200, test: 400 },
      3
    );
    const total =
      splits.train.images.length +
      splits.valid.images.length +
      splits.test.images.length;
    expect(total).toBeLessThanOrEqual(2000);
    expect(splits.train.images.length).toBeGreaterThan(splits.test.images.length);
    expect(splits.valid.images.length).toBeGreaterThan(0);
    const key = (img: Float32Array) => img.slice(0, 12).join(",");
    const seen = new Set(splits.train.images.map(key));
    const overlap = splits.test.images.filter((img) => seen.has(key(img)));
    expect(overlap.length).toBe(0);
  });
});

describe("conformImages", () => {
  it("passes 28x28x1 through untouched", () => {
    const img = new Float32Array(IMAGE_SIDE * IMAGE_SIDE).fill(0.5);
    const out = conformImages([img], IMAGE_SIDE, IMAGE_SIDE, 1);
    expect(out[0]).toBe(img);
  });

  it("resizes and grayscales arbitrary shapes", () => {
    const src = new Float32Array(14 * 14 * 3).fill(0.4);
    const out = conformImages([src], 14, 14, 3);
    expect(out[0].length).toBe(IMAGE_SIDE * IMAGE_SIDE);
    out[0].forEach((v) => expect(Math.abs(v - 0.4)).toBeLessThan(1e-5));
  });
});
