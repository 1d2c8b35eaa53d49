/** The small convolutional classifier and its feature tap.
 *
 * Architecture (28x28x1 input):
 *   conv 10@5x5 relu -> maxpool 2 -> conv 20@5x5 relu -> dropout ->
 *   maxpool 2 -> flatten (320) -> dense 160 relu -> dropout ->
 *   dense FEATURE_DIM (linear, the exported feature layer "features") ->
 *   dense 10 (linear, the exported score layer "logits").
 *
 * Each conv block is expressed as a fixed im2col layer (a convolution with
 * constant one-hot filters that lays every kxk patch out along the channel
 * axis) followed by a trainable dense layer over that axis.  This is
 * algebraically identical to a standard convolution, but the only
 * gradients needed are matMul gradients and the conv *data* gradient,
 * which the fast wasm backend provides (it ships no conv filter-gradient
 * kernel, and the native tfjs-node binary cannot be downloaded here).
 *
 * Scores are the final layer's pre-normalization outputs; no softmax is
 * ever applied on the export path.
 */

import * as fs from "fs";
import * as path from "path";

import * as tf from "@tensorflow/tfjs";

import { IMAGE_SIDE, LabeledImages, NUM_CLASSES } from "./datasets";
import { shuffledIndices } from "./rng";

export const DEFAULT_FEATURE_DIM = 32;
export const FEATURE_LAYER = "features";
export const LOGIT_LAYER = "logits";
const CHECKPOINT_VERSION = 1;

export class LayerShapeError extends Error {}

class Im2Col extends tf.layers.Layer {
  static className = "Im2Col";
  private readonly kernelSize: number;

  constructor(config: { kernelSize: number; name?: string }) {
    super(config as any);
    this.kernelSize = config.kernelSize;
  }

  computeOutputShape(inputShape: tf.Shape): tf.Shape {
    const [b, h, w, c] = inputShape as number[];
    const k = this.kernelSize;
    return [b, h - k + 1, w - k + 1, k * k * c];
  }

  call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    const x = (Array.isArray(inputs) ? inputs[0] : inputs) as tf.Tensor4D;
    const k = this.kernelSize;
    const c = x.shape[3];
    return tf.tidy(() => {
      const onehot = tf.eye(k * k * c).reshape([k, k, c, k * k * c]) as tf.Tensor4D;
      return tf.conv2d(x, onehot, 1, "valid");
    });
  }

  getConfig(): tf.serialization.ConfigDict {
    return { ...super.getConfig(), kernelSize: this.kernelSize };
  }
}
tf.serialization.registerClass(Im2Col);

function convBlock(
  x: tf.SymbolicTensor,
  filters: number,
  kernelSize: number,
  init: ReturnType<typeof tf.initializers.glorotUniform>
): tf.SymbolicTensor {
  const patches = new Im2Col({ kernelSize }).apply(x) as tf.SymbolicTensor;
  return tf.layers
    .dense({ units: filters, activation: "relu", kernelInitializer: init })
    .apply(patches) as tf.SymbolicTensor;
}

export function buildModel(featureDim = DEFAULT_FEATURE_DIM, seed = 0): tf.LayersModel {
  const init = (s: number) => tf.initializers.glorotUniform({ seed: seed + s });
  const input = tf.input({ shape: [IMAGE_SIDE, IMAGE_SIDE, 1] });
  let x = convBlock(input, 10, 5, init(1));
  x = tf.layers.maxPooling2d({ poolSize: 2 }).apply(x) as tf.SymbolicTensor;
  x = convBlock(x, 20, 5, init(2));
  x = tf.layers.dropout({ rate: 0.25, seed: seed + 3 }).apply(x) as tf.SymbolicTensor;
  x = tf.layers.maxPooling2d({ poolSize: 2 }).apply(x) as tf.SymbolicTensor;
  x = tf.layers.flatten().apply(x) as tf.SymbolicTensor;
  x = tf.layers
    .dense({ units: 160, activation: "relu", kernelInitializer: init(4) })
    .apply(x) as tf.SymbolicTensor;
  x = tf.layers.dropout({ rate: 0.25, seed: seed + 5 }).apply(x) as tf.SymbolicTensor;
  const features = tf.layers
    .dense({ units: featureDim, name: FEATURE_LAYER, kernelInitializer: init(6) })
    .apply(x) as tf.SymbolicTensor;
  const logits = tf.layers
    .dense({ units: NUM_CLASSES, name: LOGIT_LAYER, kernelInitializer: init(7) })
    .apply(features) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: logits });
}

export function toTensor(images: Float32Array[]): tf.Tensor4D {
  const flat = new Float32Array(images.length * IMAGE_SIDE * IMAGE_SIDE);
  images.forEach((img, i) => flat.set(img, i * IMAGE_SIDE * IMAGE_SIDE));
  return tf.tensor4d(flat, [images.length, IMAGE_SIDE, IMAGE_SIDE, 1]);
}

export interface TrainOptions {
  epochs?: number;
  batchSize?: number;
  seed?: number;
  verbose?: boolean;
}

/** Train with a pre-shuffled, fixed data order so runs are reproducible. */
export async function trainModel(
  model: tf.LayersModel,
  train: LabeledImages,
  options: TrainOptions = {}
): Promise<void> {
  const { epochs = 12, batchSize = 128, seed = 0, verbose = false } = options;
  model.compile({
    optimizer: tf.train.adam(1e-3),
    loss: (labels, logits) => tf.losses.softmaxCrossEntropy(labels, logits),
    metrics: ["accuracy"],
  });
  const order = shuffledIndices(train.images.length, seed);
  const xs = toTensor(order.map((i) => train.images[i]));
  const ys = tf.oneHot(
    tf.tensor1d(order.map((i) => train.labels[i]), "int32"),
    NUM_CLASSES
  );
  try {
    await model.fit(xs, ys, {
      epochs,
      batchSize,
      shuffle: false,
      verbose: verbose ? 1 : 0,
    });
  } finally {
    xs.dispose();
    ys.dispose();
  }
}

/** Classification accuracy of the logits' argmax. */
export function accuracy(model: tf.LayersModel, data: LabeledImages): number {
  let correct = 0;
  const batch = 512;
  for (let i = 0; i < data.images.length; i += batch) {
    const slice = data.images.slice(i, i + batch);
    const xs = toTensor(slice);
    const pred = tf.tidy(
      () => (model.predict(xs) as tf.Tensor).argMax(-1).arraySync() as number[]
    );
    xs.dispose();
    pred.forEach((p, j) => {
      if (p === data.labels[i + j]) correct++;
    });
  }
  return correct / data.images.length;
}

/** A two-output view of the trained model: [features, logits]. */
export function featureModel(model: tf.LayersModel, featureDim: number): tf.LayersModel {
  let featLayer: tf.layers.Layer;
  try {
    featLayer = model.getLayer(FEATURE_LAYER);
  } catch {
    throw new LayerShapeError(
      `model has no layer named '${FEATURE_LAYER}'; cannot tap features`
    );
  }
  const width = (featLayer.outputShape as number[])[1];
  if (width !== featureDim) {
    throw new LayerShapeError(
      `feature layer is ${width} wide but ${featureDim} was requested`
    );
  }
  const logitLayer = model.getLayer(LOGIT_LAYER);
  return tf.model({
    inputs: model.inputs,
    outputs: [featLayer.output as tf.SymbolicTensor, logitLayer.output as tf.SymbolicTensor],
  });
}

/** Batched forward pass returning per-row features and logits. */
export function extract(
  model: tf.LayersModel,
  featureDim: number,
  images: Float32Array[]
): { features: number[][]; scores: number[][] } {
  const tap = featureModel(model, featureDim);
  const features: number[][] = [];
  const scores: number[][] = [];
  const batch = 256;
  for (let i = 0; i < images.length; i += batch) {
    const xs = toTensor(images.slice(i, i + batch));
    const [f, s] = tap.predict(xs) as tf.Tensor[];
    (f.arraySync() as number[][]).forEach((row) => features.push(row));
    (s.arraySync() as number[][]).forEach((row) => scores.push(row));
    xs.dispose();
    f.dispose();
    s.dispose();
  }
  return { features, scores };
}

/** Save/load checkpoints without tfjs-node: topology + weight specs in
 * JSON, raw weight bytes alongside. */
export async function saveCheckpoint(model: tf.LayersModel, dir: string): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      const weightData = artifacts.weightData as ArrayBuffer;
      fs.writeFileSync(path.join(dir, "weights.bin"), Buffer.from(weightData));
      fs.writeFileSync(
        path.join(dir, "model.json"),
        JSON.stringify(
          {
            checkpointVersion: CHECKPOINT_VERSION,
            modelTopology: artifacts.modelTopology,
            weightSpecs: artifacts.weightSpecs,
          },
          null,
          1
        )
      );
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: "JSON" } };
    })
  );
}

export async function loadCheckpoint(dir: string): Promise<tf.LayersModel> {
  const doc = JSON.parse(fs.readFileSync(path.join(dir, "model.json"), "utf8"));
  if (doc.checkpointVersion !== CHECKPOINT_VERSION) {
    throw new Error(
      `checkpoint version ${doc.checkpointVersion}, expected ${CHECKPOINT_VERSION}`
    );
  }
  const weightData = fs.readFileSync(path.join(dir, "weights.bin"));
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: doc.modelTopology,
      weightSpecs: doc.weightSpecs,
      weightData: weightData.buffer.slice(
        weightData.byteOffset,
        weightData.byteOffset + weightData.byteLength
      ),
    })
  );
}
