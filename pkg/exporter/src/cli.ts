/** Command-line entry points.
 *
 *   train  --data mnist --out CHECKPOINT_DIR [--epochs N] [--seed N]
 *          [--feature-dim 32] [--train-cap N] [--valid-cap N] [--test-cap N]
 *   export --ind mnist --ood fashionmnist[,cifar10,...] --layer-dim 32
 *          --out DIR --checkpoint CHECKPOINT_DIR [--seed N] [--caps ...]
 *
 * Exit codes: 0 success, 1 runtime failure, 2 usage error.
 */

import { initBackend } from "./backend";
import { DatasetUnavailableError, loadIndSplits } from "./datasets";
import { DEFAULT_CAPS, exportFeatures } from "./export";
import {
  DEFAULT_FEATURE_DIM,
  LayerShapeError,
  accuracy,
  buildModel,
  saveCheckpoint,
  trainModel,
} from "./model";

class UsageError extends Error {}

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new UsageError(`malformed arguments near '${key}'`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

function intFlag(flags: Map<string, string>, name: string, fallback: number): number {
  const raw = flags.get(name);
  if (raw === undefined) return fallback;
  const v = Number(raw);
  if (!Number.isInteger(v) || v < 0) {
    throw new UsageError(`--${name} must be a non-negative integer, got '${raw}'`);
  }
  return v;
}

async function cmdTrain(flags: Map<string, string>): Promise<number> {
  console.log(`backend: ${await initBackend()}`);
  const data = flags.get("data") ?? "mnist";
  const out = flags.get("out");
  if (!out) throw new UsageError("train needs --out CHECKPOINT_DIR");
  const seed = intFlag(flags, "seed", 0);
  const epochs = intFlag(flags, "epochs", 12);
  const featureDim = intFlag(flags, "feature-dim", DEFAULT_FEATURE_DIM);
  const caps = {
    train: intFlag(flags, "train-cap", DEFAULT_CAPS.train),
    valid: intFlag(flags, "valid-cap", DEFAULT_CAPS.valid),
    test: intFlag(flags, "test-cap", DEFAULT_CAPS.test),
  };

  const splits = loadIndSplits(data, caps, seed);
  console.log(
    `training on ${splits.train.images.length} rows ` +
      `(valid ${splits.valid.images.length}, test ${splits.test.images.length})`
  );
  const model = buildModel(featureDim, seed);
  await trainModel(model, splits.train, { epochs, seed, verbose: true });
  const valAcc = accuracy(model, splits.valid);
  const testAcc = accuracy(model, splits.test);
  console.log(`accuracy: valid ${valAcc.toFixed(4)}, test ${testAcc.toFixed(4)}`);
  await saveCheckpoint(model, out);
  console.log(`checkpoint written to ${out}`);
  return 0;
}

async function cmdExport(flags: Map<string, string>): Promise<number> {
  console.log(`backend: ${await initBackend()}`);
  const checkpoint = flags.get("checkpoint");
  const out = flags.get("out");
  if (!checkpoint || !out) {
    throw new UsageError("export needs --checkpoint CHECKPOINT_DIR and --out DIR");
  }
  const spec = {
    checkpointDir: checkpoint,
    indDataset: flags.get("ind") ?? "mnist",
    oodDatasets: (flags.get("ood") ?? "fashionmnist").split(",").filter(Boolean),
    layerDim: intFlag(flags, "layer-dim", DEFAULT_FEATURE_DIM),
    outDir: out,
    seed: intFlag(flags, "seed", 0),
    caps: {
      train: intFlag(flags, "train-cap", DEFAULT_CAPS.train),
      valid: intFlag(flags, "valid-cap", DEFAULT_CAPS.valid),
      test: intFlag(flags, "test-cap", DEFAULT_CAPS.test),
      ood: intFlag(flags, "ood-cap", DEFAULT_CAPS.ood),
    },
    accuracyGate: Number(flags.get("accuracy-gate") ?? "0.97"),
  };
  const result = await exportFeatures(spec);
  console.log(
    `exported ${result.files.length} datasets ` +
      `(InD test accuracy ${result.indTestAccuracy.toFixed(4)}):`
  );
  for (const f of result.files) console.log(`  ${f}`);
  return 0;
}

export async function main(argv: string[]): Promise<number> {
  try {
    const [command, ...rest] = argv;
    const flags = parseFlags(rest);
    if (command === "train") return await cmdTrain(flags);
    if (command === "export") return await cmdExport(flags);
    throw new UsageError(`unknown command '${command}' (use train or export)`);
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 2;
    }
    if (err instanceof DatasetUnavailableError || err instanceof LayerShapeError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    console.error(err);
    return 1;
  }
}

if (require.main === module) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
