/** Backend selection: wasm when available (an order of magnitude faster in
 * plain Node), falling back to the pure-JS cpu backend. */

import * as path from "path";

import * as tf from "@tensorflow/tfjs";

let initialized: Promise<string> | null = null;

export function initBackend(): Promise<string> {
  if (!initialized) {
    initialized = (async () => {
      try {
        const wasm = require("@tensorflow/tfjs-backend-wasm");
        const dist = path.join(
          path.dirname(require.resolve("@tensorflow/tfjs-backend-wasm/package.json")),
          "dist"
        );
        wasm.setWasmPaths(dist + path.sep);
        if (await tf.setBackend("wasm")) {
          await tf.ready();
          return tf.getBackend();
        }
      } catch {
        // fall through to cpu
      }
      await tf.setBackend("cpu");
      await tf.ready();
      return tf.getBackend();
    })();
  }
  return initialized;
}
