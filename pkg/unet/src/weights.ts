/** Checkpoint layout: `model.json` (topology + weight manifest) next to
 * `weights.bin` (raw little-endian weight payload) and `meta.json` (role
 * plus the numbers needed to reproduce or resume a run).
 *
 * The stock file:// IO handler lives in the native binding, which is not
 * a dependency here, so serialization goes through the in-memory handler.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { MaskRole } from "./nifti.js";

const MODEL_JSON = "model.json";
const WEIGHTS_BIN = "weights.bin";
const META_JSON = "meta.json";

export interface CheckpointMeta {
  role: MaskRole;
  posWeight: number;
  inputSize: number;
  seed: number;
}

export async function saveModel(
  model: tf.LayersModel,
  dir: string,
  meta: CheckpointMeta
): Promise<void> {
  let artifacts: tf.io.ModelArtifacts | undefined;
  await model.save(
    tf.io.withSaveHandler(async (a) => {
      artifacts = a;
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(0), // pinned: checkpoint bytes stay reproducible
          modelTopologyType: "JSON",
        },
      };
    })
  );
  if (!artifacts || !artifacts.weightData) {
    throw new Error("model serialization produced no weight data");
  }
  fs.mkdirSync(dir, { recursive: true });
  fs.writeFileSync(
    path.join(dir, MODEL_JSON),
    JSON.stringify(
      { modelTopology: artifacts.modelTopology, weightSpecs: artifacts.weightSpecs },
      null,
      1
    )
  );
  const weights = artifacts.weightData as ArrayBuffer;
  fs.writeFileSync(path.join(dir, WEIGHTS_BIN), Buffer.from(weights));
  fs.writeFileSync(path.join(dir, META_JSON), JSON.stringify(meta, null, 1) + "\n");
}

export async function loadModel(
  dir: string
): Promise<{ model: tf.LayersModel; meta: CheckpointMeta }> {
  const spec = JSON.parse(fs.readFileSync(path.join(dir, MODEL_JSON), "utf8"));
  const meta = JSON.parse(
    fs.readFileSync(path.join(dir, META_JSON), "utf8")
  ) as CheckpointMeta;
  const raw = fs.readFileSync(path.join(dir, WEIGHTS_BIN));
  const weightData = raw.buffer.slice(raw.byteOffset, raw.byteOffset + raw.byteLength);
  const model = await tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: spec.modelTopology,
      weightSpecs: spec.weightSpecs,
      weightData,
    })
  );
  return { model, meta };
}
