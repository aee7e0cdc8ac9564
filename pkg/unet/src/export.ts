/** Per-case prediction export into the mask-exchange layout.
 *
 * Every z-slice of a preprocessed case runs through the model; sigmoid
 * outputs are thresholded at 0.5 and the stacked binary volume lands at
 * `{out}/{case_id}_{role}.nii.gz`, which is exactly what the downstream
 * combiner reads. Masks carry no geometry beyond the grid itself.
 */

import * as tf from "@tensorflow/tfjs";

import { CaseStore } from "./data.js";
import { MaskRole, writeMask } from "./nifti.js";

export const THRESHOLD = 0.5;

export interface ExportOptions {
  threshold?: number;
  batchSize?: number;
}

/** Predict one case and return the thresholded mask volume buffer. */
export function predictCase(
  model: tf.LayersModel,
  store: CaseStore,
  caseId: string,
  role: MaskRole,
  options: ExportOptions = {}
): { mask: Uint8Array; dims: [number, number, number] } {
  const threshold = options.threshold ?? THRESHOLD;
  const batchSize = options.batchSize ?? 12;
  if (!(threshold > 0 && threshold < 1)) {
    throw new Error(`threshold must lie in (0, 1), got ${threshold}`);
  }
  const dims = store.gridSize(caseId);
  const [nx, ny, nz] = dims;
  const plane = nx * ny;
  const mask = new Uint8Array(plane * nz);
  for (let z0 = 0; z0 < nz; z0 += batchSize) {
    const count = Math.min(batchSize, nz - z0);
    const buf = new Float32Array(count * plane);
    for (let k = 0; k < count; k++) {
      const { x } = store.slicePair(
        { caseId, sliceIndex: z0 + k, flipped: false },
        role
      );
      buf.set(x, k * plane);
    }
    const probs = tf.tidy(() => {
      const xs = tf.tensor4d(buf, [count, ny, nx, 1]);
      return model.apply(xs, { training: false }) as tf.Tensor;
    });
    const values = probs.dataSync();
    probs.dispose();
    const base = z0 * plane;
    for (let i = 0; i < values.length; i++) {
      mask[base + i] = values[i] > threshold ? 1 : 0;
    }
  }
  return { mask, dims };
}

/** Predict and write the exchange file for each case; returns the paths. */
export function exportMasks(
  model: tf.LayersModel,
  store: CaseStore,
  caseIds: readonly string[],
  outDir: string,
  role: MaskRole,
  options: ExportOptions = {}
): string[] {
  const written: string[] = [];
  for (const caseId of caseIds) {
    const { mask, dims } = predictCase(model, store, caseId, role, options);
    written.push(writeMask(outDir, caseId, role, mask, dims));
  }
  return written;
}
