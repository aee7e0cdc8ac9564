/** Shared fixture: a tiny synthetic preprocessed case tree.
 *
 * Slices follow the preprocessed-grid conventions (float32 imaging in
 * 0..255, uint8 labels 0/1/2) at toy size. Slice roles are fixed so frame
 * selection has something of each kind: first and last slices are empty,
 * a band in the middle carries a tumor blob inside the kidney disc.
 */

import * as path from "node:path";

import { IMAGING, SEGMENTATION } from "../src/data.js";
import { Volume, writeNifti } from "../src/nifti.js";
import { Rng } from "../src/rng.js";

export interface SyntheticCase {
  imaging: Volume;
  labels: Volume;
  dims: [number, number, number];
}

export interface SyntheticOptions {
  size?: number;
  depth?: number;
  seed?: number;
}

/** Build one case in memory; kidney on slices 1..depth-2, tumor on the
 * middle band [3, depth-3). */
export function makeSyntheticCase(options: SyntheticOptions = {}): SyntheticCase {
  const size = options.size ?? 32;
  const depth = options.depth ?? 10;
  const seed = options.seed ?? 0;
  const rng = new Rng(seed);
  const plane = size * size;
  const imaging = new Float32Array(plane * depth);
  const labels = new Uint8Array(plane * depth);
  const kidneyR = size * 0.22;
  const tumorR = size * 0.09;
  for (let z = 0; z < depth; z++) {
    const hasKidney = z >= 1 && z <= depth - 2;
    const hasTumor = z >= 3 && z < depth - 3;
    const cx = size * 0.4 + (rng.next() - 0.5) * 2;
    const cy = size * 0.5 + (rng.next() - 0.5) * 2;
    for (let y = 0; y < size; y++) {
      for (let x = 0; x < size; x++) {
        const i = z * plane + y * size + x;
        const dk = Math.hypot(x - cx, y - cy);
        let value = 10;
        let label = 0;
        if (hasKidney && dk <= kidneyR) {
          value = 160;
          label = 1;
          if (hasTumor && Math.hypot(x - (cx + 2), y - cy) <= tumorR) {
            value = 230;
            label = 2;
          }
        }
        imaging[i] = Math.max(0, Math.min(255, value + (rng.next() - 0.5) * 10));
        labels[i] = label;
      }
    }
  }
  const dims: [number, number, number] = [size, size, depth];
  return {
    imaging: { data: imaging, dims, spacing: [1, 1, 1] },
    labels: { data: labels, dims, spacing: [1, 1, 1] },
    dims,
  };
}

/** Write a case into `{root}/{caseId}/` using the exchange file names. */
export function writeSyntheticCase(
  root: string,
  caseId: string,
  options: SyntheticOptions = {}
): SyntheticCase {
  const fixture = makeSyntheticCase(options);
  writeNifti(path.join(root, caseId, IMAGING), fixture.imaging);
  writeNifti(path.join(root, caseId, SEGMENTATION), fixture.labels);
  return fixture;
}

/** Moving-average smoothing for loss-curve trend checks. */
export function smoothed(values: readonly number[], window: number): number[] {
  const out: number[] = [];
  for (let i = 0; i + window <= values.length; i++) {
    let acc = 0;
    for (let j = 0; j < window; j++) acc += values[i + j];
    out.push(acc / window);
  }
  return out;
}
