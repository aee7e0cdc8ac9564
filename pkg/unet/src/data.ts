/** Frame selection and batch assembly over preprocessed cases.
 *
 * Cases arrive as per-case directories holding `imaging.nii.gz` (float32,
 * one normalized axial slice per z) and `segmentation.nii.gz` (uint8
 * labels 0 background / 1 kidney / 2 tumor). Each z-slice is one training
 * frame; the three roles differ only in which frames they see and which
 * binary target they regress:
 *
 *   kt_strict - every frame containing kidney or tumor, plus a random
 *               quarter-count of frames containing neither (~4:1 ratio)
 *   kt_lax    - exactly the kidney-containing frames
 *   tumor     - tumor frames doubled by horizontal flip, plus a small
 *               random sample of tumor-free frames
 *
 * Kidney-and-tumor roles target label >= 1, the tumor role label == 2.
 */

import * as path from "node:path";

import { MaskRole, Volume, readNifti } from "./nifti.js";
import { Rng } from "./rng.js";

export const IMAGING = "imaging.nii.gz";
export const SEGMENTATION = "segmentation.nii.gz";

/** Fraction of the (doubled) tumor-frame count drawn as negatives. */
export const TUMOR_NEGATIVE_RATE = 0.1;

export class ConfigError extends Error {}

export interface FrameFlags {
  caseId: string;
  sliceIndex: number;
  hasKidney: boolean;
  hasTumor: boolean;
}

export interface FrameRef {
  caseId: string;
  sliceIndex: number;
  /** Mirror the frame (and its target) left-right when sampling. */
  flipped: boolean;
}

export interface SelectOptions {
  tumorNegativeRate?: number;
}

function ref(f: FrameFlags, flipped = false): FrameRef {
  return { caseId: f.caseId, sliceIndex: f.sliceIndex, flipped };
}

/** Apply the role's selection rule to an annotation table.
 *
 * Deterministic for a fixed (table order, role, seed); negative draws use
 * a seeded generator. Positives keep table order, sampled negatives
 * follow in draw order.
 */
export function selectFrames(
  table: readonly FrameFlags[],
  role: MaskRole,
  seed: number,
  options: SelectOptions = {}
): FrameRef[] {
  const rng = new Rng(seed);
  if (role === "kt_lax") {
    const frames = table.filter((f) => f.hasKidney).map((f) => ref(f));
    if (frames.length === 0) {
      throw new ConfigError("kt_lax selection found no kidney-containing frames");
    }
    return frames;
  }
  if (role === "kt_strict") {
    const positives = table.filter((f) => f.hasKidney || f.hasTumor);
    if (positives.length === 0) {
      throw new ConfigError("kt_strict selection found no positive frames");
    }
    const pool = table.filter((f) => !f.hasKidney && !f.hasTumor);
    const want = Math.min(Math.floor(positives.length / 4), pool.length);
    const negatives = rng.sample(pool, want);
    return [...positives.map((f) => ref(f)), ...negatives.map((f) => ref(f))];
  }
  // tumor: double the positives by mirroring, pad with a few negatives
  const rate = options.tumorNegativeRate ?? TUMOR_NEGATIVE_RATE;
  if (!(rate >= 0)) {
    throw new ConfigError(`tumorNegativeRate must be >= 0, got ${rate}`);
  }
  const positives = table.filter((f) => f.hasTumor);
  if (positives.length === 0) {
    throw new ConfigError("tumor selection found no tumor-containing frames");
  }
  const doubled: FrameRef[] = [];
  for (const f of positives) {
    doubled.push(ref(f), ref(f, true));
  }
  const pool = table.filter((f) => !f.hasTumor);
  const want = Math.min(Math.floor(doubled.length * rate), pool.length);
  const negatives = rng.sample(pool, want);
  return [...doubled, ...negatives.map((f) => ref(f))];
}

/** Case loader with a volume cache and per-frame views. */
export class CaseStore {
  private cache = new Map<string, { imaging: Volume; labels: Volume }>();

  constructor(private root: string) {}

  load(caseId: string): { imaging: Volume; labels: Volume } {
    let entry = this.cache.get(caseId);
    if (!entry) {
      const dir = path.join(this.root, caseId);
      const imaging = readNifti(path.join(dir, IMAGING));
      const labels = readNifti(path.join(dir, SEGMENTATION));
      if (
        imaging.dims[0] !== labels.dims[0] ||
        imaging.dims[1] !== labels.dims[1] ||
        imaging.dims[2] !== labels.dims[2]
      ) {
        throw new ConfigError(
          `${caseId}: imaging dims [${imaging.dims}] != label dims [${labels.dims}]`
        );
      }
      entry = { imaging, labels };
      this.cache.set(caseId, entry);
    }
    return entry;
  }

  /** Scan label volumes into per-frame class presence flags. */
  frameTable(caseIds: readonly string[]): FrameFlags[] {
    const table: FrameFlags[] = [];
    for (const caseId of caseIds) {
      const { labels } = this.load(caseId);
      const [nx, ny, nz] = labels.dims;
      const plane = nx * ny;
      for (let z = 0; z < nz; z++) {
        let hasKidney = false;
        let hasTumor = false;
        const base = z * plane;
        for (let i = 0; i < plane; i++) {
          const v = labels.data[base + i];
          if (v >= 1) hasKidney = true;
          if (v === 2) {
            hasTumor = true;
            break; // tumor implies kidney; nothing left to learn here
          }
        }
        table.push({ caseId, sliceIndex: z, hasKidney, hasTumor });
      }
    }
    return table;
  }

  /** One frame as (input plane scaled to [0,1], binary target plane). */
  slicePair(frame: FrameRef, role: MaskRole): { x: Float32Array; y: Uint8Array } {
    const { imaging, labels } = this.load(frame.caseId);
    const [nx, ny] = imaging.dims;
    const plane = nx * ny;
    const base = frame.sliceIndex * plane;
    if (frame.sliceIndex < 0 || base + plane > imaging.data.length) {
      throw new ConfigError(`${frame.caseId}: slice ${frame.sliceIndex} out of range`);
    }
    const x = new Float32Array(plane);
    const y = new Uint8Array(plane);
    const positive = role === "tumor" ? 2 : 1;
    for (let row = 0; row < ny; row++) {
      for (let col = 0; col < nx; col++) {
        const src = base + row * nx + (frame.flipped ? nx - 1 - col : col);
        const dst = row * nx + col;
        x[dst] = imaging.data[src] / 255;
        const v = labels.data[src];
        y[dst] = (role === "tumor" ? v === positive : v >= positive) ? 1 : 0;
      }
    }
    return { x, y };
  }

  gridSize(caseId: string): [number, number, number] {
    return this.load(caseId).imaging.dims;
  }
}
