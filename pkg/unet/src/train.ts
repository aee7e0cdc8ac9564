/** Training loop: Adam over weighted binary cross-entropy.
 *
 * One model per role; frames are shuffled per epoch, batched, and stepped
 * with a fixed recipe (batch 12, lr 1e-4, beta1 0.9, beta2 0.99, ten
 * epochs, 80:10:10 split). Everything draws from one seeded generator so
 * a rerun replays the exact batch sequence.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { CaseStore, FrameRef } from "./data.js";
import { posWeightOf, softDice, weightedBce } from "./loss.js";
import { buildModel, ModelConfig } from "./model.js";
import { MaskRole } from "./nifti.js";
import { Rng } from "./rng.js";

export interface TrainerConfig {
  role: MaskRole;
  batchSize: number;
  learningRate: number;
  beta1: number;
  beta2: number;
  epochs: number;
  /** Train/validation/test fractions; must sum to 1. */
  split: [number, number, number];
  /** Positive-class loss weight; derived from the train split when absent. */
  posWeight?: number;
  seed: number;
  model?: Partial<ModelConfig>;
}

export const DEFAULT_TRAINER: Omit<TrainerConfig, "role"> = {
  batchSize: 12,
  learningRate: 1e-4,
  beta1: 0.9,
  beta2: 0.99,
  epochs: 10,
  split: [0.8, 0.1, 0.1],
  seed: 0,
};

export function trainerConfig(
  role: MaskRole,
  overrides: Partial<Omit<TrainerConfig, "role">> = {}
): TrainerConfig {
  const cfg = { role, ...DEFAULT_TRAINER, ...overrides };
  validateTrainerConfig(cfg);
  return cfg;
}

export function validateTrainerConfig(cfg: TrainerConfig): void {
  if (!Number.isInteger(cfg.batchSize) || cfg.batchSize < 1) {
    throw new Error(`batchSize must be a positive integer, got ${cfg.batchSize}`);
  }
  if (!Number.isInteger(cfg.epochs) || cfg.epochs < 1) {
    throw new Error(`epochs must be a positive integer, got ${cfg.epochs}`);
  }
  if (!(cfg.learningRate > 0)) {
    throw new Error(`learningRate must be positive, got ${cfg.learningRate}`);
  }
  const total = cfg.split[0] + cfg.split[1] + cfg.split[2];
  if (cfg.split.some((f) => f < 0) || Math.abs(total - 1) > 1e-9) {
    throw new Error(`split fractions must be >= 0 and sum to 1, got [${cfg.split}]`);
  }
  if (cfg.split[0] <= 0) {
    throw new Error("train fraction must be positive");
  }
  if (cfg.posWeight !== undefined && !(cfg.posWeight > 0)) {
    throw new Error(`posWeight must be positive, got ${cfg.posWeight}`);
  }
}

export interface FrameSplit {
  train: FrameRef[];
  val: FrameRef[];
  test: FrameRef[];
}

/** Seeded shuffle, then cut at floor(n*train) and floor(n*(train+val)). */
export function splitFrames(
  frames: readonly FrameRef[],
  split: [number, number, number],
  seed: number
): FrameSplit {
  const shuffled = new Rng(seed).shuffle(frames.slice());
  const n = shuffled.length;
  const a = Math.floor(n * split[0]);
  const b = Math.floor(n * (split[0] + split[1]));
  return {
    train: shuffled.slice(0, a),
    val: shuffled.slice(a, b),
    test: shuffled.slice(b),
  };
}

/** Stack frames into network input/target tensors [b, h, w, 1]. */
export function makeBatch(
  store: CaseStore,
  frames: readonly FrameRef[],
  role: MaskRole
): { xs: tf.Tensor4D; ys: tf.Tensor4D } {
  if (frames.length === 0) {
    throw new Error("cannot build an empty batch");
  }
  const [nx, ny] = store.gridSize(frames[0].caseId);
  const plane = nx * ny;
  const xs = new Float32Array(frames.length * plane);
  const ys = new Float32Array(frames.length * plane);
  frames.forEach((frame, i) => {
    const pair = store.slicePair(frame, role);
    xs.set(pair.x, i * plane);
    ys.set(pair.y, i * plane);
  });
  return {
    xs: tf.tensor4d(xs, [frames.length, ny, nx, 1]),
    ys: tf.tensor4d(ys, [frames.length, ny, nx, 1]),
  };
}

/** One optimizer step; raises on a non-finite loss instead of drifting on. */
export function stepOnBatch(
  model: tf.LayersModel,
  optimizer: tf.Optimizer,
  xs: tf.Tensor4D,
  ys: tf.Tensor4D,
  posWeight: number
): number {
  const cost = tf.tidy(
    () =>
      optimizer.minimize(
        () =>
          weightedBce(ys, model.apply(xs, { training: true }) as tf.Tensor, posWeight),
        true
      )!
  );
  const loss = cost.dataSync()[0];
  cost.dispose();
  if (!Number.isFinite(loss)) {
    throw new Error(
      `training diverged: loss=${loss}; lower the learning rate or check the inputs`
    );
  }
  return loss;
}

function meanLoss(
  model: tf.LayersModel,
  store: CaseStore,
  frames: readonly FrameRef[],
  role: MaskRole,
  posWeight: number,
  batchSize: number
): number {
  if (frames.length === 0) return NaN;
  let weighted = 0;
  for (let at = 0; at < frames.length; at += batchSize) {
    const part = frames.slice(at, at + batchSize);
    const { xs, ys } = makeBatch(store, part, role);
    const loss = tf.tidy(() =>
      weightedBce(ys, model.apply(xs, { training: false }) as tf.Tensor, posWeight)
    );
    weighted += loss.dataSync()[0] * part.length;
    loss.dispose();
    xs.dispose();
    ys.dispose();
  }
  return weighted / frames.length;
}

/** Soft Dice pooled over all frames (global sums, not a per-frame mean). */
export function evaluateDice(
  model: tf.LayersModel,
  store: CaseStore,
  frames: readonly FrameRef[],
  role: MaskRole,
  batchSize = 12
): number {
  let inter = 0;
  let total = 0;
  for (let at = 0; at < frames.length; at += batchSize) {
    const part = frames.slice(at, at + batchSize);
    const { xs, ys } = makeBatch(store, part, role);
    const [i, t] = tf.tidy(() => {
      const pred = model.apply(xs, { training: false }) as tf.Tensor;
      return [
        tf.sum(tf.mul(ys, pred)).dataSync()[0],
        tf.add(tf.sum(ys), tf.sum(pred)).dataSync()[0],
      ];
    });
    inter += i;
    total += t;
    xs.dispose();
    ys.dispose();
  }
  return (2 * inter + 1e-6) / (total + 1e-6);
}

export interface EpochLog {
  epoch: number;
  trainLoss: number;
  valLoss: number;
}

export interface TrainResult {
  model: tf.LayersModel;
  log: EpochLog[];
  /** Loss of every optimizer step, in order. */
  stepLosses: number[];
  posWeight: number;
  split: FrameSplit;
}

export function train(
  config: TrainerConfig,
  frames: readonly FrameRef[],
  store: CaseStore
): TrainResult {
  validateTrainerConfig(config);
  if (frames.length === 0) {
    throw new Error("no frames to train on");
  }
  const split = splitFrames(frames, config.split, config.seed);
  const posWeight =
    config.posWeight ??
    posWeightOf(
      (function* () {
        for (const frame of split.train) {
          yield store.slicePair(frame, config.role).y;
        }
      })()
    );

  const [nx, ny] = store.gridSize(frames[0].caseId);
  if (nx !== ny) {
    throw new Error(`frames must be square, got ${nx}x${ny}`);
  }
  const model = buildModel({ inputSize: nx, seed: config.seed, ...config.model });
  const optimizer = tf.train.adam(config.learningRate, config.beta1, config.beta2);
  const rng = new Rng(config.seed + 1);

  const log: EpochLog[] = [];
  const stepLosses: number[] = [];
  for (let epoch = 0; epoch < config.epochs; epoch++) {
    const order = rng.shuffle(split.train.slice());
    let weighted = 0;
    for (let at = 0; at < order.length; at += config.batchSize) {
      const part = order.slice(at, at + config.batchSize);
      const { xs, ys } = makeBatch(store, part, config.role);
      try {
        const loss = stepOnBatch(model, optimizer, xs, ys, posWeight);
        stepLosses.push(loss);
        weighted += loss * part.length;
      } finally {
        xs.dispose();
        ys.dispose();
      }
    }
    log.push({
      epoch: epoch + 1,
      trainLoss: weighted / order.length,
      valLoss: meanLoss(model, store, split.val, config.role, posWeight, config.batchSize),
    });
  }
  optimizer.dispose();
  return { model, log, stepLosses, posWeight, split };
}

/** Append-free CSV dump: epoch, train loss, validation loss. */
export function writeTrainingLog(file: string, log: readonly EpochLog[]): void {
  const lines = ["epoch,train_loss,val_loss"];
  for (const row of log) {
    lines.push(`${row.epoch},${row.trainLoss.toFixed(6)},${row.valLoss.toFixed(6)}`);
  }
  fs.mkdirSync(path.dirname(file), { recursive: true });
  fs.writeFileSync(file, lines.join("\n") + "\n");
}
