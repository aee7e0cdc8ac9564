import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { buildModel } from "../src/model.js";
import { loadModel, saveModel } from "../src/weights.js";

let tmp: string;

beforeAll(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "ckpt-"));
});

afterAll(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

describe("checkpoints", () => {
  it("round-trips weights and metadata through the directory layout", async () => {
    const model = buildModel({ inputSize: 16, baseFilters: 2, seed: 9 });
    const dir = path.join(tmp, "kt_lax");
    await saveModel(model, dir, {
      role: "kt_lax",
      posWeight: 3.25,
      inputSize: 16,
      seed: 9,
    });
    for (const name of ["model.json", "weights.bin", "meta.json"]) {
      expect(fs.existsSync(path.join(dir, name))).toBe(true);
    }

    const { model: back, meta } = await loadModel(dir);
    expect(meta).toEqual({ role: "kt_lax", posWeight: 3.25, inputSize: 16, seed: 9 });

    const probe = tf.randomUniform([1, 16, 16, 1], 0, 1, "float32", 3);
    const a = (model.apply(probe, { training: false }) as tf.Tensor).dataSync();
    const b = (back.apply(probe, { training: false }) as tf.Tensor).dataSync();
    expect(Array.from(b)).toEqual(Array.from(a));
    probe.dispose();
    model.dispose();
    back.dispose();
  });

  it("writes identical checkpoint bytes for identical models", async () => {
    const a = path.join(tmp, "rep_a");
    const b = path.join(tmp, "rep_b");
    const m1 = buildModel({ inputSize: 16, baseFilters: 2, seed: 4 });
    const m2 = buildModel({ inputSize: 16, baseFilters: 2, seed: 4 });
    const meta = { role: "tumor" as const, posWeight: 1, inputSize: 16, seed: 4 };
    await saveModel(m1, a, meta);
    await saveModel(m2, b, meta);
    expect(
      fs.readFileSync(path.join(a, "weights.bin")).equals(fs.readFileSync(path.join(b, "weights.bin")))
    ).toBe(true);
    m1.dispose();
    m2.dispose();
  });
});
