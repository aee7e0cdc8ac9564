#!/usr/bin/env node
/** Command line entry: train one role on preprocessed cases, then export
 * its per-case masks into the exchange directory the combiner consumes.
 *
 *   unet-adapter train  --input preproc/ --checkpoint ckpt/kt_lax --role kt_lax
 *   unet-adapter export --input preproc/ --checkpoint ckpt/kt_lax --masks masks/
 *
 * Exit codes: 0 success, 1 failure, 2 usage error.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { CaseStore, ConfigError, selectFrames, TUMOR_NEGATIVE_RATE } from "./data.js";
import { exportMasks } from "./export.js";
import { MASK_ROLES, MaskRole } from "./nifti.js";
import { train, trainerConfig, writeTrainingLog } from "./train.js";
import { loadModel, saveModel } from "./weights.js";

const CASE_PATTERN = /^case_\d{5}$/;

function discoverCases(root: string, requested: readonly string[]): string[] {
  if (!fs.existsSync(root) || !fs.statSync(root).isDirectory()) {
    throw new ConfigError(`input directory not found: ${root}`);
  }
  for (const cid of requested) {
    if (!CASE_PATTERN.test(cid)) {
      throw new ConfigError(`malformed case id: ${cid}`);
    }
  }
  const available = fs
    .readdirSync(root)
    .filter((name) => CASE_PATTERN.test(name) && fs.statSync(path.join(root, name)).isDirectory())
    .sort();
  if (requested.length > 0) {
    const missing = requested.filter((cid) => !available.includes(cid)).sort();
    if (missing.length > 0) {
      throw new ConfigError(`requested cases not found: ${missing.join(", ")}`);
    }
    return [...requested].sort();
  }
  if (available.length === 0) {
    throw new ConfigError(`no cases selected under ${root}`);
  }
  return available;
}

function asRole(value: string): MaskRole {
  if (!(MASK_ROLES as readonly string[]).includes(value)) {
    throw new ConfigError(`role must be one of ${MASK_ROLES.join(", ")}, got ${value}`);
  }
  return value as MaskRole;
}

interface CommonArgs {
  input: string;
  cases: string[];
  checkpoint: string;
}

async function cmdTrain(argv: CommonArgs & {
  role: string;
  epochs: number;
  batchSize: number;
  lr: number;
  seed: number;
  width: number;
  negRate: number;
  log?: string;
}): Promise<number> {
  const role = asRole(argv.role);
  const caseIds = discoverCases(argv.input, argv.cases);
  const store = new CaseStore(argv.input);
  const table = store.frameTable(caseIds);
  const frames = selectFrames(table, role, argv.seed, {
    tumorNegativeRate: argv.negRate,
  });
  console.log(`${role}: ${frames.length} frames from ${caseIds.length} cases`);
  const config = trainerConfig(role, {
    epochs: argv.epochs,
    batchSize: argv.batchSize,
    learningRate: argv.lr,
    seed: argv.seed,
    model: { baseFilters: argv.width },
  });
  const result = train(config, frames, store);
  for (const row of result.log) {
    console.log(
      `epoch ${row.epoch}: train ${row.trainLoss.toFixed(6)} val ${row.valLoss.toFixed(6)}`
    );
  }
  const [nx] = store.gridSize(caseIds[0]);
  await saveModel(result.model, argv.checkpoint, {
    role,
    posWeight: result.posWeight,
    inputSize: nx,
    seed: argv.seed,
  });
  writeTrainingLog(
    argv.log ?? path.join(argv.checkpoint, "training_log.csv"),
    result.log
  );
  console.log(`checkpoint written to ${argv.checkpoint}`);
  return 0;
}

async function cmdExport(argv: CommonArgs & {
  masks: string;
  threshold: number;
}): Promise<number> {
  const caseIds = discoverCases(argv.input, argv.cases);
  const { model, meta } = await loadModel(argv.checkpoint);
  const store = new CaseStore(argv.input);
  const written = exportMasks(model, store, caseIds, argv.masks, meta.role, {
    threshold: argv.threshold,
  });
  for (const file of written) {
    console.log(`wrote ${file}`);
  }
  return 0;
}

export async function main(args: string[]): Promise<number> {
  const parser = yargs(args)
    .scriptName("unet-adapter")
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw err ?? new ConfigError(msg ?? "bad usage");
    })
    .command(
      "train",
      "train one role's network on preprocessed cases",
      (y) =>
        y
          .option("input", { type: "string", demandOption: true, describe: "preprocessed case tree" })
          .option("checkpoint", { type: "string", demandOption: true, describe: "checkpoint output directory" })
          .option("role", { type: "string", demandOption: true, choices: [...MASK_ROLES] })
          .option("cases", { type: "string", array: true, default: [] as string[] })
          .option("epochs", { type: "number", default: 10 })
          .option("batch-size", { type: "number", default: 12 })
          .option("lr", { type: "number", default: 1e-4 })
          .option("seed", { type: "number", default: 0 })
          .option("width", { type: "number", default: 64, describe: "base channel width" })
          .option("neg-rate", { type: "number", default: TUMOR_NEGATIVE_RATE, describe: "tumor-role negative sampling rate" })
          .option("log", { type: "string", describe: "training log CSV path" }),
      async () => undefined
    )
    .command(
      "export",
      "write per-case masks from a checkpoint",
      (y) =>
        y
          .option("input", { type: "string", demandOption: true, describe: "preprocessed case tree" })
          .option("checkpoint", { type: "string", demandOption: true, describe: "checkpoint directory" })
          .option("masks", { type: "string", demandOption: true, describe: "exchange mask output directory" })
          .option("cases", { type: "string", array: true, default: [] as string[] })
          .option("threshold", { type: "number", default: 0.5 }),
      async () => undefined
    )
    .demandCommand(1, "pick a command: train or export")
    .help();

  try {
    const argv = await parser.parse();
    const command = String(argv._[0]);
    if (command === "train") {
      return await cmdTrain(argv as never);
    }
    if (command === "export") {
      return await cmdExport(argv as never);
    }
    throw new ConfigError(`unknown command: ${command}`);
  } catch (err) {
    if (err instanceof ConfigError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;

if (invokedDirectly) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
