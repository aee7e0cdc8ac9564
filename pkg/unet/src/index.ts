export {
  HEADER_SIZE,
  MASK_ROLES,
  MaskRole,
  NiftiError,
  NiftiFormatError,
  TruncatedFileError,
  UnsupportedDtypeError,
  Volume,
  VolumeData,
  VOX_OFFSET,
  maskPath,
  readNifti,
  voxelCount,
  writeMask,
  writeNifti,
} from "./nifti.js";
export {
  CaseStore,
  ConfigError,
  FrameFlags,
  FrameRef,
  IMAGING,
  SEGMENTATION,
  TUMOR_NEGATIVE_RATE,
  selectFrames,
} from "./data.js";
export { posWeightOf, softDice, weightedBce } from "./loss.js";
export {
  DEFAULT_MODEL,
  LayerCensus,
  ModelConfig,
  buildModel,
  census,
  levelWidths,
} from "./model.js";
export {
  DEFAULT_TRAINER,
  EpochLog,
  FrameSplit,
  TrainResult,
  TrainerConfig,
  evaluateDice,
  makeBatch,
  splitFrames,
  stepOnBatch,
  train,
  trainerConfig,
  validateTrainerConfig,
  writeTrainingLog,
} from "./train.js";
export { THRESHOLD, exportMasks, predictCase } from "./export.js";
export { CheckpointMeta, loadModel, saveModel } from "./weights.js";
export { Rng } from "./rng.js";
