/** Encoder-decoder segmentation network builder.
 *
 * Fixed topology: the encoder holds nine convolutions (four double-conv
 * levels plus a single bottleneck conv), four max-poolings and two 50 %
 * dropouts; the decoder holds thirteen convolutions (four 2x2 convs after
 * each upsampling, four double-conv levels, one 1x1 sigmoid output) with
 * four skip concatenations. Hidden activations are ReLU throughout.
 *
 * Channel widths double per level from `baseFilters`; the published
 * lineage uses 64 up to a 1024-wide bottleneck, tests shrink it.
 */

import * as tf from "@tensorflow/tfjs";

export interface ModelConfig {
  /** Square input edge; four poolings require a multiple of 16. */
  inputSize: number;
  /** Channel width of the first level; doubles at each deeper level. */
  baseFilters: number;
  dropoutRate: number;
  /** Weight initialization seed; layer k derives seed + k. */
  seed: number;
}

export const DEFAULT_MODEL: ModelConfig = {
  inputSize: 256,
  baseFilters: 64,
  dropoutRate: 0.5,
  seed: 0,
};

/** Per-level channel widths, shallow to bottleneck. */
export function levelWidths(baseFilters: number): number[] {
  return [1, 2, 4, 8, 16].map((m) => m * baseFilters);
}

export function buildModel(overrides: Partial<ModelConfig> = {}): tf.LayersModel {
  const cfg = { ...DEFAULT_MODEL, ...overrides };
  if (cfg.inputSize % 16 !== 0 || cfg.inputSize < 16) {
    throw new Error(`inputSize must be a positive multiple of 16, got ${cfg.inputSize}`);
  }
  if (cfg.baseFilters < 1) {
    throw new Error(`baseFilters must be >= 1, got ${cfg.baseFilters}`);
  }
  const widths = levelWidths(cfg.baseFilters);
  let initSeed = cfg.seed;
  const conv = (
    name: string,
    filters: number,
    kernel: number,
    activation: "relu" | "sigmoid"
  ) =>
    tf.layers.conv2d({
      name,
      filters,
      kernelSize: kernel,
      padding: "same",
      activation,
      kernelInitializer: tf.initializers.glorotUniform({ seed: initSeed++ }),
    });

  const input = tf.input({
    shape: [cfg.inputSize, cfg.inputSize, 1],
    name: "frame",
  });

  // encoder: double conv per level, dropout on the deepest level and the
  // bottleneck, pooling between levels
  let x = conv("enc_conv1", widths[0], 3, "relu").apply(input) as tf.SymbolicTensor;
  const skip4 = (x = conv("enc_conv2", widths[0], 3, "relu").apply(x) as tf.SymbolicTensor);
  x = tf.layers.maxPooling2d({ name: "pool1", poolSize: 2 }).apply(x) as tf.SymbolicTensor;

  x = conv("enc_conv3", widths[1], 3, "relu").apply(x) as tf.SymbolicTensor;
  const skip3 = (x = conv("enc_conv4", widths[1], 3, "relu").apply(x) as tf.SymbolicTensor);
  x = tf.layers.maxPooling2d({ name: "pool2", poolSize: 2 }).apply(x) as tf.SymbolicTensor;

  x = conv("enc_conv5", widths[2], 3, "relu").apply(x) as tf.SymbolicTensor;
  const skip2 = (x = conv("enc_conv6", widths[2], 3, "relu").apply(x) as tf.SymbolicTensor);
  x = tf.layers.maxPooling2d({ name: "pool3", poolSize: 2 }).apply(x) as tf.SymbolicTensor;

  x = conv("enc_conv7", widths[3], 3, "relu").apply(x) as tf.SymbolicTensor;
  x = conv("enc_conv8", widths[3], 3, "relu").apply(x) as tf.SymbolicTensor;
  // seeded dropout keeps training runs replayable; tfjs re-draws from the
  // per-layer seed each call, so the mask is fixed rather than per-step
  const skip1 = (x = tf.layers
    .dropout({ name: "enc_drop1", rate: cfg.dropoutRate, seed: initSeed++ })
    .apply(x) as tf.SymbolicTensor);
  x = tf.layers.maxPooling2d({ name: "pool4", poolSize: 2 }).apply(x) as tf.SymbolicTensor;

  x = conv("enc_conv9", widths[4], 3, "relu").apply(x) as tf.SymbolicTensor;
  x = tf.layers
    .dropout({ name: "enc_drop2", rate: cfg.dropoutRate, seed: initSeed++ })
    .apply(x) as tf.SymbolicTensor;

  // decoder: upsample, 2x2 conv, skip concat, double conv at each level
  const decode = (
    src: tf.SymbolicTensor,
    skip: tf.SymbolicTensor,
    level: number, // 1 deepest .. 4 shallowest
    width: number,
    convBase: number
  ): tf.SymbolicTensor => {
    let y = tf.layers
      .upSampling2d({ name: `up${level}`, size: [2, 2] })
      .apply(src) as tf.SymbolicTensor;
    y = conv(`dec_conv${convBase}`, width, 2, "relu").apply(y) as tf.SymbolicTensor;
    y = tf.layers
      .concatenate({ name: `skip${level}`, axis: -1 })
      .apply([skip, y]) as tf.SymbolicTensor;
    y = conv(`dec_conv${convBase + 1}`, width, 3, "relu").apply(y) as tf.SymbolicTensor;
    return conv(`dec_conv${convBase + 2}`, width, 3, "relu").apply(y) as tf.SymbolicTensor;
  };

  x = decode(x, skip1, 1, widths[3], 1);
  x = decode(x, skip2, 2, widths[2], 4);
  x = decode(x, skip3, 3, widths[1], 7);
  x = decode(x, skip4, 4, widths[0], 10);
  x = conv("dec_conv13", 1, 1, "sigmoid").apply(x) as tf.SymbolicTensor;

  return tf.model({ inputs: input, outputs: x, name: "kt_unet" });
}

export interface LayerCensus {
  encoderConvs: number;
  decoderConvs: number;
  pools: number;
  upsamples: number;
  dropouts: number;
  skips: number;
}

/** Count layers by kind; conv layers split by the enc_/dec_ name prefix. */
export function census(model: tf.LayersModel): LayerCensus {
  const out: LayerCensus = {
    encoderConvs: 0,
    decoderConvs: 0,
    pools: 0,
    upsamples: 0,
    dropouts: 0,
    skips: 0,
  };
  for (const layer of model.layers) {
    switch (layer.getClassName()) {
      case "Conv2D":
        if (layer.name.startsWith("enc_")) out.encoderConvs++;
        else if (layer.name.startsWith("dec_")) out.decoderConvs++;
        break;
      case "MaxPooling2D":
        out.pools++;
        break;
      case "UpSampling2D":
        out.upsamples++;
        break;
      case "Dropout":
        out.dropouts++;
        break;
      case "Concatenate":
        out.skips++;
        break;
    }
  }
  return out;
}
