/** Training and monitoring losses for binary segmentation.
 *
 * The optimizer target is class-weighted binary cross-entropy; soft Dice
 * is kept as the human-readable overlap score. Both take probabilities
 * (the network ends in a sigmoid), not logits.
 */

import * as tf from "@tensorflow/tfjs";

// keeps log() finite; float32 eps would vanish under the sigmoid tails
const CLIP = 1e-7;

/** Mean of -[w * g * log(p) + (1 - g) * log(1 - p)] over all pixels.
 *
 * `posWeight` scales the positive-class term only; 1 recovers plain BCE.
 */
export function weightedBce(
  yTrue: tf.Tensor,
  yPred: tf.Tensor,
  posWeight: number
): tf.Scalar {
  if (!(posWeight > 0) || !Number.isFinite(posWeight)) {
    throw new Error(`posWeight must be a positive finite number, got ${posWeight}`);
  }
  return tf.tidy(() => {
    const p = tf.clipByValue(yPred, CLIP, 1 - CLIP);
    const pos = tf.mul(yTrue, tf.log(p)).mul(posWeight);
    const neg = tf.mul(tf.sub(1, yTrue), tf.log(tf.sub(1, p)));
    return tf.neg(tf.mean(tf.add(pos, neg))) as tf.Scalar;
  });
}

/** 2*|P.G| / (|P| + |G|), smoothed so empty-vs-empty scores 1. */
export function softDice(yTrue: tf.Tensor, yPred: tf.Tensor, smooth = 1e-6): tf.Scalar {
  return tf.tidy(() => {
    const inter = tf.sum(tf.mul(yTrue, yPred));
    const total = tf.add(tf.sum(yTrue), tf.sum(yPred));
    return tf.div(inter.mul(2).add(smooth), total.add(smooth)) as tf.Scalar;
  });
}

/** Positive-class weight = negative / positive pixel count of a split.
 *
 * Falls back to 1 when a split has no positive pixels at all; selection
 * should have prevented that, but the loss must stay finite regardless.
 */
export function posWeightOf(masks: Iterable<Uint8Array>): number {
  let pos = 0;
  let total = 0;
  for (const mask of masks) {
    total += mask.length;
    for (let i = 0; i < mask.length; i++) {
      if (mask[i] !== 0) pos++;
    }
  }
  if (pos === 0) return 1;
  return (total - pos) / pos;
}
