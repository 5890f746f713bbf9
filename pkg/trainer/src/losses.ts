/** Loss functions for the clipped policy-gradient trainer.
 *
 * Conventions: surrogates follow the maximize-me sign (higher is
 * better); `*Loss` variants return the scalar the optimizer minimizes.
 * All per-element tensors are flat over (step, user) pairs.
 */
import * as tf from "@tensorflow/tfjs";

/** Log-probability of each chosen action under categorical logits. */
export function logProbOf(logits: tf.Tensor2D, actions: number[]): tf.Tensor1D {
  const logp = tf.logSoftmax(logits);
  const oneHot = tf.oneHot(tf.tensor1d(actions, "int32"), logits.shape[1]);
  return tf.sum(tf.mul(logp, oneHot), 1) as tf.Tensor1D;
}

/** Joint new/old probability ratio: exp of the summed head log-prob deltas,
 * equal to the product of the per-head ratios. */
export function policyRatio(newLogProb: tf.Tensor1D, oldLogProb: tf.Tensor1D): tf.Tensor1D {
  return tf.exp(tf.sub(newLogProb, oldLogProb)) as tf.Tensor1D;
}

/** Per-element clipped surrogate: min[rho*A, clip(rho, 1-eps, 1+eps)*A]. */
export function singleClipSurrogate(
  ratio: tf.Tensor1D,
  advantage: tf.Tensor1D,
  eps: number,
): tf.Tensor1D {
  const unclipped = tf.mul(ratio, advantage);
  const clipped = tf.mul(tf.clipByValue(ratio, 1 - eps, 1 + eps), advantage);
  return tf.minimum(unclipped, clipped) as tf.Tensor1D;
}

/** Per-element surrogate with the negative-advantage floor at c*A:
 * for A < 0 the clipped surrogate cannot fall below c*A. */
export function dualClipSurrogate(
  ratio: tf.Tensor1D,
  advantage: tf.Tensor1D,
  eps: number,
  c: number,
): tf.Tensor1D {
  if (!(c > 1)) throw new Error(`dual-clip constant must exceed 1, got ${c}`);
  const single = singleClipSurrogate(ratio, advantage, eps);
  const floored = tf.maximum(single, tf.mul(c, advantage));
  return tf.where(tf.less(advantage, 0), floored, single) as tf.Tensor1D;
}

export function singleClipLoss(ratio: tf.Tensor1D, advantage: tf.Tensor1D, eps: number): tf.Scalar {
  return tf.neg(tf.mean(singleClipSurrogate(ratio, advantage, eps))) as tf.Scalar;
}

export function dualClipLoss(
  ratio: tf.Tensor1D,
  advantage: tf.Tensor1D,
  eps: number,
  c: number,
): tf.Scalar {
  return tf.neg(tf.mean(dualClipSurrogate(ratio, advantage, eps, c))) as tf.Scalar;
}

/** Mean categorical entropy over the batch rows. */
export function entropy(logits: tf.Tensor2D): tf.Scalar {
  const logp = tf.logSoftmax(logits);
  const p = tf.softmax(logits);
  return tf.neg(tf.mean(tf.sum(tf.mul(p, logp), 1))) as tf.Scalar;
}

/** Squared-error value regression loss. */
export function valueLoss(predicted: tf.Tensor1D, target: tf.Tensor1D): tf.Scalar {
  return tf.mean(tf.square(tf.sub(predicted, target))) as tf.Scalar;
}

/** Mean KL(reference || current) between categorical distributions given
 * as logits; the divergence penalty used by the behavioral-cloning phase. */
export function klDivergence(referenceLogits: tf.Tensor2D, currentLogits: tf.Tensor2D): tf.Scalar {
  const refLogp = tf.logSoftmax(referenceLogits);
  const refP = tf.softmax(referenceLogits);
  const curLogp = tf.logSoftmax(currentLogits);
  return tf.mean(tf.sum(tf.mul(refP, tf.sub(refLogp, curLogp)), 1)) as tf.Scalar;
}

/** Policy-phase objective to minimize: negative clipped surrogate minus
 * the entropy bonus (entropyWeight of 0 removes the entropy term). */
export function policyPhaseLoss(
  ratio: tf.Tensor1D,
  advantage: tf.Tensor1D,
  headLogits: tf.Tensor2D[],
  eps: number,
  c: number,
  entropyWeight: number,
): tf.Scalar {
  let loss: tf.Scalar = dualClipLoss(ratio, advantage, eps, c);
  if (entropyWeight !== 0) {
    for (const logits of headLogits) {
      loss = tf.sub(loss, tf.mul(entropyWeight, entropy(logits))) as tf.Scalar;
    }
  }
  return loss;
}

/** One-step temporal-difference advantages.
 *
 * rewards/values are [steps][users]; the value after the final step is
 * bootstrapped as zero. Returns per-element advantages and regression
 * targets, both [steps][users].
 */
export function tdAdvantages(
  rewards: number[][],
  values: number[][],
  gamma: number,
): { advantages: number[][]; targets: number[][] } {
  const steps = rewards.length;
  const advantages: number[][] = [];
  const targets: number[][] = [];
  for (let t = 0; t < steps; t += 1) {
    const advRow: number[] = [];
    const tgtRow: number[] = [];
    for (let u = 0; u < rewards[t].length; u += 1) {
      const nextValue = t + 1 < steps ? values[t + 1][u] : 0;
      const target = rewards[t][u] + gamma * nextValue;
      tgtRow.push(target);
      advRow.push(target - values[t][u]);
    }
    advantages.push(advRow);
    targets.push(tgtRow);
  }
  return { advantages, targets };
}
