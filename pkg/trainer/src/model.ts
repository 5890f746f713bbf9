/** Actor-critic networks.
 *
 * Both nets apply a shared-parameter encoder to each user's feature row,
 * so the policy is permutation-symmetric across users. The actor carries
 * a rate head (one logit per quality layer), a placement head (3 logits),
 * and an auxiliary value head; the critic outputs one value per user.
 */
import * as tf from "@tensorflow/tfjs";

class Dense {
  readonly weight: tf.Variable<tf.Rank.R2>;
  readonly bias: tf.Variable<tf.Rank.R1>;

  constructor(inDim: number, outDim: number, seed: number) {
    const init = tf.initializers.glorotUniform({ seed });
    this.weight = tf.variable(init.apply([inDim, outDim]) as tf.Tensor2D);
    this.bias = tf.variable(tf.zeros([outDim]) as tf.Tensor1D);
  }

  apply(x: tf.Tensor2D): tf.Tensor2D {
    return tf.add(tf.matMul(x, this.weight), this.bias) as tf.Tensor2D;
  }

  variables(): tf.Variable[] {
    return [this.weight, this.bias];
  }
}

export interface SerializedWeights {
  shapes: number[][];
  values: number[][];
}

function serialize(vars: tf.Variable[]): SerializedWeights {
  return {
    shapes: vars.map((v) => [...v.shape]),
    values: vars.map((v) => Array.from(v.dataSync())),
  };
}

function deserialize(vars: tf.Variable[], data: SerializedWeights): void {
  if (data.values.length !== vars.length) {
    throw new Error(`expected ${vars.length} weight arrays, got ${data.values.length}`);
  }
  vars.forEach((v, i) => {
    v.assign(tf.tensor(data.values[i], data.shapes[i] as [number, number]));
  });
}

export interface ActorOutput {
  rateLogits: tf.Tensor2D;
  placeLogits: tf.Tensor2D;
  auxValue: tf.Tensor1D;
}

export class ActorNet {
  private enc1: Dense;
  private enc2: Dense;
  private rateHead: Dense;
  private placeHead: Dense;
  private auxHead: Dense;

  constructor(
    readonly featureWidth: number,
    readonly numLayers: number,
    hidden: number,
    seed: number,
  ) {
    this.enc1 = new Dense(featureWidth, hidden, seed);
    this.enc2 = new Dense(hidden, hidden, seed + 1);
    this.rateHead = new Dense(hidden, numLayers, seed + 2);
    this.placeHead = new Dense(hidden, 3, seed + 3);
    this.auxHead = new Dense(hidden, 1, seed + 4);
  }

  /** rows: [batch*users, featureWidth]. */
  forward(rows: tf.Tensor2D): ActorOutput {
    const h1 = tf.tanh(this.enc1.apply(rows)) as tf.Tensor2D;
    const h2 = tf.tanh(this.enc2.apply(h1)) as tf.Tensor2D;
    return {
      rateLogits: this.rateHead.apply(h2),
      placeLogits: this.placeHead.apply(h2),
      auxValue: tf.squeeze(this.auxHead.apply(h2), [1]) as tf.Tensor1D,
    };
  }

  variables(): tf.Variable[] {
    return [this.enc1, this.enc2, this.rateHead, this.placeHead, this.auxHead].flatMap((d) =>
      d.variables(),
    );
  }

  getWeights(): SerializedWeights {
    return serialize(this.variables());
  }

  setWeights(data: SerializedWeights): void {
    deserialize(this.variables(), data);
  }
}

export class CriticNet {
  private enc1: Dense;
  private enc2: Dense;
  private valueHead: Dense;

  constructor(readonly featureWidth: number, hidden: number, seed: number) {
    this.enc1 = new Dense(featureWidth, hidden, seed);
    this.enc2 = new Dense(hidden, hidden, seed + 1);
    this.valueHead = new Dense(hidden, 1, seed + 2);
  }

  /** rows: [batch*users, featureWidth] -> per-row value estimates. */
  forward(rows: tf.Tensor2D): tf.Tensor1D {
    const h1 = tf.tanh(this.enc1.apply(rows)) as tf.Tensor2D;
    const h2 = tf.tanh(this.enc2.apply(h1)) as tf.Tensor2D;
    return tf.squeeze(this.valueHead.apply(h2), [1]) as tf.Tensor1D;
  }

  variables(): tf.Variable[] {
    return [this.enc1, this.enc2, this.valueHead].flatMap((d) => d.variables());
  }

  getWeights(): SerializedWeights {
    return serialize(this.variables());
  }

  setWeights(data: SerializedWeights): void {
    deserialize(this.variables(), data);
  }
}
