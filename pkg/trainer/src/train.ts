/** Two-phase training loop.
 *
 * Each epoch: collect rollouts over the wire protocol, run a number of
 * clipped policy-gradient steps on the actor (with value-regression
 * steps on the critic), then an auxiliary phase that distills the
 * pre-phase policy (KL penalty) while fitting the actor's auxiliary
 * value head and the critic, and finally asks the environment to update
 * its constraint multipliers from the finished episodes.
 */
import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";

import {
  dualClipLoss,
  entropy,
  klDivergence,
  logProbOf,
  policyPhaseLoss,
  policyRatio,
  tdAdvantages,
  valueLoss,
} from "./losses.js";
import { ActorNet, CriticNet } from "./model.js";
import { EnvClient, obsRows, type AccumulatorInfo, type ObsPayload } from "./protocol.js";
import { Rng } from "./rng.js";

export interface TrainerConfig {
  scenarioPath: string;
  outDir: string;
  epochs: number;
  episodesPerEpoch: number;
  gamma: number;
  clip: number;
  dualClipC: number;
  entropyWeight: number;
  nPolicy: number;
  nAux: number;
  learningRate: number;
  hidden: number;
  seed: number;
  checkpointEvery: number;
  normalizeAdvantage: boolean;
  bcWeight: number;
  auxValueWeight: number;
  simCommand: string[];
}

export const DEFAULT_CONFIG: Omit<TrainerConfig, "scenarioPath" | "outDir"> = {
  epochs: 100,
  episodesPerEpoch: 2,
  gamma: 0.99,
  clip: 0.2,
  dualClipC: 3,
  entropyWeight: 0.01,
  nPolicy: 4,
  nAux: 6,
  learningRate: 3e-4,
  hidden: 64,
  seed: 0,
  checkpointEvery: 50,
  normalizeAdvantage: true,
  bcWeight: 1.0,
  auxValueWeight: 1.0,
  simCommand: ["sim"],
};

export interface EpisodeRollout {
  /** Per step, the stacked user feature rows observed before acting. */
  obs: number[][][];
  rateActions: number[][]; // 0-based layer index
  placeActions: number[][];
  oldLogProb: number[][];
  rewards: number[][];
  finalAccumulators: AccumulatorInfo[];
}

export interface EpisodeScore {
  meanQuality: number;
  stall: number;
  variation: number;
}

/** Constrained objective value: Q + mu0*(H0 - S) + mu1*(H1 - V). */
export function lagrangianScore(
  score: EpisodeScore,
  mu0: number,
  mu1: number,
  stallTarget: number,
  variationTarget: number,
): number {
  return (
    score.meanQuality +
    mu0 * (stallTarget - score.stall) +
    mu1 * (variationTarget - score.variation)
  );
}

export function episodeScores(accumulators: AccumulatorInfo[]): EpisodeScore[] {
  return accumulators.map((a) => ({
    meanQuality: a.gop_count > 0 ? a.quality_sum_db / a.gop_count : 0,
    stall: a.stall_sum_s,
    variation: a.gop_count >= 2 ? a.variation_sum_db / (a.gop_count - 1) : 0,
  }));
}

export interface EpochMetrics {
  epoch: number;
  meanReward: number;
  policyLoss: number;
  valueLoss: number;
  entropy: number;
  auxKl: number;
  mu0: number;
  mu1: number;
}

const METRICS_HEADER = "epoch,mean_reward,policy_loss,value_loss,entropy,aux_kl,mu0,mu1";

export class Trainer {
  readonly config: TrainerConfig;
  actor!: ActorNet;
  critic!: CriticNet;
  rng: Rng;
  private actorOpt: tf.Optimizer;
  private criticOpt: tf.Optimizer;
  private initialized = false;
  numLayers = 0;
  featureWidth = 0;
  numUsers = 0;

  constructor(config: TrainerConfig) {
    this.config = config;
    this.rng = new Rng(config.seed);
    this.actorOpt = tf.train.adam(config.learningRate);
    this.criticOpt = tf.train.adam(config.learningRate);
  }

  private ensureNets(obs: ObsPayload): void {
    if (this.initialized) return;
    this.numUsers = obs.shape[0];
    this.featureWidth = obs.shape[1];
    this.numLayers = obs.metadata.num_layers;
    this.actor = new ActorNet(this.featureWidth, this.numLayers, this.config.hidden, this.config.seed);
    this.critic = new CriticNet(this.featureWidth, this.config.hidden, this.config.seed + 100);
    this.initialized = true;
  }

  /** Sample (or take greedily) one joint action for every user. */
  private act(
    rows: number[][],
    greedy: boolean,
  ): { layers: number[]; placements: number[]; logProb: number[] } {
    return tf.tidy(() => {
      const x = tf.tensor2d(rows);
      const out = this.actor.forward(x);
      const rateLogp = tf.logSoftmax(out.rateLogits).arraySync() as number[][];
      const placeLogp = tf.logSoftmax(out.placeLogits).arraySync() as number[][];
      const layers: number[] = [];
      const placements: number[] = [];
      const logProb: number[] = [];
      for (let u = 0; u < rows.length; u += 1) {
        const rateIdx = greedy
          ? argmax(rateLogp[u])
          : this.rng.categorical(rateLogp[u].map(Math.exp));
        const placeIdx = greedy
          ? argmax(placeLogp[u])
          : this.rng.categorical(placeLogp[u].map(Math.exp));
        layers.push(rateIdx + 1); // protocol layers are 1-based counts
        placements.push(placeIdx);
        logProb.push(rateLogp[u][rateIdx] + placeLogp[u][placeIdx]);
      }
      return { layers, placements, logProb };
    });
  }

  async rollout(client: EnvClient, seed: number, greedy = false): Promise<EpisodeRollout> {
    const first = await client.reset(seed);
    this.ensureNets(first);
    const episode: EpisodeRollout = {
      obs: [],
      rateActions: [],
      placeActions: [],
      oldLogProb: [],
      rewards: [],
      finalAccumulators: [],
    };
    let rows = obsRows(first);
    let done = false;
    while (!done) {
      const action = this.act(rows, greedy);
      const reply = await client.step(action.layers, action.placements);
      episode.obs.push(rows);
      episode.rateActions.push(action.layers.map((l) => l - 1));
      episode.placeActions.push(action.placements);
      episode.oldLogProb.push(action.logProb);
      episode.rewards.push(reply.rewards);
      done = reply.done;
      rows = obsRows(reply.obs);
      if (done) episode.finalAccumulators = reply.info.accumulators;
    }
    return episode;
  }

  /** Flatten (step, user) pairs from several episodes into one batch. */
  private buildBatch(episodes: EpisodeRollout[]): {
    rows: number[][];
    rateActions: number[];
    placeActions: number[];
    oldLogProb: number[];
    advantages: number[];
    targets: number[];
  } {
    const rows: number[][] = [];
    const rateActions: number[] = [];
    const placeActions: number[] = [];
    const oldLogProb: number[] = [];
    const advantages: number[] = [];
    const targets: number[] = [];
    for (const ep of episodes) {
      const values = tf.tidy(() => {
        const flat = tf.tensor2d(ep.obs.flat());
        const v = this.critic.forward(flat).arraySync() as number[];
        const perStep: number[][] = [];
        for (let t = 0; t < ep.obs.length; t += 1) {
          perStep.push(v.slice(t * this.numUsers, (t + 1) * this.numUsers));
        }
        return perStep;
      });
      const { advantages: adv, targets: tgt } = tdAdvantages(ep.rewards, values, this.config.gamma);
      for (let t = 0; t < ep.obs.length; t += 1) {
        for (let u = 0; u < this.numUsers; u += 1) {
          rows.push(ep.obs[t][u]);
          rateActions.push(ep.rateActions[t][u]);
          placeActions.push(ep.placeActions[t][u]);
          oldLogProb.push(ep.oldLogProb[t][u]);
          advantages.push(adv[t][u]);
          targets.push(tgt[t][u]);
        }
      }
    }
    if (this.config.normalizeAdvantage && advantages.length > 1) {
      const mean = advantages.reduce((a, b) => a + b, 0) / advantages.length;
      const variance =
        advantages.reduce((a, b) => a + (b - mean) * (b - mean), 0) / advantages.length;
      const std = Math.sqrt(variance) + 1e-8;
      for (let i = 0; i < advantages.length; i += 1) {
        advantages[i] = (advantages[i] - mean) / std;
      }
    }
    return { rows, rateActions, placeActions, oldLogProb, advantages, targets };
  }

  /** Run one epoch of updates on an already-collected batch. Returns metrics. */
  updateFromEpisodes(episodes: EpisodeRollout[]): Omit<EpochMetrics, "epoch" | "mu0" | "mu1" | "meanReward"> {
    const batch = this.buildBatch(episodes);
    const x = tf.tensor2d(batch.rows);
    const adv = tf.tensor1d(batch.advantages);
    const oldLogp = tf.tensor1d(batch.oldLogProb);
    const tgt = tf.tensor1d(batch.targets);

    let lastPolicyLoss = 0;
    let lastEntropy = 0;
    for (let i = 0; i < this.config.nPolicy; i += 1) {
      const loss = this.actorOpt.minimize(
        () => {
          const out = this.actor.forward(x);
          const newLogp = tf.add(
            logProbOf(out.rateLogits, batch.rateActions),
            logProbOf(out.placeLogits, batch.placeActions),
          ) as tf.Tensor1D;
          const ratio = policyRatio(newLogp, oldLogp);
          return policyPhaseLoss(
            ratio,
            adv,
            [out.rateLogits, out.placeLogits],
            this.config.clip,
            this.config.dualClipC,
            this.config.entropyWeight,
          );
        },
        true,
        this.actor.variables(),
      ) as tf.Scalar;
      lastPolicyLoss = loss.dataSync()[0];
      loss.dispose();
      const vLoss = this.criticOpt.minimize(
        () => valueLoss(this.critic.forward(x), tgt),
        true,
        this.critic.variables(),
      ) as tf.Scalar;
      vLoss.dispose();
    }
    lastEntropy = tf.tidy(() => {
      const out = this.actor.forward(x);
      return entropy(out.rateLogits).dataSync()[0] + entropy(out.placeLogits).dataSync()[0];
    });

    // Auxiliary phase: distill the pre-phase policy while fitting values.
    const frozen = tf.tidy(() => {
      const out = this.actor.forward(x);
      return {
        rate: out.rateLogits.arraySync() as number[][],
        place: out.placeLogits.arraySync() as number[][],
      };
    });
    const frozenRate = tf.tensor2d(frozen.rate);
    const frozenPlace = tf.tensor2d(frozen.place);
    let lastAuxKl = 0;
    let lastValueLoss = 0;
    for (let i = 0; i < this.config.nAux; i += 1) {
      const auxLoss = this.actorOpt.minimize(
        () => {
          const out = this.actor.forward(x);
          const kl = tf.add(
            klDivergence(frozenRate, out.rateLogits),
            klDivergence(frozenPlace, out.placeLogits),
          ) as tf.Scalar;
          const auxValue = valueLoss(out.auxValue, tgt);
          return tf.add(
            tf.mul(this.config.bcWeight, kl),
            tf.mul(this.config.auxValueWeight, auxValue),
          ) as tf.Scalar;
        },
        true,
        this.actor.variables(),
      ) as tf.Scalar;
      auxLoss.dispose();
      const vLoss = this.criticOpt.minimize(
        () => valueLoss(this.critic.forward(x), tgt),
        true,
        this.critic.variables(),
      ) as tf.Scalar;
      lastValueLoss = vLoss.dataSync()[0];
      vLoss.dispose();
    }
    lastAuxKl = tf.tidy(() => {
      const out = this.actor.forward(x);
      return (
        klDivergence(frozenRate, out.rateLogits).dataSync()[0] +
        klDivergence(frozenPlace, out.placeLogits).dataSync()[0]
      );
    });

    x.dispose();
    adv.dispose();
    oldLogp.dispose();
    tgt.dispose();
    frozenRate.dispose();
    frozenPlace.dispose();
    return {
      policyLoss: lastPolicyLoss,
      valueLoss: lastValueLoss,
      entropy: lastEntropy,
      auxKl: lastAuxKl,
    };
  }

  async train(client: EnvClient, onEpoch?: (m: EpochMetrics) => void): Promise<EpochMetrics[]> {
    const cfg = this.config;
    fs.mkdirSync(cfg.outDir, { recursive: true });
    const metricsPath = path.join(cfg.outDir, "metrics.csv");
    fs.writeFileSync(metricsPath, METRICS_HEADER + "\n");
    const history: EpochMetrics[] = [];
    let episodeSeed = cfg.seed * 1_000_003;
    let multipliers = { mu0: NaN, mu1: NaN };
    for (let epoch = 0; epoch < cfg.epochs; epoch += 1) {
      const episodes: EpisodeRollout[] = [];
      for (let e = 0; e < cfg.episodesPerEpoch; e += 1) {
        episodes.push(await this.rollout(client, episodeSeed));
        episodeSeed += 1;
      }
      const update = this.updateFromEpisodes(episodes);
      multipliers = await client.updateMultipliers();
      const rewardSum = episodes
        .flatMap((ep) => ep.rewards.flat())
        .reduce((a, b) => a + b, 0);
      const rewardCount = episodes.reduce((a, ep) => a + ep.rewards.flat().length, 0);
      const metrics: EpochMetrics = {
        epoch,
        meanReward: rewardSum / rewardCount,
        ...update,
        mu0: multipliers.mu0,
        mu1: multipliers.mu1,
      };
      history.push(metrics);
      fs.appendFileSync(
        metricsPath,
        [
          metrics.epoch,
          metrics.meanReward,
          metrics.policyLoss,
          metrics.valueLoss,
          metrics.entropy,
          metrics.auxKl,
          metrics.mu0,
          metrics.mu1,
        ].join(",") + "\n",
      );
      if ((epoch + 1) % cfg.checkpointEvery === 0 || epoch + 1 === cfg.epochs) {
        this.saveCheckpoint(
          path.join(cfg.outDir, `epoch_${String(epoch + 1).padStart(4, "0")}`),
          multipliers,
        );
      }
      onEpoch?.(metrics);
    }
    return history;
  }

  /** Greedy evaluation; returns per-episode scores averaged across users. */
  async evaluate(client: EnvClient, episodes: number, baseSeed: number): Promise<EpisodeScore[]> {
    const out: EpisodeScore[] = [];
    for (let e = 0; e < episodes; e += 1) {
      const ep = await this.rollout(client, baseSeed + e, true);
      const scores = episodeScores(ep.finalAccumulators);
      out.push({
        meanQuality: mean(scores.map((s) => s.meanQuality)),
        stall: mean(scores.map((s) => s.stall)),
        variation: mean(scores.map((s) => s.variation)),
      });
    }
    return out;
  }

  saveCheckpoint(dir: string, multipliers: { mu0: number; mu1: number }): void {
    fs.mkdirSync(dir, { recursive: true });
    fs.writeFileSync(path.join(dir, "actor.json"), JSON.stringify(this.actor.getWeights()));
    fs.writeFileSync(path.join(dir, "critic.json"), JSON.stringify(this.critic.getWeights()));
    fs.writeFileSync(path.join(dir, "multipliers.json"), JSON.stringify(multipliers));
    fs.writeFileSync(path.join(dir, "rng.json"), JSON.stringify({ state: this.rng.getState() }));
  }

  loadCheckpoint(dir: string): { mu0: number; mu1: number } {
    if (!this.initialized) {
      throw new Error("run or replay at least one observation before loading weights");
    }
    this.actor.setWeights(JSON.parse(fs.readFileSync(path.join(dir, "actor.json"), "utf-8")));
    this.critic.setWeights(JSON.parse(fs.readFileSync(path.join(dir, "critic.json"), "utf-8")));
    const rngState = JSON.parse(fs.readFileSync(path.join(dir, "rng.json"), "utf-8"));
    this.rng.setState(rngState.state);
    return JSON.parse(fs.readFileSync(path.join(dir, "multipliers.json"), "utf-8"));
  }
}

function argmax(xs: number[]): number {
  let best = 0;
  for (let i = 1; i < xs.length; i += 1) if (xs[i] > xs[best]) best = i;
  return best;
}

function mean(xs: number[]): number {
  return xs.reduce((a, b) => a + b, 0) / xs.length;
}
