/**
 * Shift-invariance fine-tune of the toy image projection with a low-rank
 * adapter, trained by the balanced Charbonnier objective
 *
 *   L = lambda * C(s_shift_tuned, s_orig_tuned)
 *       + (1 - lambda) * C(s_shift_tuned, s_orig_frozen)
 *
 * Each step samples a shift uniformly from {0..W-1} under the seeded
 * generator, scores the original and shifted panorama with the adapted model
 * and the original with a frozen copy, and backpropagates into the adapter
 * matrices only; the text path never updates.  Emits the per-epoch mean loss
 * as an "epoch,loss" CSV in the primary's loss-curve format plus the adapter
 * weights as JSON.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import {
  adapterToFile,
  BIAS,
  clipScore,
  embedTail,
  FEATURE_DIM,
  GRID_COLS,
  GRID_ROWS,
  LoraAdapter,
  TAIL_DIM,
  ToyPanoEncoder,
} from "./encoder.js";
import { circularShift, decodePng, gridFeatures, Pixels } from "./images.js";
import { readManifest } from "./manifest.js";
import { Rng } from "./rng.js";

export interface FinetuneConfig {
  modelId: string;
  manifest: string;
  outDir: string;
  lambda: number;
  seed: number;
  epochs?: number;
  learningRate?: number;
  loraRank?: number;
  loraAlpha?: number;
  batchSize?: number;
  epsilon?: number;
}

export interface FinetuneResult {
  adapterPath: string;
  curvePath: string;
  perEpochLoss: number[];
  textChecksumBefore: string;
  textChecksumAfter: string;
}

const DEFAULTS = {
  epochs: 20,
  learningRate: 1e-5,
  loraRank: 8,
  batchSize: 16,
  epsilon: 1e-3,
};

function charbonnier(x: number, y: number, eps: number): number {
  return Math.sqrt((x - y) * (x - y) + eps * eps);
}

/** d(score)/d(tail) for score = 100 * max(e . t, 0), e = [BIAS, tail]/n. */
function scoreTailGrad(tail: Float64Array, text: Float64Array): Float64Array {
  const v = new Float64Array(TAIL_DIM + 1);
  v[0] = BIAS;
  v.set(tail, 1);
  let nsq = 0;
  for (let i = 0; i < v.length; i++) nsq += v[i] * v[i];
  const n = Math.sqrt(nsq);
  let vt = 0;
  for (let i = 0; i < v.length; i++) vt += v[i] * text[i];
  const grad = new Float64Array(TAIL_DIM);
  if (vt / n <= 0) return grad; // clamped region: zero gradient
  for (let d = 0; d < TAIL_DIM; d++) {
    grad[d] = 100.0 * (text[d + 1] / n - (vt * v[d + 1]) / (n * nsq));
  }
  return grad;
}

class Adam {
  private m: Float64Array;
  private v: Float64Array;
  private t = 0;

  constructor(
    size: number,
    private lr: number,
    private beta1 = 0.9,
    private beta2 = 0.999,
    private eps = 1e-8,
  ) {
    this.m = new Float64Array(size);
    this.v = new Float64Array(size);
  }

  step(params: Float64Array, grads: Float64Array): void {
    this.t += 1;
    const { m, v, beta1, beta2, eps, lr, t } = this;
    const c1 = 1 - Math.pow(beta1, t);
    const c2 = 1 - Math.pow(beta2, t);
    for (let i = 0; i < params.length; i++) {
      m[i] = beta1 * m[i] + (1 - beta1) * grads[i];
      v[i] = beta2 * v[i] + (1 - beta2) * grads[i] * grads[i];
      params[i] -= (lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + eps);
    }
  }
}

export function finetuneLora(config: FinetuneConfig): FinetuneResult {
  const epochs = config.epochs ?? DEFAULTS.epochs;
  const lr = config.learningRate ?? DEFAULTS.learningRate;
  const rank = config.loraRank ?? DEFAULTS.loraRank;
  const alpha = config.loraAlpha ?? rank;
  const batchSize = config.batchSize ?? DEFAULTS.batchSize;
  const eps = config.epsilon ?? DEFAULTS.epsilon;
  const lambda = config.lambda;
  if (!(lambda >= 0 && lambda <= 1)) {
    throw new Error(`lambda must lie in [0, 1], got ${lambda}`);
  }

  const manifest = readManifest(config.manifest);
  const frozen = new ToyPanoEncoder(config.modelId);
  const textChecksumBefore = frozen.textChecksum();

  const pixels: Pixels[] = [];
  const features0: Float64Array[] = [];
  const texts: Float64Array[] = [];
  const frozenScores: number[] = [];
  for (const pair of manifest.pairs) {
    const img = decodePng(readFileSync(pair.imagePath));
    pixels.push(img);
    const f0 = gridFeatures(img, GRID_ROWS, GRID_COLS);
    features0.push(f0);
    const text = frozen.embedText(pair.prompt);
    texts.push(text);
    frozenScores.push(clipScore(embedTail(frozen.imageTail(f0)), text));
  }
  const width = manifest.width;

  const aInitScale = 1.0 / Math.sqrt(FEATURE_DIM);
  const adapter: LoraAdapter = {
    rank,
    alpha,
    a: new Rng(`lora-init:${config.modelId}:${config.seed}`)
      .gaussVector(rank * FEATURE_DIM)
      .map((x) => aInitScale * x),
    b: new Float64Array(TAIL_DIM * rank), // zero init: W_eff starts at W0
  };
  const tuned = new ToyPanoEncoder(config.modelId, adapter);
  const scale = alpha / rank;

  const optA = new Adam(adapter.a.length, lr);
  const optB = new Adam(adapter.b.length, lr);
  const shiftRng = new Rng(config.seed);

  const perEpochLoss: number[] = [];
  for (let epoch = 0; epoch < epochs; epoch++) {
    let epochLoss = 0;
    let gradA = new Float64Array(adapter.a.length);
    let gradB = new Float64Array(adapter.b.length);
    let inBatch = 0;

    const flush = () => {
      if (inBatch === 0) return;
      for (let i = 0; i < gradA.length; i++) gradA[i] /= inBatch;
      for (let i = 0; i < gradB.length; i++) gradB[i] /= inBatch;
      optA.step(adapter.a, gradA);
      optB.step(adapter.b, gradB);
      gradA = new Float64Array(adapter.a.length);
      gradB = new Float64Array(adapter.b.length);
      inBatch = 0;
    };

    for (let i = 0; i < manifest.pairs.length; i++) {
      const delta = shiftRng.int(width);
      const fShift = gridFeatures(circularShift(pixels[i], delta), GRID_ROWS, GRID_COLS);
      const f0 = features0[i];
      const tail0 = tuned.imageTail(f0);
      const tailS = tuned.imageTail(fShift);
      const s0 = clipScore(embedTail(tail0), texts[i]);
      const sS = clipScore(embedTail(tailS), texts[i]);

      const c1 = charbonnier(sS, s0, eps);
      const c2 = charbonnier(sS, frozenScores[i], eps);
      const loss = lambda * c1 + (1 - lambda) * c2;
      if (!Number.isFinite(loss)) {
        throw new Error(`training diverged at epoch ${epoch}, step ${i}`);
      }
      epochLoss += loss;

      const dLdsS = (lambda * (sS - s0)) / c1 + ((1 - lambda) * (sS - frozenScores[i])) / c2;
      const dLds0 = (-lambda * (sS - s0)) / c1;
      const gS = scoreTailGrad(tailS, texts[i]);
      const g0 = scoreTailGrad(tail0, texts[i]);
      for (let d = 0; d < TAIL_DIM; d++) {
        gS[d] *= dLdsS;
        g0[d] *= dLds0;
      }

      // dL/dW_eff = gS (x) fShift + g0 (x) f0, pushed through the factors:
      // dB = scale * (gS (x) A fShift + g0 (x) A f0), dA = scale * (B^T g (x) f)
      accumulateAdapterGrads(adapter, scale, gS, fShift, gradA, gradB);
      accumulateAdapterGrads(adapter, scale, g0, f0, gradA, gradB);
      inBatch += 1;
      if (inBatch === batchSize) flush();
    }
    flush();
    perEpochLoss.push(epochLoss / manifest.pairs.length);
  }

  mkdirSync(config.outDir, { recursive: true });
  const curvePath = join(config.outDir, `loss_lambda_${formatLambda(lambda)}.csv`);
  const lines = ["epoch,loss"];
  perEpochLoss.forEach((loss, epoch) => {
    lines.push(`${epoch},${loss.toPrecision(17)}`);
  });
  writeFileSync(curvePath, lines.join("\n") + "\n", "utf8");

  const adapterPath = join(config.outDir, "adapter.json");
  const training = {
    lambda,
    seed: config.seed,
    epochs,
    learning_rate: lr,
    batch_size: batchSize,
    epsilon: eps,
    shift_distribution: `uniform{0..${width - 1}}`,
    optimizer: "adam",
  };
  writeFileSync(
    adapterPath,
    JSON.stringify(adapterToFile(adapter, config.modelId, training), null, 2) + "\n",
    "utf8",
  );

  return {
    adapterPath,
    curvePath,
    perEpochLoss,
    textChecksumBefore,
    textChecksumAfter: tuned.textChecksum(),
  };
}

function accumulateAdapterGrads(
  adapter: LoraAdapter,
  scale: number,
  gTail: Float64Array,
  f: Float64Array,
  gradA: Float64Array,
  gradB: Float64Array,
): void {
  const { rank, a, b } = adapter;
  const af = new Float64Array(rank);
  for (let r = 0; r < rank; r++) {
    let acc = 0;
    const row = r * FEATURE_DIM;
    for (let j = 0; j < FEATURE_DIM; j++) acc += a[row + j] * f[j];
    af[r] = acc;
  }
  const btg = new Float64Array(rank);
  for (let r = 0; r < rank; r++) {
    let acc = 0;
    for (let d = 0; d < TAIL_DIM; d++) acc += b[d * rank + r] * gTail[d];
    btg[r] = acc;
  }
  for (let d = 0; d < TAIL_DIM; d++) {
    for (let r = 0; r < rank; r++) {
      gradB[d * rank + r] += scale * gTail[d] * af[r];
    }
  }
  for (let r = 0; r < rank; r++) {
    const row = r * FEATURE_DIM;
    for (let j = 0; j < FEATURE_DIM; j++) {
      gradA[row + j] += scale * btg[r] * f[j];
    }
  }
}

function formatLambda(lambda: number): string {
  return String(lambda).replace(/\./g, "p");
}
