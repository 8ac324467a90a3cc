/**
 * Deterministic toy vision-language encoder.
 *
 * The image path is linear over mean-pooled grid features: tail = W_eff * f,
 * with W_eff = W0 + (alpha/rank) * B * A when a LoRA adapter is attached.
 * W0 decomposes into a column-position-invariant part plus a rank-3
 * positional part built from nearly flip-symmetric cosine patterns over grid
 * columns, so the frozen model scores drift strongly under circular shifts
 * but only slightly under horizontal flips; the positional part is low-rank
 * by construction, which puts full shift invariance within reach of a small
 * adapter.  Embeddings get a constant bias coordinate before normalization
 * so image-text scores stay far from the zero clamp.
 *
 * The text path (frozen, never trained) hashes the prompt to a seeded
 * gaussian direction and applies a fixed projection.
 */

import { createHash } from "node:crypto";

import { decodePng, gridFeatures, Pixels } from "./images.js";
import { l2Normalize } from "./store.js";
import { Rng } from "./rng.js";

export const GRID_ROWS = 4;
export const GRID_COLS = 16;
export const TAIL_DIM = 32;
export const FEATURE_DIM = GRID_ROWS * GRID_COLS * 3;
export const BIAS = 2.0;
export const POSITIONAL_RANK = 3;
const ODD_FRACTION = 0.2;
const INVARIANT_SCALE = 1.2;
const POSITIONAL_SCALE = 0.35;

export interface LoraAdapter {
  rank: number;
  alpha: number;
  /** rank x FEATURE_DIM, row-major. */
  a: Float64Array;
  /** TAIL_DIM x rank, row-major. */
  b: Float64Array;
}

export interface AdapterFile {
  model_id: string;
  target: string;
  rank: number;
  alpha: number;
  a: number[][];
  b: number[][];
  training: Record<string, unknown>;
}

export function adapterToFile(
  adapter: LoraAdapter,
  modelId: string,
  training: Record<string, unknown>,
): AdapterFile {
  const a: number[][] = [];
  for (let r = 0; r < adapter.rank; r++) {
    a.push(Array.from(adapter.a.subarray(r * FEATURE_DIM, (r + 1) * FEATURE_DIM)));
  }
  const b: number[][] = [];
  for (let d = 0; d < TAIL_DIM; d++) {
    b.push(Array.from(adapter.b.subarray(d * adapter.rank, (d + 1) * adapter.rank)));
  }
  return {
    model_id: modelId,
    target: "image_projection",
    rank: adapter.rank,
    alpha: adapter.alpha,
    a,
    b,
    training,
  };
}

export function adapterFromFile(doc: AdapterFile): LoraAdapter {
  const a = new Float64Array(doc.rank * FEATURE_DIM);
  doc.a.forEach((row, r) => a.set(row, r * FEATURE_DIM));
  const b = new Float64Array(TAIL_DIM * doc.rank);
  doc.b.forEach((row, d) => b.set(row, d * doc.rank));
  return { rank: doc.rank, alpha: doc.alpha, a, b };
}

export class ToyPanoEncoder {
  readonly modelId: string;
  readonly adapter: LoraAdapter | null;
  /** TAIL_DIM x FEATURE_DIM, row-major. */
  readonly w0: Float64Array;
  /** TAIL_DIM x TAIL_DIM frozen text projection. */
  private readonly wText: Float64Array;

  constructor(modelId: string, adapter: LoraAdapter | null = null) {
    this.modelId = modelId;
    this.adapter = adapter;
    this.w0 = buildImageProjection(modelId);
    this.wText = buildTextProjection(modelId);
  }

  /** tail = W_eff * f; the trainer differentiates through this. */
  imageTail(f: Float64Array): Float64Array {
    const tail = new Float64Array(TAIL_DIM);
    for (let d = 0; d < TAIL_DIM; d++) {
      let acc = 0;
      const row = d * FEATURE_DIM;
      for (let j = 0; j < FEATURE_DIM; j++) acc += this.w0[row + j] * f[j];
      tail[d] = acc;
    }
    if (this.adapter) {
      const { rank, alpha, a, b } = this.adapter;
      const scale = alpha / rank;
      const af = new Float64Array(rank);
      for (let r = 0; r < rank; r++) {
        let acc = 0;
        const row = r * FEATURE_DIM;
        for (let j = 0; j < FEATURE_DIM; j++) acc += a[row + j] * f[j];
        af[r] = acc;
      }
      for (let d = 0; d < TAIL_DIM; d++) {
        let acc = 0;
        const row = d * rank;
        for (let r = 0; r < rank; r++) acc += b[row + r] * af[r];
        tail[d] += scale * acc;
      }
    }
    return tail;
  }

  embedImagePixels(pixels: Pixels): Float64Array {
    const f = gridFeatures(pixels, GRID_ROWS, GRID_COLS);
    return embedTail(this.imageTail(f));
  }

  embedImageBytes(buffer: Buffer): Float64Array {
    return this.embedImagePixels(decodePng(buffer));
  }

  textTail(text: string): Float64Array {
    const h = l2Normalize(new Rng(`text:${text}`).gaussVector(TAIL_DIM));
    const tail = new Float64Array(TAIL_DIM);
    for (let d = 0; d < TAIL_DIM; d++) {
      let acc = 0;
      const row = d * TAIL_DIM;
      for (let j = 0; j < TAIL_DIM; j++) acc += this.wText[row + j] * h[j];
      tail[d] = acc;
    }
    return l2Normalize(tail);
  }

  embedText(text: string): Float64Array {
    return embedTail(this.textTail(text));
  }

  /** Fingerprint of the frozen text-path parameters. */
  textChecksum(): string {
    return createHash("sha256")
      .update(Buffer.from(this.wText.buffer, 0, this.wText.byteLength))
      .digest("hex");
  }

  preprocessing(): Record<string, unknown> {
    return {
      kind: "grid-mean-pool",
      grid_rows: GRID_ROWS,
      grid_cols: GRID_COLS,
      channels: "rgb",
      centered: true,
      bias_coordinate: BIAS,
    };
  }
}

export function embedTail(tail: Float64Array): Float64Array {
  const v = new Float64Array(TAIL_DIM + 1);
  v[0] = BIAS;
  v.set(tail, 1);
  return l2Normalize(v);
}

export function clipScore(imageEmb: Float64Array, textEmb: Float64Array): number {
  if (imageEmb.length !== textEmb.length) {
    throw new Error("embedding dimensions differ");
  }
  let dot = 0;
  for (let i = 0; i < imageEmb.length; i++) dot += imageEmb[i] * textEmb[i];
  return Math.max(100 * dot, 0);
}

function buildImageProjection(modelId: string): Float64Array {
  const w = new Float64Array(TAIL_DIM * FEATURE_DIM);
  const invariantRng = new Rng(`w-invariant:${modelId}`);
  // position-invariant part: one weight per (dim, grid row, channel),
  // shared across grid columns
  for (let d = 0; d < TAIL_DIM; d++) {
    for (let r = 0; r < GRID_ROWS; r++) {
      for (let c = 0; c < 3; c++) {
        const g = (INVARIANT_SCALE * invariantRng.gauss()) / Math.sqrt(GRID_ROWS * 3);
        for (let x = 0; x < GRID_COLS; x++) {
          w[d * FEATURE_DIM + (r * GRID_COLS + x) * 3 + c] += g / GRID_COLS;
        }
      }
    }
  }
  // rank-POSITIONAL_RANK positional part: u_k (tail direction) times a
  // column pattern, cosine-even around the horizontal center with a small
  // odd admixture (the even part is exactly flip-symmetric, the odd part
  // keeps the flip response nonzero)
  const posRng = new Rng(`w-positional:${modelId}`);
  const center = (GRID_COLS - 1) / 2;
  for (let k = 1; k <= POSITIONAL_RANK; k++) {
    const u = posRng.gaussVector(TAIL_DIM);
    const mask = posRng.gaussVector(GRID_ROWS * 3);
    for (let d = 0; d < TAIL_DIM; d++) {
      const uk = (POSITIONAL_SCALE * u[d]) / Math.sqrt(TAIL_DIM);
      for (let r = 0; r < GRID_ROWS; r++) {
        for (let c = 0; c < 3; c++) {
          const m = mask[r * 3 + c];
          for (let x = 0; x < GRID_COLS; x++) {
            const theta = (2 * Math.PI * k * (x - center)) / GRID_COLS;
            const pattern =
              (Math.cos(theta) + ODD_FRACTION * Math.sin(theta)) * m;
            w[d * FEATURE_DIM + (r * GRID_COLS + x) * 3 + c] += uk * pattern;
          }
        }
      }
    }
  }
  return w;
}

function buildTextProjection(modelId: string): Float64Array {
  const rng = new Rng(`w-text:${modelId}`);
  const w = new Float64Array(TAIL_DIM * TAIL_DIM);
  for (let i = 0; i < w.length; i++) {
    w[i] = rng.gauss() / Math.sqrt(TAIL_DIM);
  }
  return w;
}
