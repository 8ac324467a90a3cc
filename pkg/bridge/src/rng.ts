/**
 * Deterministic PRNG utilities.  Everything the bridge emits must be
 * bit-identical across runs for a fixed seed, so no Math.random anywhere.
 */

import { createHash } from "node:crypto";

/** mulberry32: tiny, fast, good enough for toy-model initialization. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function seedFromString(text: string): number {
  const digest = createHash("sha256").update(text, "utf8").digest();
  return digest.readUInt32LE(0);
}

export class Rng {
  private next: () => number;
  private spare: number | null = null;

  constructor(seed: number | string) {
    this.next = mulberry32(
      typeof seed === "string" ? seedFromString(seed) : seed,
    );
  }

  uniform(): number {
    return this.next();
  }

  /** Uniform integer in [0, n). */
  int(n: number): number {
    return Math.floor(this.next() * n) % n;
  }

  /** Standard normal via Box-Muller (cached spare). */
  gauss(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    let u = 0;
    let v = 0;
    do {
      u = this.next();
    } while (u <= 1e-12);
    v = this.next();
    const r = Math.sqrt(-2.0 * Math.log(u));
    this.spare = r * Math.sin(2.0 * Math.PI * v);
    return r * Math.cos(2.0 * Math.PI * v);
  }

  gaussVector(n: number): Float64Array {
    const out = new Float64Array(n);
    for (let i = 0; i < n; i++) out[i] = this.gauss();
    return out;
  }
}

export function sha256Hex(text: string): string {
  return createHash("sha256").update(text, "utf8").digest("hex");
}
