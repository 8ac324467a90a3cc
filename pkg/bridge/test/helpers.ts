/**
 * Test corpus: small panoramas with smooth horizontal structure (seeded
 * sinusoid mixtures per channel plus a vertical ramp), so grid-pooled
 * features carry real positional signal.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { encodePng, Pixels } from "../src/images.js";
import { Rng } from "../src/rng.js";

export const FORMAT_CUE = "<360panorama>, ";

export function makePanorama(seed: number, width: number, height: number): Pixels {
  const rng = new Rng(seed);
  const phases = [rng.uniform(), rng.uniform(), rng.uniform()];
  const freqs = [1 + rng.int(2), 1 + rng.int(2), 1 + rng.int(2)];
  const amps = [0.5 + 0.3 * rng.uniform(), 0.5 + 0.3 * rng.uniform(), 0.5 + 0.3 * rng.uniform()];
  const data = new Uint8Array(width * height * 4);
  for (let y = 0; y < height; y++) {
    const vertical = 0.15 * (y / height - 0.5);
    for (let x = 0; x < width; x++) {
      const px = (y * width + x) * 4;
      for (let c = 0; c < 3; c++) {
        const wave =
          amps[c] * Math.sin(2 * Math.PI * (freqs[c] * (x / width) + phases[c]));
        const value = 127.5 * (1 + wave + vertical);
        data[px + c] = Math.max(0, Math.min(255, Math.round(value)));
      }
      data[px + 3] = 255;
    }
  }
  return { width, height, data };
}

export interface ToyCorpus {
  root: string;
  manifestPath: string;
  width: number;
  height: number;
  pairIds: string[];
}

export function writeToyCorpus(
  root: string,
  nPairs = 10,
  width = 64,
  height = 32,
): ToyCorpus {
  mkdirSync(join(root, "images"), { recursive: true });
  const entries = [];
  const pairIds = [];
  for (let i = 0; i < nPairs; i++) {
    const id = `toy${String(i).padStart(3, "0")}`;
    const file = `images/${id}.png`;
    writeFileSync(join(root, file), encodePng(makePanorama(9000 + i, width, height)));
    entries.push({
      id,
      image: file,
      prompt: `${FORMAT_CUE}toy panorama scene ${i}`,
    });
    pairIds.push(id);
  }
  const manifestPath = join(root, "manifest.json");
  writeFileSync(
    manifestPath,
    JSON.stringify(
      { name: "toy", width, height, format_cue: FORMAT_CUE, pairs: entries },
      null,
      2,
    ) + "\n",
    "utf8",
  );
  return { root, manifestPath, width, height, pairIds };
}
