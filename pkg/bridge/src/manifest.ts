/**
 * Readers for the pano-probe manifest and variant-index formats (the
 * bridge's only view of the evaluation corpus).
 */

import { readFileSync } from "node:fs";
import { dirname, resolve } from "node:path";

import { sha256Hex } from "./rng.js";

export interface ManifestPair {
  id: string;
  imagePath: string;
  prompt: string;
  formatCue: string;
  content: string;
}

export interface Manifest {
  name: string;
  width: number;
  height: number;
  formatCue: string;
  pairs: ManifestPair[];
}

export function readManifest(path: string): Manifest {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  const base = dirname(resolve(path));
  const defaultCue: string = doc.format_cue ?? "";
  const pairs: ManifestPair[] = doc.pairs.map(
    (entry: { id: string; image: string; prompt: string; format_cue?: string }) => {
      const cue = entry.format_cue ?? defaultCue;
      const hasCue = cue.length > 0 && entry.prompt.startsWith(cue);
      return {
        id: String(entry.id),
        imagePath: resolve(base, entry.image),
        prompt: entry.prompt,
        formatCue: hasCue ? cue : "",
        content: hasCue ? entry.prompt.slice(cue.length) : entry.prompt,
      };
    },
  );
  if (pairs.length === 0) throw new Error(`${path}: manifest declares no pairs`);
  return {
    name: doc.name,
    width: doc.width,
    height: doc.height,
    formatCue: defaultCue,
    pairs,
  };
}

export interface VariantIndex {
  root: string;
  pairs: Record<string, Record<string, string>>;
}

export function readVariantIndex(path: string): VariantIndex {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  return { root: dirname(resolve(path)), pairs: doc.pairs };
}

export function variantPath(index: VariantIndex, pairId: string, variant: string): string {
  const entry = index.pairs[pairId];
  if (!entry || !(variant in entry)) {
    throw new Error(`variant index has no entry for (${pairId}, ${variant})`);
  }
  return resolve(index.root, entry[variant]);
}

export const PROMPT_ORIG = "prompt:orig";

/** Must agree byte-for-byte with the primary's label derivation. */
export function genericPromptVariant(cue: string): string {
  return `prompt:generic:${sha256Hex(cue).slice(0, 12)}`;
}
