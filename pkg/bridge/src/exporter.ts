/**
 * Embedding export: one record per (pair, image variant) listed in the
 * variant index plus one text record per distinct prompt (the original and
 * each generic-cue substitution), written in the primary's store format with
 * a sidecar documenting model identity and preprocessing.
 */

import { readFileSync } from "node:fs";

import { ToyPanoEncoder } from "./encoder.js";
import {
  genericPromptVariant,
  Manifest,
  PROMPT_ORIG,
  readManifest,
  readVariantIndex,
  VariantIndex,
  variantPath,
} from "./manifest.js";
import { EmbeddingRecord, writeSidecar, writeStore } from "./store.js";

export const DEFAULT_GENERIC_CUES = ["", "image, ", "photo, ", "picture, "];

export interface ExportConfig {
  modelId: string;
  manifest: string;
  variantIndex?: string;
  storeOut: string;
  genericCues?: string[];
  encoder?: ToyPanoEncoder;
}

export function collectRecords(
  encoder: ToyPanoEncoder,
  manifest: Manifest,
  index: VariantIndex | null,
  genericCues: string[],
): EmbeddingRecord[] {
  const records: EmbeddingRecord[] = [];
  for (const pair of manifest.pairs) {
    const variants: Array<[string, string]> = index
      ? Object.entries(index.pairs[pair.id] ?? {}).map(([variant]) => [
          variant,
          variantPath(index, pair.id, variant),
        ])
      : [["orig", pair.imagePath]];
    if (index && !(pair.id in index.pairs)) {
      throw new Error(`variant index has no pair ${pair.id}`);
    }
    for (const [variant, path] of variants) {
      let bytes: Buffer;
      try {
        bytes = readFileSync(path);
      } catch (err) {
        throw new Error(`pair ${pair.id}: cannot read ${path}: ${err}`);
      }
      records.push({
        pairId: pair.id,
        kind: "image",
        variant,
        vector: encoder.embedImageBytes(bytes),
      });
    }
    records.push({
      pairId: pair.id,
      kind: "text",
      variant: PROMPT_ORIG,
      vector: encoder.embedText(pair.prompt),
    });
    for (const cue of genericCues) {
      records.push({
        pairId: pair.id,
        kind: "text",
        variant: genericPromptVariant(cue),
        vector: encoder.embedText(cue + pair.content),
      });
    }
  }
  return records;
}

export function exportEmbeddings(config: ExportConfig): {
  storePath: string;
  sidecarPath: string;
  recordCount: number;
} {
  const manifest = readManifest(config.manifest);
  const index = config.variantIndex ? readVariantIndex(config.variantIndex) : null;
  const encoder = config.encoder ?? new ToyPanoEncoder(config.modelId);
  const cues = config.genericCues ?? DEFAULT_GENERIC_CUES;
  const records = collectRecords(encoder, manifest, index, cues);
  writeStore(records, config.storeOut);
  const sidecarPath = writeSidecar(
    {
      model_id: config.modelId,
      preprocessing: encoder.preprocessing(),
      dim: records.length ? records[0].vector.length : 0,
      adapter: encoder.adapter
        ? { rank: encoder.adapter.rank, alpha: encoder.adapter.alpha }
        : null,
    },
    config.storeOut,
  );
  return { storePath: config.storeOut, sidecarPath, recordCount: records.length };
}
