#!/usr/bin/env node
/**
 * Bridge CLI: export embeddings into the probe store format, or run the
 * shift-invariance LoRA fine-tune and emit its loss curve + adapter.
 */

import { readFileSync } from "node:fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { adapterFromFile, ToyPanoEncoder } from "./encoder.js";
import { DEFAULT_GENERIC_CUES, exportEmbeddings } from "./exporter.js";
import { finetuneLora } from "./lora.js";

function loadEncoder(modelId: string, adapterPath?: string): ToyPanoEncoder {
  if (!adapterPath) return new ToyPanoEncoder(modelId);
  const doc = JSON.parse(readFileSync(adapterPath, "utf8"));
  return new ToyPanoEncoder(modelId, adapterFromFile(doc));
}

await yargs(hideBin(process.argv))
  .scriptName("pano-embed-bridge")
  .command(
    "export",
    "Embed all image variants and prompt variants into a store file",
    (y) =>
      y
        .option("model-id", { type: "string", demandOption: true })
        .option("manifest", { type: "string", demandOption: true })
        .option("variant-index", { type: "string" })
        .option("store-out", { type: "string", demandOption: true })
        .option("adapter", { type: "string", describe: "adapter.json from finetune" })
        .option("cue", { type: "string", array: true }),
    (argv) => {
      const result = exportEmbeddings({
        modelId: argv.modelId,
        manifest: argv.manifest,
        variantIndex: argv.variantIndex,
        storeOut: argv.storeOut,
        genericCues: argv.cue ?? DEFAULT_GENERIC_CUES,
        encoder: loadEncoder(argv.modelId, argv.adapter),
      });
      console.log(
        `wrote ${result.recordCount} records to ${result.storePath} ` +
          `(+ ${result.sidecarPath})`,
      );
    },
  )
  .command(
    "finetune",
    "LoRA fine-tune of the image projection for shift invariance",
    (y) =>
      y
        .option("model-id", { type: "string", demandOption: true })
        .option("manifest", { type: "string", demandOption: true })
        .option("out-dir", { type: "string", demandOption: true })
        .option("lambda", { type: "number", demandOption: true })
        .option("seed", { type: "number", demandOption: true })
        .option("epochs", { type: "number", default: 20 })
        .option("learning-rate", { type: "number", default: 1e-5 })
        .option("lora-rank", { type: "number", default: 8 })
        .option("batch-size", { type: "number", default: 16 }),
    (argv) => {
      const result = finetuneLora({
        modelId: argv.modelId,
        manifest: argv.manifest,
        outDir: argv.outDir,
        lambda: argv.lambda,
        seed: argv.seed,
        epochs: argv.epochs,
        learningRate: argv.learningRate,
        loraRank: argv.loraRank,
        batchSize: argv.batchSize,
      });
      const last = result.perEpochLoss[result.perEpochLoss.length - 1];
      console.log(`wrote ${result.curvePath} and ${result.adapterPath}`);
      console.log(`final epoch-mean loss: ${last}`);
    },
  )
  .demandCommand(1)
  .strict()
  .help()
  .parseAsync();
