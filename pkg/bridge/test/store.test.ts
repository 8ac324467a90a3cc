import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { EmbeddingRecord, l2Normalize, recordLine, storeText, writeStore } from "../src/store.js";
import { Rng } from "../src/rng.js";

function unitRecord(pairId: string, kind: "image" | "text", variant: string, seed: number): EmbeddingRecord {
  return { pairId, kind, variant, vector: l2Normalize(new Rng(seed).gaussVector(8)) };
}

describe("store writer", () => {
  it("emits the header then one record per line", () => {
    const text = storeText([
      unitRecord("a", "image", "orig", 1),
      unitRecord("a", "text", "prompt:orig", 2),
    ]);
    const lines = text.trimEnd().split("\n");
    expect(JSON.parse(lines[0])).toEqual({ dim: 8, count: 2, normalized: true });
    const rec = JSON.parse(lines[1]);
    expect(rec.pair_id).toBe("a");
    expect(rec.vector).toHaveLength(8);
  });

  it("serializes vector components at 17 significant digits (lossless)", () => {
    const record = unitRecord("a", "image", "orig", 3);
    const parsed = JSON.parse(recordLine(record));
    parsed.vector.forEach((v: number, i: number) => {
      expect(v).toBe(record.vector[i]);
    });
  });

  it("writes byte-identical output regardless of record order", () => {
    const records = [
      unitRecord("b", "image", "orig", 1),
      unitRecord("a", "text", "prompt:orig", 2),
      unitRecord("a", "image", "shift:16", 3),
    ];
    expect(storeText(records)).toBe(storeText([...records].reverse()));
  });

  it("rejects non-unit vectors", () => {
    const bad: EmbeddingRecord = {
      pairId: "a",
      kind: "image",
      variant: "orig",
      vector: new Float64Array([1, 1, 0, 0]),
    };
    expect(() => storeText([bad])).toThrow(/unit-norm/);
  });

  it("rejects duplicate keys and mixed dimensions", () => {
    const a = unitRecord("a", "image", "orig", 1);
    expect(() => storeText([a, unitRecord("a", "image", "orig", 2)])).toThrow(/duplicate/);
    const other: EmbeddingRecord = {
      pairId: "b",
      kind: "image",
      variant: "orig",
      vector: l2Normalize(new Rng(9).gaussVector(16)),
    };
    expect(() => storeText([a, other])).toThrow(/dimension/);
  });

  it("round-trips through the filesystem", () => {
    const dir = mkdtempSync(join(tmpdir(), "bridge-store-"));
    const path = join(dir, "store.jsonl");
    writeStore([unitRecord("a", "image", "orig", 4)], path);
    const lines = readFileSync(path, "utf8").trimEnd().split("\n");
    expect(lines).toHaveLength(2);
    expect(JSON.parse(lines[0]).count).toBe(1);
  });
});
