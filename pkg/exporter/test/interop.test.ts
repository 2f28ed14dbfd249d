/** Contract with the consuming pipeline: an exported file must pass the
 *  other side's strict reader, and every gold span must align onto the
 *  exported token offsets. Requires python3 with the sibling package on the
 *  path; the suite fails loudly rather than skipping if it is missing. */

import { execFileSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { harvestPieces, makeDemoEncoder } from "../src/encoder.js";
import { runExport } from "../src/export.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const PY_SRC = join(HERE, "..", "..", "src");

const VALIDATE = `
import json, sys
sys.path.insert(0, sys.argv[1])
from tupex.corpus import parse_dataset
from tupex.embedding import read_embeddings, align_span

with open(sys.argv[2], "rb") as fh:
    dataset = parse_dataset(fh.read())
with open(sys.argv[3], "rb") as fh:
    records = read_embeddings(fh)
by_id = {tok.sentence_id: (tok, rec) for tok, rec in records}
aligned = 0
for sentence in dataset.sentences:
    tok, rec = by_id[sentence.id]
    for record in sentence.tuples:
        for _, span in record.slots():
            if span is not None:
                align_span(span, tok)
                aligned += 1
print(json.dumps({
    "sentences": len(records),
    "dims": sorted({rec.dim for _, rec in records}),
    "aligned_spans": aligned,
}))
`;

function cpIndex(text: string, piece: string): number {
  const at = text.indexOf(piece);
  if (at < 0) {
    throw new Error(`${piece} not in ${text}`);
  }
  return Array.from(text.slice(0, at)).length;
}

function span(text: string, piece: string): { start: number; end: number; text: string } {
  const start = cpIndex(text, piece);
  return { start, end: start + Array.from(piece).length, text: piece };
}

// The 𝛂 in the second text is outside the basic plane, so these offsets
// only line up if both sides count code points.
const T0 = "The hardness of CoCrFeNi reached 450 HV at 77 K.";
const T1 = "The 𝛂 phase fraction of AlCoCrFeNi reached 0.35 at 900 K.";

function corpusDoc(): unknown {
  return {
    sentences: [
      {
        id: "demo-0",
        text: T0,
        tuples: [
          {
            material: span(T0, "CoCrFeNi"),
            property: span(T0, "hardness"),
            property_value: span(T0, "450 HV"),
            condition: span(T0, "at"),
            condition_value: span(T0, "77 K"),
          },
        ],
      },
      {
        id: "demo-1",
        text: T1,
        tuples: [
          {
            material: span(T1, "AlCoCrFeNi"),
            property: span(T1, "𝛂 phase fraction"),
            property_value: span(T1, "0.35"),
            condition: span(T1, "at"),
            condition_value: span(T1, "900 K"),
          },
        ],
      },
    ],
  };
}

describe("exported files satisfy the consumer contract", () => {
  it("passes the strict reader and aligns every gold span", () => {
    const dir = mkdtempSync(join(tmpdir(), "interop-"));
    const corpus = join(dir, "corpus.json");
    writeFileSync(corpus, JSON.stringify(corpusDoc()));
    const encoder = join(dir, "encoder");
    makeDemoEncoder(encoder, { dim: 8, seed: 5, extraPieces: harvestPieces([T0, T1]) });
    const out = join(dir, "demo.tupx");
    runExport({ corpusPath: corpus, encoderDir: encoder, outPath: out });

    const raw = execFileSync("python3", ["-c", VALIDATE, PY_SRC, corpus, out], {
      encoding: "utf8",
    });
    const summary = JSON.parse(raw);
    expect(summary.sentences).toBe(2);
    expect(summary.dims).toEqual([8]);
    expect(summary.aligned_spans).toBe(10);
  });
});
