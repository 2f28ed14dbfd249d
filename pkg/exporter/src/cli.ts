#!/usr/bin/env node
/** Command line front end: `export` writes a TUPX file plus manifest for a
 *  corpus; `make-demo-encoder` writes a self-contained lookup encoder. */

import { readFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { parseCorpus } from "./corpus.js";
import { harvestPieces, makeDemoEncoder } from "./encoder.js";
import { runExport } from "./export.js";

const USAGE = `usage:
  tupx-export export --corpus corpus.json --encoder dir --out file.tupx [--max-seq-len N]
  tupx-export make-demo-encoder --out dir [--dim N] [--seed N] [--corpus corpus.json]

export            embed every sentence of the corpus and write TUPX + manifest
make-demo-encoder write encoder.json and embeddings.bin with seeded demo vectors;
                  --corpus adds the corpus's surface forms to the vocabulary
`;

function fail(message: string): never {
  process.stderr.write(JSON.stringify({ error: "ExportError", message }) + "\n");
  process.exit(1);
}

function requireOption(value: string | undefined, name: string): string {
  if (value === undefined) {
    fail(`missing required option --${name}`);
  }
  return value;
}

function intOption(value: string | undefined, name: string, min = 1): number | undefined {
  if (value === undefined) {
    return undefined;
  }
  const parsed = Number(value);
  if (!Number.isInteger(parsed) || parsed < min) {
    fail(`--${name} must be an integer >= ${min}, got ${value}`);
  }
  return parsed;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command === undefined || command === "--help" || command === "-h") {
    process.stdout.write(USAGE);
    return command === undefined ? 1 : 0;
  }
  try {
    if (command === "export") {
      const { values } = parseArgs({
        args: rest,
        options: {
          corpus: { type: "string" },
          encoder: { type: "string" },
          out: { type: "string" },
          "max-seq-len": { type: "string" },
        },
      });
      const result = runExport({
        corpusPath: requireOption(values.corpus, "corpus"),
        encoderDir: requireOption(values.encoder, "encoder"),
        outPath: requireOption(values.out, "out"),
        maxSeqLen: intOption(values["max-seq-len"], "max-seq-len"),
      });
      const note = result.truncated.length ? `, ${result.truncated.length} truncated` : "";
      process.stdout.write(
        `wrote ${result.tokenCount} token vectors for ${result.sentenceCount} sentences` +
          ` to ${result.outPath}${note}\n`
      );
      return 0;
    }
    if (command === "make-demo-encoder") {
      const { values } = parseArgs({
        args: rest,
        options: {
          out: { type: "string" },
          dim: { type: "string" },
          seed: { type: "string" },
          corpus: { type: "string" },
        },
      });
      const extraPieces = values.corpus
        ? harvestPieces(parseCorpus(readFileSync(values.corpus, "utf8")).map((s) => s.text))
        : [];
      const encoder = makeDemoEncoder(requireOption(values.out, "out"), {
        dim: intOption(values.dim, "dim") ?? 16,
        seed: intOption(values.seed, "seed", 0) ?? 0,
        extraPieces,
      });
      process.stdout.write(
        `wrote encoder ${encoder.id} (${encoder.vocab.length} pieces) to ${values.out}\n`
      );
      return 0;
    }
    fail(`unknown command ${command}`);
  } catch (exc) {
    fail((exc as Error).message);
  }
}

if (import.meta.url === pathToFileURL(process.argv[1] ?? "").href) {
  process.exit(main(process.argv.slice(2)));
}
