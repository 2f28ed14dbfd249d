/** Orchestration: corpus in, TUPX file plus manifest sidecar out. */

import { readFileSync, writeFileSync } from "node:fs";

import { parseCorpus } from "./corpus.js";
import { Encoder, loadEncoder, sha256Hex, vectorFor } from "./encoder.js";
import { maxPieceLength, tokenize } from "./tokenizer.js";
import { SentenceRecord, TokenVector, encodeTupx } from "./tupx.js";

export interface ExportOptions {
  corpusPath: string;
  encoderDir: string;
  outPath: string;
  /** Cap on tokens per sentence; longer sentences are cut there and
   *  recorded in the manifest. No cap when omitted. */
  maxSeqLen?: number;
}

export interface ExportResult {
  outPath: string;
  manifestPath: string;
  sentenceCount: number;
  tokenCount: number;
  truncated: string[];
  sha256: string;
}

export function embedSentences(
  sentences: { id: string; text: string }[],
  encoder: Encoder,
  maxSeqLen?: number,
): { records: SentenceRecord[]; truncated: string[]; tokenCount: number } {
  const cap = maxPieceLength(encoder.vocab);
  const vocab = new Set(encoder.rows.keys());
  const records: SentenceRecord[] = [];
  const truncated: string[] = [];
  let tokenCount = 0;
  for (const sentence of sentences) {
    let tokens = tokenize(sentence.text, vocab, cap);
    if (maxSeqLen !== undefined && tokens.length > maxSeqLen) {
      tokens = tokens.slice(0, maxSeqLen);
      truncated.push(sentence.id);
    }
    const out: TokenVector[] = tokens.map((tok) => ({
      charStart: tok.charStart,
      charEnd: tok.charEnd,
      vector: vectorFor(encoder, tok.piece),
    }));
    tokenCount += out.length;
    records.push({ id: sentence.id, dim: encoder.dim, tokens: out });
  }
  return { records, truncated, tokenCount };
}

export function runExport(opts: ExportOptions): ExportResult {
  if (opts.maxSeqLen !== undefined && (!Number.isInteger(opts.maxSeqLen) || opts.maxSeqLen < 1)) {
    throw new RangeError("maximum sequence length must be a positive integer");
  }
  const sentences = parseCorpus(readFileSync(opts.corpusPath, "utf8"));
  const encoder = loadEncoder(opts.encoderDir);
  const { records, truncated, tokenCount } = embedSentences(sentences, encoder, opts.maxSeqLen);
  const data = encodeTupx(records);
  writeFileSync(opts.outPath, data);
  const manifest = {
    device: "cpu",
    dim: encoder.dim,
    encoderId: encoder.id,
    maxSeqLen: opts.maxSeqLen ?? null,
    sentenceCount: records.length,
    sha256: sha256Hex(data),
    tokenCount,
    truncatedSentenceIds: truncated,
  };
  const manifestPath = opts.outPath + ".manifest.json";
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 1) + "\n");
  return {
    outPath: opts.outPath,
    manifestPath,
    sentenceCount: records.length,
    tokenCount,
    truncated,
    sha256: manifest.sha256,
  };
}
