/**
 * Local lookup encoder: a directory holding `encoder.json` (identifier,
 * dimension, vocabulary, unknown-piece marker) and `embeddings.bin` (one
 * little-endian float32 row per vocabulary entry, in order). Pieces not in
 * the vocabulary share the unknown row.
 */

import { createHash } from "node:crypto";
import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

export class EncoderError extends Error {}

export interface Encoder {
  id: string;
  dim: number;
  vocab: string[];
  unk: string;
  rows: Map<string, number>;
  vectors: Float32Array;
}

export function vectorFor(enc: Encoder, piece: string): Float32Array {
  const row = enc.rows.get(piece) ?? enc.rows.get(enc.unk)!;
  return enc.vectors.subarray(row * enc.dim, (row + 1) * enc.dim);
}

export function loadEncoder(dir: string): Encoder {
  let meta: unknown;
  try {
    meta = JSON.parse(readFileSync(join(dir, "encoder.json"), "utf8"));
  } catch (exc) {
    throw new EncoderError(`cannot load encoder from ${dir}: ${(exc as Error).message}`);
  }
  const { id, dim, vocab, unk } = meta as Record<string, unknown>;
  if (typeof id !== "string" || !id) {
    throw new EncoderError("encoder id must be a non-empty string");
  }
  if (typeof dim !== "number" || !Number.isInteger(dim) || dim < 1) {
    throw new EncoderError("encoder dimension must be a positive integer");
  }
  if (!Array.isArray(vocab) || vocab.length === 0) {
    throw new EncoderError("encoder vocabulary must be a non-empty array");
  }
  const rows = new Map<string, number>();
  for (const [i, piece] of vocab.entries()) {
    if (typeof piece !== "string" || !piece || /\s/u.test(piece)) {
      throw new EncoderError(`vocabulary entry ${i} must be a non-empty string without whitespace`);
    }
    if (rows.has(piece)) {
      throw new EncoderError(`duplicate vocabulary entry ${piece}`);
    }
    rows.set(piece, i);
  }
  if (typeof unk !== "string" || !rows.has(unk)) {
    throw new EncoderError("unknown-piece marker must name a vocabulary entry");
  }
  let raw: Buffer;
  try {
    raw = readFileSync(join(dir, "embeddings.bin"));
  } catch (exc) {
    throw new EncoderError(`cannot load encoder from ${dir}: ${(exc as Error).message}`);
  }
  const expected = vocab.length * dim * 4;
  if (raw.length !== expected) {
    throw new EncoderError(
      `embeddings.bin holds ${raw.length} bytes, expected ${expected} for ${vocab.length} x ${dim}`
    );
  }
  const vectors = new Float32Array(vocab.length * dim);
  for (let i = 0; i < vectors.length; i++) {
    vectors[i] = raw.readFloatLE(i * 4);
  }
  for (const v of vectors) {
    if (!Number.isFinite(v)) {
      throw new EncoderError("embeddings.bin contains non-finite values");
    }
  }
  return { id, dim, vocab: vocab as string[], unk, rows, vectors };
}

// ---------------------------------------------------------------------------
// Demo encoder generation. Vectors are seeded hashes so the tool runs
// end-to-end with no model download; they carry no meaning.

function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (const byte of Buffer.from(text, "utf8")) {
    h = Math.imul(h ^ byte, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export const DEMO_UNK = "[UNK]";

/** Word-ish surface forms of a text: decimal numbers whole, runs of word
 *  characters, punctuation one character at a time. */
export function harvestPieces(texts: Iterable<string>): string[] {
  const pieces = new Set<string>();
  for (const text of texts) {
    for (const match of text.matchAll(/\d+\.\d+|\w+|[^\w\s]/gu)) {
      pieces.add(match[0]);
    }
  }
  return [...pieces].sort();
}

export interface DemoOptions {
  dim: number;
  seed: number;
  extraPieces?: string[];
}

export function makeDemoEncoder(dir: string, opts: DemoOptions): Encoder {
  if (!Number.isInteger(opts.dim) || opts.dim < 1) {
    throw new EncoderError("encoder dimension must be a positive integer");
  }
  const vocab = [DEMO_UNK];
  for (let code = 33; code <= 126; code++) {
    vocab.push(String.fromCharCode(code));
  }
  for (const piece of opts.extraPieces ?? []) {
    if (!vocab.includes(piece) && piece && !/\s/u.test(piece)) {
      vocab.push(piece);
    }
  }
  const scale = 1.0 / Math.sqrt(opts.dim);
  const bin = Buffer.alloc(vocab.length * opts.dim * 4);
  vocab.forEach((piece, row) => {
    const next = mulberry32(fnv1a(`${opts.seed}|${piece}`));
    for (let d = 0; d < opts.dim; d++) {
      bin.writeFloatLE((2.0 * next() - 1.0) * scale, (row * opts.dim + d) * 4);
    }
  });
  const meta = {
    dim: opts.dim,
    id: `demo-lookup-d${opts.dim}-s${opts.seed}`,
    unk: DEMO_UNK,
    vocab,
  };
  mkdirSync(dir, { recursive: true });
  writeFileSync(join(dir, "encoder.json"), JSON.stringify(meta, null, 1) + "\n");
  writeFileSync(join(dir, "embeddings.bin"), bin);
  return loadEncoder(dir);
}

export function sha256Hex(data: Buffer): string {
  return createHash("sha256").update(data).digest("hex");
}
