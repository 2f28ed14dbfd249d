/**
 * TUPX binary container for per-token embeddings. Layout, all integers
 * unsigned little-endian:
 *
 *   "TUPX"  u32 version=1  u32 sentence_count
 *   per sentence:
 *     u32 id_len, id_len bytes UTF-8 id
 *     u32 token_count, u32 dim
 *     per token: u32 char_start, u32 char_end, dim x f32
 *
 * Character offsets are Unicode code points into the sentence text.
 */

export const TUPX_MAGIC = "TUPX";
export const TUPX_VERSION = 1;

export class TupxError extends Error {}

export interface TokenVector {
  charStart: number;
  charEnd: number;
  vector: Float32Array;
}

export interface SentenceRecord {
  id: string;
  dim: number;
  tokens: TokenVector[];
}

function checkRecord(rec: SentenceRecord): void {
  if (!Number.isInteger(rec.dim) || rec.dim < 1) {
    throw new TupxError(`sentence ${rec.id}: dimension must be a positive integer`);
  }
  let prevEnd = 0;
  for (const tok of rec.tokens) {
    if (!Number.isInteger(tok.charStart) || !Number.isInteger(tok.charEnd)) {
      throw new TupxError(`sentence ${rec.id}: token offsets must be integers`);
    }
    if (tok.charStart < prevEnd || tok.charEnd <= tok.charStart) {
      throw new TupxError(`sentence ${rec.id}: token offsets must be ordered and non-overlapping`);
    }
    prevEnd = tok.charEnd;
    if (tok.vector.length !== rec.dim) {
      throw new TupxError(
        `sentence ${rec.id}: vector length ${tok.vector.length} does not match dimension ${rec.dim}`
      );
    }
    for (const v of tok.vector) {
      if (!Number.isFinite(v)) {
        throw new TupxError(`sentence ${rec.id}: vectors must be finite`);
      }
    }
  }
}

export function encodeTupx(records: SentenceRecord[]): Buffer {
  const seen = new Set<string>();
  let size = 12;
  for (const rec of records) {
    if (seen.has(rec.id)) {
      throw new TupxError(`duplicate sentence id ${rec.id}`);
    }
    seen.add(rec.id);
    checkRecord(rec);
    size += 4 + Buffer.byteLength(rec.id, "utf8") + 8 + rec.tokens.length * (8 + 4 * rec.dim);
  }
  const buf = Buffer.alloc(size);
  let off = buf.write(TUPX_MAGIC, 0, "ascii");
  off = buf.writeUInt32LE(TUPX_VERSION, off);
  off = buf.writeUInt32LE(records.length, off);
  for (const rec of records) {
    const idBytes = Buffer.byteLength(rec.id, "utf8");
    off = buf.writeUInt32LE(idBytes, off);
    off += buf.write(rec.id, off, "utf8");
    off = buf.writeUInt32LE(rec.tokens.length, off);
    off = buf.writeUInt32LE(rec.dim, off);
    for (const tok of rec.tokens) {
      off = buf.writeUInt32LE(tok.charStart, off);
      off = buf.writeUInt32LE(tok.charEnd, off);
      for (const v of tok.vector) {
        off = buf.writeFloatLE(v, off);
      }
    }
  }
  return buf;
}

/** Strict reader; exists mainly so tests can close the loop in-process. */
export function decodeTupx(buf: Buffer): SentenceRecord[] {
  let off = 0;
  const need = (n: number): number => {
    if (off + n > buf.length) {
      throw new TupxError(`truncated file at byte ${off}`);
    }
    const at = off;
    off += n;
    return at;
  };
  const u32 = (): number => buf.readUInt32LE(need(4));
  if (buf.subarray(need(4), 4).toString("ascii") !== TUPX_MAGIC) {
    throw new TupxError("bad magic");
  }
  const version = u32();
  if (version !== TUPX_VERSION) {
    throw new TupxError(`unsupported format version ${version}`);
  }
  const count = u32();
  const out: SentenceRecord[] = [];
  const seen = new Set<string>();
  for (let s = 0; s < count; s++) {
    const idBytes = u32();
    const id = buf.subarray(need(idBytes), off).toString("utf8");
    if (seen.has(id)) {
      throw new TupxError(`duplicate sentence id ${id}`);
    }
    seen.add(id);
    const tokenCount = u32();
    const dim = u32();
    if (dim < 1) {
      throw new TupxError(`sentence ${id}: dimension must be positive`);
    }
    const tokens: TokenVector[] = [];
    for (let t = 0; t < tokenCount; t++) {
      const charStart = u32();
      const charEnd = u32();
      const vector = new Float32Array(dim);
      for (let d = 0; d < dim; d++) {
        vector[d] = buf.readFloatLE(need(4));
      }
      tokens.push({ charStart, charEnd, vector });
    }
    const rec = { id, dim, tokens };
    checkRecord(rec);
    out.push(rec);
  }
  if (off !== buf.length) {
    throw new TupxError(`${buf.length - off} trailing bytes`);
  }
  return out;
}
