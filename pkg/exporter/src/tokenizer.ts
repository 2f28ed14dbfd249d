/**
 * Greedy longest-match tokenizer over a fixed vocabulary.
 *
 * Offsets are Unicode code points, not UTF-16 units, so they agree with
 * consumers that index strings by code point. Whitespace separates tokens
 * and is never part of one; every other character is covered, unknown
 * characters as single-character pieces. Pieces therefore tile the
 * non-whitespace text in order without overlap.
 */

export interface Token {
  charStart: number;
  charEnd: number;
  piece: string;
}

const WHITESPACE = /\s/u;

export function maxPieceLength(vocab: Iterable<string>): number {
  let max = 1;
  for (const piece of vocab) {
    const n = Array.from(piece).length;
    if (n > max) {
      max = n;
    }
  }
  return max;
}

export function tokenize(text: string, vocab: ReadonlySet<string>, maxLen?: number): Token[] {
  const chars = Array.from(text);
  const cap = maxLen ?? maxPieceLength(vocab);
  const out: Token[] = [];
  let i = 0;
  while (i < chars.length) {
    const ch = chars[i]!;
    if (WHITESPACE.test(ch)) {
      i += 1;
      continue;
    }
    let piece = ch;
    let len = 1;
    for (let tryLen = Math.min(cap, chars.length - i); tryLen > 1; tryLen--) {
      const candidate = chars.slice(i, i + tryLen).join("");
      if (vocab.has(candidate)) {
        piece = candidate;
        len = tryLen;
        break;
      }
    }
    out.push({ charStart: i, charEnd: i + len, piece });
    i += len;
  }
  return out;
}
