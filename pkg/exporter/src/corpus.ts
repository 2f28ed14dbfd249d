/** Minimal reader for the annotated-corpus JSON: the exporter only needs
 *  sentence ids and text; tuple annotations pass through untouched. */

export class CorpusError extends Error {}

export interface CorpusSentence {
  id: string;
  text: string;
}

export function parseCorpus(raw: string): CorpusSentence[] {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch (exc) {
    throw new CorpusError(`corpus is not valid JSON: ${(exc as Error).message}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new CorpusError("corpus must be a JSON object");
  }
  const sentences = (doc as Record<string, unknown>)["sentences"];
  if (!Array.isArray(sentences)) {
    throw new CorpusError("corpus must hold a 'sentences' array");
  }
  const out: CorpusSentence[] = [];
  const seen = new Set<string>();
  for (const entry of sentences) {
    if (typeof entry !== "object" || entry === null) {
      throw new CorpusError("every sentence must be an object");
    }
    const { id, text } = entry as Record<string, unknown>;
    if (typeof id !== "string" || id.length === 0) {
      throw new CorpusError("sentence id must be a non-empty string");
    }
    if (typeof text !== "string") {
      throw new CorpusError(`sentence ${id}: text must be a string`);
    }
    if (seen.has(id)) {
      throw new CorpusError(`duplicate sentence id ${id}`);
    }
    seen.add(id);
    out.push({ id, text });
  }
  return out;
}
