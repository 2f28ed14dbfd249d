/** Drives the compiled binary; `npm test` builds first via pretest. */

import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { decodeTupx } from "../src/tupx.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const CLI = join(HERE, "..", "dist", "cli.js");

function run(args: string[], expectFailure = false): { stdout: string; stderr: string } {
  try {
    const stdout = execFileSync("node", [CLI, ...args], { encoding: "utf8" });
    expect(expectFailure, `expected failure, got: ${stdout}`).toBe(false);
    return { stdout, stderr: "" };
  } catch (exc) {
    const err = exc as { stdout?: string; stderr?: string; status?: number };
    expect(expectFailure, `unexpected failure: ${err.stderr}`).toBe(true);
    expect(err.status).toBe(1);
    return { stdout: err.stdout ?? "", stderr: err.stderr ?? "" };
  }
}

describe("command line", () => {
  it("builds an encoder and exports a corpus", () => {
    expect(existsSync(CLI), "dist/cli.js missing; run npm run build").toBe(true);
    const dir = mkdtempSync(join(tmpdir(), "cli-"));
    const corpus = join(dir, "corpus.json");
    writeFileSync(
      corpus,
      JSON.stringify({ sentences: [{ id: "s-0", text: "hardness reached 450 HV", tuples: [] }] })
    );
    const encoder = join(dir, "encoder");
    const made = run([
      "make-demo-encoder", "--out", encoder, "--dim", "8", "--seed", "0", "--corpus", corpus,
    ]);
    expect(made.stdout).toMatch(/wrote encoder demo-lookup-d8-s0/);

    const out = join(dir, "out.tupx");
    const exported = run([
      "export", "--corpus", corpus, "--encoder", encoder, "--out", out, "--max-seq-len", "3",
    ]);
    expect(exported.stdout).toMatch(/3 token vectors for 1 sentences/);
    expect(exported.stdout).toMatch(/1 truncated/);
    expect(decodeTupx(readFileSync(out))[0]!.tokens).toHaveLength(3);
    const manifest = JSON.parse(readFileSync(out + ".manifest.json", "utf8"));
    expect(manifest.truncatedSentenceIds).toEqual(["s-0"]);
  });

  it("reports errors as JSON on stderr with exit code 1", () => {
    const { stderr } = run(["export", "--corpus", "/nope.json"], true);
    const parsed = JSON.parse(stderr);
    expect(parsed.error).toBe("ExportError");
    expect(parsed.message).toMatch(/--encoder/);
  });

  it("rejects unknown commands", () => {
    const { stderr } = run(["frobnicate"], true);
    expect(JSON.parse(stderr).message).toMatch(/unknown command/);
  });
});
