/**
 * clip-export CLI.
 *
 * Usage: clip-export export --classes <file> --model <id> --out <path>
 *
 * The classes file lists one class name per line; blank lines and lines
 * starting with # are skipped. The embedding table is built fully in
 * memory before anything touches disk, so a failed run never leaves a
 * partial output file.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { clipembBytes } from "./clipemb.js";
import { embedClasses, resolveModel } from "./encoder.js";

const USAGE =
  "usage: clip-export export --classes <file> --model <id> --out <path>";

export function readClassFile(path: string): string[] {
  const text = readFileSync(path, "utf-8");
  const names = text
    .split(/\r?\n/)
    .map((line) => line.trim())
    .filter((line) => line.length > 0 && !line.startsWith("#"));
  if (names.length === 0) {
    throw new Error(`no class names in ${path}`);
  }
  return names;
}

function parseArgs(argv: string[]): { classes: string; model: string; out: string } {
  if (argv[0] !== "export") {
    throw new Error(USAGE);
  }
  const opts: Record<string, string> = {};
  for (let i = 1; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag || !flag.startsWith("--") || value === undefined) {
      throw new Error(USAGE);
    }
    opts[flag.slice(2)] = value;
  }
  const { classes, model, out, ...rest } = opts;
  const unknown = Object.keys(rest);
  if (unknown.length > 0) {
    throw new Error(`unknown option --${unknown[0]}\n${USAGE}`);
  }
  if (!classes || !model || !out) {
    throw new Error(USAGE);
  }
  return { classes, model, out };
}

/** Returns the process exit code; never leaves a partial output file. */
export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs(argv);
  } catch (e) {
    console.error((e as Error).message);
    return 2;
  }
  try {
    const spec = resolveModel(parsed.model);
    const names = readClassFile(parsed.classes);
    const vectors = embedClasses(names, spec);
    const bytes = clipembBytes(names, vectors, {
      model_id: spec.id,
      templates: spec.templates,
    });
    writeFileSync(parsed.out, bytes);
    console.log(
      `wrote ${names.length} embeddings of dim ${spec.dim} (model ${spec.id}) to ${parsed.out}`,
    );
    return 0;
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }
}

const isDirectRun =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (isDirectRun) {
  process.exit(main(process.argv.slice(2)));
}
