/**
 * Bundled deterministic text encoder.
 *
 * There is no network and no learned weights here: every token maps to a
 * fixed pseudo-random unit vector seeded by a hash of the token string,
 * and a class embedding is a weighted sum of its word vector, the vectors
 * of its semantic tags from a small built-in lexicon, and one shared
 * vector per prompt template. Classes that share tags (dog and cat are
 * both mammals and pets) therefore land measurably closer in cosine than
 * unrelated classes (dog and airplane), which is the property downstream
 * gating cares about. Unknown words get no tags and come out near
 * orthogonal to everything else.
 *
 * Output vectors are intentionally not normalized to unit length; real
 * text encoders do not emit unit vectors either, and readers must cope.
 */

const WORD_WEIGHT = 1.0;
const TAG_WEIGHT = 0.6;
const TEMPLATE_WEIGHT = 0.25;

/** Semantic tags for common class names. Lowercase keys. */
export const TAG_LEXICON: Readonly<Record<string, readonly string[]>> = {
  dog: ["animal", "mammal", "pet", "canine"],
  cat: ["animal", "mammal", "pet", "feline"],
  horse: ["animal", "mammal", "hoofed"],
  cow: ["animal", "mammal", "hoofed", "livestock"],
  sheep: ["animal", "mammal", "hoofed", "livestock"],
  bird: ["animal", "winged", "feathered"],
  airplane: ["vehicle", "machine", "winged", "aircraft"],
  helicopter: ["vehicle", "machine", "aircraft"],
  car: ["vehicle", "machine", "wheeled", "road"],
  bus: ["vehicle", "machine", "wheeled", "road"],
  bicycle: ["vehicle", "wheeled", "road"],
  motorbike: ["vehicle", "machine", "wheeled", "road"],
  boat: ["vehicle", "machine", "watercraft"],
  train: ["vehicle", "machine", "rail"],
  person: ["human"],
  chair: ["furniture", "indoor"],
  sofa: ["furniture", "indoor"],
  table: ["furniture", "indoor"],
  "potted plant": ["plant", "indoor"],
  tv: ["appliance", "indoor", "machine"],
  bottle: ["container", "indoor"],
};

export interface ModelSpec {
  readonly id: string;
  readonly dim: number;
  readonly templates: readonly string[];
}

/** The registry of bundled models. Unknown ids are a hard error. */
export const MODELS: Readonly<Record<string, ModelSpec>> = {
  "lex-tag-v1": {
    id: "lex-tag-v1",
    dim: 1024,
    templates: ["a photo of a {}"],
  },
  "lex-tag-small-v1": {
    id: "lex-tag-small-v1",
    dim: 128,
    templates: ["a photo of a {}"],
  },
};

export function resolveModel(id: string): ModelSpec {
  const spec = MODELS[id];
  if (!spec) {
    const known = Object.keys(MODELS).sort().join(", ");
    throw new Error(`unknown model id "${id}" (bundled models: ${known})`);
  }
  return spec;
}

/** FNV-1a over UTF-8 bytes, 64-bit. */
export function fnv1a64(text: string): bigint {
  const bytes = new TextEncoder().encode(text);
  let hash = 0xcbf29ce484222325n;
  const prime = 0x100000001b3n;
  const mask = 0xffffffffffffffffn;
  for (const b of bytes) {
    hash ^= BigInt(b);
    hash = (hash * prime) & mask;
  }
  return hash;
}

/** splitmix64: the standard 64-bit mixing sequence. */
function splitmix64(state: bigint): () => bigint {
  const mask = 0xffffffffffffffffn;
  let s = state & mask;
  return () => {
    s = (s + 0x9e3779b97f4a7c15n) & mask;
    let z = s;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & mask;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & mask;
    return (z ^ (z >> 31n)) & mask;
  };
}

function uniformStream(seed: bigint): () => number {
  const next = splitmix64(seed);
  // 53 high bits -> double in [0, 1)
  return () => Number(next() >> 11n) / 9007199254740992;
}

/** Deterministic unit vector for a label (gaussian components, Box-Muller). */
export function unitVector(label: string, dim: number): Float64Array {
  const uniform = uniformStream(fnv1a64(label));
  const out = new Float64Array(dim);
  for (let i = 0; i < dim; i += 2) {
    let u1 = uniform();
    const u2 = uniform();
    if (u1 <= Number.EPSILON) u1 = Number.EPSILON;
    const r = Math.sqrt(-2.0 * Math.log(u1));
    out[i] = r * Math.cos(2.0 * Math.PI * u2);
    if (i + 1 < dim) out[i + 1] = r * Math.sin(2.0 * Math.PI * u2);
  }
  let norm = 0;
  for (let i = 0; i < dim; i++) norm += out[i]! * out[i]!;
  norm = Math.sqrt(norm);
  for (let i = 0; i < dim; i++) out[i]! /= norm;
  return out;
}

/** Embed one class name under a model spec. */
export function embedClass(name: string, model: ModelSpec): Float32Array {
  const clean = name.trim().toLowerCase();
  if (!clean) {
    throw new Error("class name must be non-empty");
  }
  const acc = new Float64Array(model.dim);
  const add = (label: string, weight: number) => {
    const v = unitVector(label, model.dim);
    for (let i = 0; i < model.dim; i++) acc[i]! += weight * v[i]!;
  };
  add(`word:${clean}`, WORD_WEIGHT);
  for (const tag of TAG_LEXICON[clean] ?? []) {
    add(`tag:${tag}`, TAG_WEIGHT);
  }
  for (const template of model.templates) {
    add(`tpl:${template}`, TEMPLATE_WEIGHT);
  }
  return Float32Array.from(acc);
}

/** Embed a list of names; rejects duplicates after trimming/lowercasing. */
export function embedClasses(names: readonly string[], model: ModelSpec): Float32Array[] {
  const seen = new Set<string>();
  for (const raw of names) {
    const clean = raw.trim().toLowerCase();
    if (seen.has(clean)) {
      throw new Error(`duplicate class name "${clean}"`);
    }
    seen.add(clean);
  }
  return names.map((n) => embedClass(n, model));
}

export function cosine(a: ArrayLike<number>, b: ArrayLike<number>): number {
  if (a.length !== b.length) {
    throw new Error("cosine needs vectors of equal length");
  }
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    const x = a[i]!;
    const y = b[i]!;
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  return dot / Math.sqrt(na * nb);
}
