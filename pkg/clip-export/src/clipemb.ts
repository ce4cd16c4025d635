/**
 * CLIPEMB1 container: 8-byte magic "CLIPEMB1", u32 LE class count, u32 LE
 * embedding dim, count*dim float32 LE vectors row-major, then a JSON
 * trailer running to end of file. This writer emits an object trailer
 * {class_names, model_id, templates}; readers must also accept the bare
 * array form that minimal writers produce. Write -> read -> write is
 * byte-identical.
 */

export const CLIPEMB_MAGIC = "CLIPEMB1";

export interface ClipembMeta {
  model_id?: string;
  templates?: readonly string[];
}

export interface ClipembTable {
  classNames: string[];
  vectors: Float32Array[];
  meta: ClipembMeta;
}

export function clipembBytes(
  classNames: readonly string[],
  vectors: readonly Float32Array[],
  meta: ClipembMeta = {},
): Uint8Array {
  if (classNames.length !== vectors.length) {
    throw new Error("need exactly one vector per class name");
  }
  if (classNames.length === 0) {
    throw new Error("refusing to write an empty table");
  }
  if (new Set(classNames).size !== classNames.length) {
    throw new Error("duplicate class names");
  }
  const dim = vectors[0]!.length;
  for (const v of vectors) {
    if (v.length !== dim) {
      throw new Error("all vectors must share one dimension");
    }
    for (const x of v) {
      if (!Number.isFinite(x)) {
        throw new Error("vectors must be finite");
      }
    }
  }
  const trailerObj: Record<string, unknown> = { class_names: classNames };
  if (meta.model_id !== undefined) trailerObj["model_id"] = meta.model_id;
  if (meta.templates !== undefined) trailerObj["templates"] = meta.templates;
  const trailer = new TextEncoder().encode(JSON.stringify(trailerObj));

  const headerLen = 8 + 4 + 4;
  const vecLen = 4 * classNames.length * dim;
  const out = new Uint8Array(headerLen + vecLen + trailer.length);
  const view = new DataView(out.buffer);
  new TextEncoder().encodeInto(CLIPEMB_MAGIC, out);
  view.setUint32(8, classNames.length, true);
  view.setUint32(12, dim, true);
  let off = headerLen;
  for (const v of vectors) {
    for (let i = 0; i < dim; i++) {
      view.setFloat32(off, v[i]!, true);
      off += 4;
    }
  }
  out.set(trailer, headerLen + vecLen);
  return out;
}

export function parseClipemb(buf: Uint8Array): ClipembTable {
  const magic = new TextDecoder().decode(buf.subarray(0, 8));
  if (buf.length < 16 || magic !== CLIPEMB_MAGIC) {
    throw new Error("not a CLIPEMB1 payload (bad magic)");
  }
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const n = view.getUint32(8, true);
  const dim = view.getUint32(12, true);
  const vecEnd = 16 + 4 * n * dim;
  if (buf.length < vecEnd) {
    throw new Error("truncated CLIPEMB1 vector block");
  }
  const vectors: Float32Array[] = [];
  for (let r = 0; r < n; r++) {
    const v = new Float32Array(dim);
    for (let i = 0; i < dim; i++) {
      v[i] = view.getFloat32(16 + 4 * (r * dim + i), true);
    }
    vectors.push(v);
  }
  let trailer: unknown;
  try {
    trailer = JSON.parse(new TextDecoder().decode(buf.subarray(vecEnd)));
  } catch (e) {
    throw new Error(`bad CLIPEMB1 trailer: ${(e as Error).message}`);
  }
  let names: unknown;
  let meta: ClipembMeta = {};
  if (Array.isArray(trailer)) {
    names = trailer;
  } else if (trailer !== null && typeof trailer === "object") {
    const obj = trailer as Record<string, unknown>;
    names = obj["class_names"];
    meta = {
      model_id: typeof obj["model_id"] === "string" ? obj["model_id"] : undefined,
      templates: Array.isArray(obj["templates"])
        ? (obj["templates"] as string[])
        : undefined,
    };
  }
  if (
    !Array.isArray(names) ||
    names.length !== n ||
    !names.every((s) => typeof s === "string")
  ) {
    throw new Error("CLIPEMB1 trailer must list one name per class");
  }
  return { classNames: names as string[], vectors, meta };
}
