import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { CLIPEMB_MAGIC, clipembBytes, parseClipemb } from "../src/clipemb.js";
import { MODELS, cosine, embedClasses } from "../src/encoder.js";

const FIXTURE = fileURLToPath(new URL("./fixtures/dogcat.clipemb", import.meta.url));
const GOLDEN_CLASSES = ["airplane", "cat", "dog"];

function sampleTable() {
  const names = ["alpha", "beta"];
  const vectors = [
    Float32Array.from([1.5, -2.25, 0.125]),
    Float32Array.from([0.0, 3.5, -1.0]),
  ];
  return { names, vectors };
}

describe("round trip", () => {
  it("preserves names, vectors, and metadata", () => {
    const { names, vectors } = sampleTable();
    const bytes = clipembBytes(names, vectors, {
      model_id: "lex-tag-v1",
      templates: ["a photo of a {}"],
    });
    const table = parseClipemb(bytes);
    expect(table.classNames).toEqual(names);
    expect(table.vectors.map((v) => Array.from(v))).toEqual(
      vectors.map((v) => Array.from(v)),
    );
    expect(table.meta.model_id).toBe("lex-tag-v1");
    expect(table.meta.templates).toEqual(["a photo of a {}"]);
  });

  it("write -> read -> write is byte identical", () => {
    const { names, vectors } = sampleTable();
    const meta = { model_id: "lex-tag-v1", templates: ["a photo of a {}"] };
    const first = clipembBytes(names, vectors, meta);
    const parsed = parseClipemb(first);
    const second = clipembBytes(parsed.classNames, parsed.vectors, parsed.meta);
    expect(Array.from(second)).toEqual(Array.from(first));
  });
});

describe("byte layout", () => {
  it("has the pinned header", () => {
    const { names, vectors } = sampleTable();
    const bytes = clipembBytes(names, vectors);
    expect(new TextDecoder().decode(bytes.subarray(0, 8))).toBe(CLIPEMB_MAGIC);
    const view = new DataView(bytes.buffer);
    expect(view.getUint32(8, true)).toBe(2);
    expect(view.getUint32(12, true)).toBe(3);
    expect(view.getFloat32(16, true)).toBeCloseTo(1.5, 6);
    // trailer starts right after 2 * 3 floats
    const trailer = new TextDecoder().decode(bytes.subarray(16 + 24));
    expect(JSON.parse(trailer).class_names).toEqual(names);
  });

  it("accepts the bare array trailer form", () => {
    const { names, vectors } = sampleTable();
    const bytes = clipembBytes(names, vectors);
    const vecEnd = 16 + 4 * 2 * 3;
    const bare = new Uint8Array(vecEnd + 17);
    bare.set(bytes.subarray(0, vecEnd));
    bare.set(new TextEncoder().encode('["alpha","beta"]'), vecEnd);
    const table = parseClipemb(bare.subarray(0, vecEnd + 16));
    expect(table.classNames).toEqual(names);
    expect(table.meta.model_id).toBeUndefined();
  });
});

describe("rejections", () => {
  const good = () => {
    const { names, vectors } = sampleTable();
    return clipembBytes(names, vectors);
  };

  it("bad magic", () => {
    const bytes = good();
    bytes[0] = 0x58;
    expect(() => parseClipemb(bytes)).toThrow(/magic/);
  });

  it("truncated vector block", () => {
    expect(() => parseClipemb(good().subarray(0, 20))).toThrow(/truncated/);
  });

  it("trailer naming the wrong count", () => {
    const bytes = good();
    const vecEnd = 16 + 4 * 2 * 3;
    const wrong = new Uint8Array(vecEnd + 9);
    wrong.set(bytes.subarray(0, vecEnd));
    wrong.set(new TextEncoder().encode('["alpha"]'), vecEnd);
    expect(() => parseClipemb(wrong)).toThrow(/one name per class/);
  });

  it("broken trailer json", () => {
    const bytes = good();
    const vecEnd = 16 + 4 * 2 * 3;
    const broken = new Uint8Array(vecEnd + 3);
    broken.set(bytes.subarray(0, vecEnd));
    broken.set(new TextEncoder().encode("[{!"), vecEnd);
    expect(() => parseClipemb(broken)).toThrow(/trailer/);
  });

  it("writer rejects duplicates, ragged rows, and non-finite values", () => {
    const v3 = Float32Array.from([1, 2, 3]);
    expect(() => clipembBytes(["a", "a"], [v3, v3])).toThrow(/duplicate/);
    expect(() =>
      clipembBytes(["a", "b"], [v3, Float32Array.from([1, 2])]),
    ).toThrow(/dimension/);
    expect(() =>
      clipembBytes(["a"], [Float32Array.from([1, Infinity, 3])]),
    ).toThrow(/finite/);
    expect(() => clipembBytes([], [])).toThrow(/empty/);
    expect(() => clipembBytes(["a", "b"], [v3])).toThrow(/one vector per/);
  });
});

describe("golden fixture", () => {
  it("matches the committed bytes exactly", () => {
    const spec = MODELS["lex-tag-v1"]!;
    const vectors = embedClasses(GOLDEN_CLASSES, spec);
    const bytes = clipembBytes(GOLDEN_CLASSES, vectors, {
      model_id: spec.id,
      templates: spec.templates,
    });
    const committed = new Uint8Array(readFileSync(FIXTURE));
    expect(bytes.length).toBe(committed.length);
    expect(Array.from(bytes)).toEqual(Array.from(committed));
  });

  it("parses with the expected semantic ordering", () => {
    const table = parseClipemb(new Uint8Array(readFileSync(FIXTURE)));
    expect(table.classNames).toEqual(GOLDEN_CLASSES);
    expect(table.meta.model_id).toBe("lex-tag-v1");
    const [airplane, cat, dog] = table.vectors;
    expect(cosine(dog!, cat!)).toBeGreaterThan(cosine(dog!, airplane!));
  });
});
