import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it, vi } from "vitest";
import { main, readClassFile } from "../src/cli.js";
import { parseClipemb } from "../src/clipemb.js";
import { cosine } from "../src/encoder.js";

function scratch(): string {
  return mkdtempSync(join(tmpdir(), "clip-export-"));
}

function quiet<T>(fn: () => T): T {
  const log = vi.spyOn(console, "log").mockImplementation(() => {});
  const err = vi.spyOn(console, "error").mockImplementation(() => {});
  try {
    return fn();
  } finally {
    log.mockRestore();
    err.mockRestore();
  }
}

describe("readClassFile", () => {
  it("skips blanks and comments", () => {
    const dir = scratch();
    const file = join(dir, "classes.txt");
    writeFileSync(file, "# header\n\ndog\n  cat  \n\n# tail\nairplane\n");
    expect(readClassFile(file)).toEqual(["dog", "cat", "airplane"]);
  });

  it("rejects an empty list", () => {
    const dir = scratch();
    const file = join(dir, "empty.txt");
    writeFileSync(file, "# nothing\n\n");
    expect(() => readClassFile(file)).toThrow(/no class names/);
  });
});

describe("export command", () => {
  it("writes a parseable table end to end", () => {
    const dir = scratch();
    const classes = join(dir, "classes.txt");
    const out = join(dir, "table.clipemb");
    writeFileSync(classes, "dog\ncat\nairplane\n");
    const code = quiet(() =>
      main(["export", "--classes", classes, "--model", "lex-tag-v1", "--out", out]),
    );
    expect(code).toBe(0);
    const table = parseClipemb(new Uint8Array(readFileSync(out)));
    expect(table.classNames).toEqual(["dog", "cat", "airplane"]);
    expect(table.meta.model_id).toBe("lex-tag-v1");
    expect(table.vectors[0]!.length).toBe(1024);
    const [dog, cat, airplane] = table.vectors;
    expect(cosine(dog!, cat!)).toBeGreaterThan(cosine(dog!, airplane!));
  });

  it("is deterministic across runs", () => {
    const dir = scratch();
    const classes = join(dir, "classes.txt");
    writeFileSync(classes, "dog\ncat\n");
    const outA = join(dir, "a.clipemb");
    const outB = join(dir, "b.clipemb");
    for (const out of [outA, outB]) {
      const code = quiet(() =>
        main(["export", "--classes", classes, "--model", "lex-tag-v1", "--out", out]),
      );
      expect(code).toBe(0);
    }
    expect(Array.from(readFileSync(outA))).toEqual(Array.from(readFileSync(outB)));
  });

  it("fails on an unknown model id without touching the output path", () => {
    const dir = scratch();
    const classes = join(dir, "classes.txt");
    const out = join(dir, "table.clipemb");
    writeFileSync(classes, "dog\n");
    const code = quiet(() =>
      main(["export", "--classes", classes, "--model", "no-such-model", "--out", out]),
    );
    expect(code).toBe(1);
    expect(existsSync(out)).toBe(false);
  });

  it("fails on duplicate classes without writing output", () => {
    const dir = scratch();
    const classes = join(dir, "classes.txt");
    const out = join(dir, "table.clipemb");
    writeFileSync(classes, "dog\nDog\n");
    const code = quiet(() =>
      main(["export", "--classes", classes, "--model", "lex-tag-v1", "--out", out]),
    );
    expect(code).toBe(1);
    expect(existsSync(out)).toBe(false);
  });

  it("rejects bad usage with exit code 2", () => {
    expect(quiet(() => main(["export", "--classes", "x"]))).toBe(2);
    expect(quiet(() => main(["frobnicate"]))).toBe(2);
    expect(
      quiet(() =>
        main([
          "export", "--classes", "x", "--model", "lex-tag-v1",
          "--out", "y", "--bogus", "z",
        ]),
      ),
    ).toBe(2);
  });
});
