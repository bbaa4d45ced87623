import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync, cpSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import {
  BadMagicError,
  MetadataError,
  TruncatedPayloadError,
  datasetCount,
  iterDataset,
  loadSample,
  readCloud,
  sampleDirName,
  toDepth,
} from "../src/index.js";

const HEADER_BYTES = 13;

let work: string;
let dataset: string;

beforeAll(() => {
  // build a small fixture dataset through the generator's own CLI; the
  // loader only ever touches the documented on-disk format
  work = mkdtempSync(join(tmpdir(), "boxscan-loader-"));
  const configPath = join(work, "config.json");
  writeFileSync(
    configPath,
    JSON.stringify({ master_seed: 5, camera: { width: 48, height: 36 } }),
  );
  dataset = join(work, "dataset");
  execFileSync(
    "python3",
    [
      "-m", "boxscan", "generate",
      "--config", configPath,
      "--out", dataset,
      "--count", "3",
      "--threads", "1",
    ],
    { stdio: "pipe" },
  );
}, 120_000);

afterAll(() => {
  rmSync(work, { recursive: true, force: true });
});

describe("readCloud", () => {
  it("returns the float payload bitwise-identical to the file", () => {
    const path = join(dataset, sampleDirName(0), "cloud.spcd");
    const cloud = readCloud(path);
    expect(cloud.width).toBe(48);
    expect(cloud.height).toBe(36);
    expect(cloud.points.length).toBe(48 * 36 * 3);
    const raw = readFileSync(path).subarray(HEADER_BYTES);
    const mine = Buffer.from(cloud.points.buffer, cloud.points.byteOffset, raw.length);
    expect(Buffer.compare(mine, raw)).toBe(0);
  });

  it("parses a hand-built 2x2 all-invalid golden file", () => {
    const header = Buffer.alloc(HEADER_BYTES);
    header.write("SPCD", 0, "latin1");
    header.writeUInt8(1, 4);
    header.writeUInt32LE(2, 5);
    header.writeUInt32LE(2, 9);
    const payload = Buffer.alloc(48);
    for (let i = 0; i < 12; i++) payload.writeFloatLE(NaN, i * 4);
    const path = join(work, "golden.spcd");
    writeFileSync(path, Buffer.concat([header, payload]));
    const cloud = readCloud(path);
    expect(cloud.width).toBe(2);
    expect(cloud.height).toBe(2);
    expect([...cloud.points].every(Number.isNaN)).toBe(true);
  });

  it("rejects a bad magic", () => {
    const src = readFileSync(join(dataset, sampleDirName(0), "cloud.spcd"));
    const bad = Buffer.from(src);
    bad.write("XXXX", 0, "latin1");
    const path = join(work, "badmagic.spcd");
    writeFileSync(path, bad);
    expect(() => readCloud(path)).toThrow(BadMagicError);
  });

  it("rejects a truncated payload", () => {
    const src = readFileSync(join(dataset, sampleDirName(0), "cloud.spcd"));
    const path = join(work, "short.spcd");
    writeFileSync(path, src.subarray(0, src.length - 5));
    expect(() => readCloud(path)).toThrow(TruncatedPayloadError);
  });
});

describe("loadSample", () => {
  it("exposes metadata alongside the points", () => {
    const sample = loadSample(join(dataset, sampleDirName(1)));
    expect(sample.index).toBe(1);
    expect(sample.masterSeed).toBe(5);
    expect(sample.cameraToWorld).toHaveLength(16);
    expect(sample.volumeBox.halfExtents.every((v) => v > 0)).toBe(true);
    const norm = Math.hypot(...sample.volumeBox.rotationWxyz);
    expect(Math.abs(norm - 1)).toBeLessThan(1e-9);
    expect(sample.boxParams["size"]).toHaveLength(3);
  });

  it("rejects malformed metadata", () => {
    const dir = join(work, "badmeta");
    cpSync(join(dataset, sampleDirName(0)), dir, { recursive: true });
    writeFileSync(join(dir, "meta.json"), "{broken");
    expect(() => loadSample(dir)).toThrow(MetadataError);
  });
});

describe("iterDataset", () => {
  it("yields manifest-count samples in index order", () => {
    expect(datasetCount(dataset)).toBe(3);
    const indices = [...iterDataset(dataset)].map((s) => s.index);
    expect(indices).toEqual([0, 1, 2]);
  });

  it("names the missing index when a sample is gone", () => {
    const broken = join(work, "broken-dataset");
    cpSync(dataset, broken, { recursive: true });
    rmSync(join(broken, sampleDirName(1)), { recursive: true });
    const drain = () => [...iterDataset(broken)];
    expect(drain).toThrow(MetadataError);
    expect(drain).toThrow(/sample 1/);
  });
});

describe("toDepth", () => {
  it("equals the z channel, NaN-aware", () => {
    const sample = loadSample(join(dataset, sampleDirName(2)));
    const depth = toDepth(sample);
    expect(depth.length).toBe(sample.width * sample.height);
    let valid = 0;
    for (let p = 0; p < depth.length; p++) {
      const z = sample.points[p * 3 + 2];
      if (Number.isNaN(z)) {
        expect(Number.isNaN(depth[p])).toBe(true);
      } else {
        expect(Object.is(depth[p], z)).toBe(true);
        valid += 1;
      }
    }
    expect(valid).toBeGreaterThan(0);
  });
});
