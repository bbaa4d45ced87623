/**
 * Reader for boxscan datasets.
 *
 * A dataset directory holds sample_000000/, sample_000001/, ... plus a
 * manifest.json. Each sample carries an organized point cloud (cloud.spcd)
 * and its 6D ground truth (meta.json).
 *
 * cloud.spcd layout (little-endian):
 *   magic "SPCD" (4 bytes), version u8 = 1, width u32, height u32,
 *   then height*width*3 float32 camera-space XYZ in row-major pixel order.
 *   An invalid pixel is three NaNs. The header is exactly 13 bytes.
 *
 * The reader never writes or mutates datasets.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { endianness } from "node:os";

const MAGIC = "SPCD";
const FORMAT_VERSION = 1;
const HEADER_BYTES = 13;

export class FormatError extends Error {}
export class BadMagicError extends FormatError {}
export class VersionMismatchError extends FormatError {}
export class TruncatedPayloadError extends FormatError {}
export class DimensionMismatchError extends FormatError {}
export class MetadataError extends FormatError {}

export interface Cloud {
  width: number;
  height: number;
  /** length = height * width * 3, camera frame, meters; NaN = invalid pixel */
  points: Float32Array;
}

export interface VolumeBox {
  center: [number, number, number];
  halfExtents: [number, number, number];
  rotationWxyz: [number, number, number, number];
}

export interface LoadedSample {
  points: Float32Array;
  width: number;
  height: number;
  /** 16 numbers, row-major 4x4 camera-to-world matrix */
  cameraToWorld: number[];
  volumeBox: VolumeBox;
  boxParams: Record<string, unknown>;
  index: number;
  masterSeed: number;
}

function payloadToFloat32(payload: Buffer): Float32Array {
  if (endianness() === "LE") {
    // copy so the result owns its buffer and is aligned
    const copy = Buffer.from(payload);
    return new Float32Array(copy.buffer, copy.byteOffset, copy.length / 4);
  }
  const view = new DataView(payload.buffer, payload.byteOffset, payload.length);
  const out = new Float32Array(payload.length / 4);
  for (let i = 0; i < out.length; i++) {
    out[i] = view.getFloat32(i * 4, true);
  }
  return out;
}

/** Parse one cloud.spcd file. */
export function readCloud(path: string): Cloud {
  const blob = readFileSync(path);
  if (blob.length < HEADER_BYTES) {
    throw new TruncatedPayloadError(`${path}: file shorter than the 13-byte header`);
  }
  const magic = blob.toString("latin1", 0, 4);
  if (magic !== MAGIC) {
    throw new BadMagicError(`${path}: bad magic ${JSON.stringify(magic)}, expected "SPCD"`);
  }
  const version = blob.readUInt8(4);
  if (version !== FORMAT_VERSION) {
    throw new VersionMismatchError(`${path}: format version ${version}, expected ${FORMAT_VERSION}`);
  }
  const width = blob.readUInt32LE(5);
  const height = blob.readUInt32LE(9);
  const expected = width * height * 3 * 4;
  const payload = blob.subarray(HEADER_BYTES);
  if (payload.length < expected) {
    throw new TruncatedPayloadError(
      `${path}: payload is ${payload.length} bytes, expected ${expected} for ${width}x${height}`,
    );
  }
  if (payload.length > expected) {
    throw new DimensionMismatchError(
      `${path}: payload is ${payload.length} bytes, ${payload.length - expected} beyond ${width}x${height}`,
    );
  }
  const points = payloadToFloat32(payload);
  for (let p = 0; p < points.length; p += 3) {
    const nans =
      Number(Number.isNaN(points[p])) +
      Number(Number.isNaN(points[p + 1])) +
      Number(Number.isNaN(points[p + 2]));
    if (nans !== 0 && nans !== 3) {
      throw new DimensionMismatchError(`${path}: pixel with partially-NaN coordinates`);
    }
  }
  return { width, height, points };
}

function asTriple(value: unknown, what: string): [number, number, number] {
  if (!Array.isArray(value) || value.length !== 3 || value.some((v) => typeof v !== "number")) {
    throw new MetadataError(`${what} must hold 3 numbers`);
  }
  return value as [number, number, number];
}

function readMeta(sampleDir: string): Record<string, unknown> {
  const path = join(sampleDir, "meta.json");
  let meta: unknown;
  try {
    meta = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    if (err instanceof SyntaxError) {
      throw new MetadataError(`${path}: malformed JSON: ${err.message}`);
    }
    throw err;
  }
  const record = meta as Record<string, unknown>;
  for (const key of ["camera_to_world", "volume_box", "box_params", "sample_index", "master_seed"]) {
    if (!(key in record)) {
      throw new MetadataError(`${path}: missing key "${key}"`);
    }
  }
  const matrix = record["camera_to_world"];
  if (!Array.isArray(matrix) || matrix.length !== 16) {
    throw new MetadataError(`${path}: camera_to_world must hold 16 floats`);
  }
  return record;
}

/** Load one sample directory (cloud.spcd + meta.json). */
export function loadSample(sampleDir: string): LoadedSample {
  const cloud = readCloud(join(sampleDir, "cloud.spcd"));
  const meta = readMeta(sampleDir);
  const vb = meta["volume_box"] as Record<string, unknown>;
  const rotation = vb["rotation_wxyz"];
  if (!Array.isArray(rotation) || rotation.length !== 4) {
    throw new MetadataError(`${sampleDir}: volume_box.rotation_wxyz must hold 4 numbers`);
  }
  return {
    points: cloud.points,
    width: cloud.width,
    height: cloud.height,
    cameraToWorld: meta["camera_to_world"] as number[],
    volumeBox: {
      center: asTriple(vb["center"], "volume_box.center"),
      halfExtents: asTriple(vb["half_extents"], "volume_box.half_extents"),
      rotationWxyz: rotation as [number, number, number, number],
    },
    boxParams: meta["box_params"] as Record<string, unknown>,
    index: meta["sample_index"] as number,
    masterSeed: meta["master_seed"] as number,
  };
}

export function sampleDirName(index: number): string {
  return `sample_${index.toString().padStart(6, "0")}`;
}

/** Number of samples promised by the dataset manifest. */
export function datasetCount(root: string): number {
  const path = join(root, "manifest.json");
  let manifest: unknown;
  try {
    manifest = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    if (err instanceof SyntaxError) {
      throw new MetadataError(`${path}: malformed JSON: ${err.message}`);
    }
    throw err;
  }
  const count = (manifest as Record<string, unknown>)["count"];
  if (typeof count !== "number" || !Number.isInteger(count) || count < 0) {
    throw new MetadataError(`${path}: missing or invalid "count"`);
  }
  return count;
}

/** Yield every sample in index order; length equals the manifest count. */
export function* iterDataset(root: string): Generator<LoadedSample> {
  const count = datasetCount(root);
  for (let i = 0; i < count; i++) {
    const dir = join(root, sampleDirName(i));
    try {
      yield loadSample(dir);
    } catch (err) {
      if (err instanceof FormatError || (err as NodeJS.ErrnoException).code === "ENOENT") {
        throw new MetadataError(
          `sample ${i} listed in the manifest is missing or unreadable: ${(err as Error).message}`,
        );
      }
      throw err;
    }
  }
}

/** The Z channel as a height*width array; NaN preserved for invalid pixels. */
export function toDepth(sample: LoadedSample): Float32Array {
  const n = sample.width * sample.height;
  const depth = new Float32Array(n);
  for (let p = 0; p < n; p++) {
    depth[p] = sample.points[p * 3 + 2];
  }
  return depth;
}
