"""Bit-exact on-disk sample format and whole-dataset generation.

Each sample directory holds two files:

cloud.spcd (little-endian):
    magic   4 bytes  "SPCD"
    version u8       1
    width   u32
    height  u32      -- header is exactly 13 bytes
    payload height*width*3 float32, row-major pixel order (row 0 = top
            image row), camera-space XYZ meters; invalid pixel = 3 NaNs

meta.json: camera_to_world (16 floats, row-major 4x4), volume_box
{center, half_extents, rotation_wxyz}, box_params, sample_index,
master_seed. JSON numbers carry 17 significant digits so every float64
round-trips exactly.

manifest.json: count, config echo, tool_version, rng_id, format_version.
Written once after all samples complete.
"""

from __future__ import annotations

import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .boxmodel import BoxParams, build_box
from .mesh import TriMesh
from .rotations import quat_wxyz_to_rotation, rotation_to_quat_wxyz, yaw_matrix
from .sampling import (
    RNG_ID,
    GenerationConfig,
    RigidPose,
    derive_stream,
    sample_box_params,
    sample_camera_pose,
)
from .scanner import Intrinsics, StructuredCloud, build_accel, cast_grid, projector_shadow_filter

__all__ = [
    "VolumeBox",
    "SampleRecord",
    "FormatError",
    "BadMagicError",
    "VersionMismatchError",
    "TruncatedPayloadError",
    "DimensionMismatchError",
    "MetadataError",
    "ground_truth_volume_box",
    "write_sample",
    "read_sample",
    "read_meta",
    "write_cloud",
    "read_cloud",
    "generate_dataset",
    "sample_dir_name",
    "json_dumps",
]

MAGIC = b"SPCD"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sBII")  # magic, version, width, height: 13 bytes


class FormatError(ValueError):
    """Malformed sample or manifest file."""


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class DimensionMismatchError(FormatError):
    pass


class MetadataError(FormatError):
    pass


@dataclass(frozen=True)
class VolumeBox:
    """Oriented cuboid of the box body (outer dimensions, flaps excluded)."""

    center: np.ndarray
    half_extents: np.ndarray
    rotation_wxyz: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=np.float64))
        object.__setattr__(self, "rotation_wxyz", np.asarray(self.rotation_wxyz, dtype=np.float64))

    def validate(self) -> None:
        if not (self.half_extents > 0.0).all():
            raise ValueError(f"half_extents must be positive, got {self.half_extents}")
        if abs(float(np.linalg.norm(self.rotation_wxyz)) - 1.0) > 1e-9:
            raise ValueError("rotation quaternion is not unit-norm within 1e-9")

    def rotation_matrix(self) -> np.ndarray:
        return quat_wxyz_to_rotation(self.rotation_wxyz)


@dataclass(eq=False)
class SampleRecord:
    cloud: StructuredCloud
    camera_to_world: RigidPose
    volume_box: VolumeBox
    box_params: BoxParams
    sample_index: int
    master_seed: int


def ground_truth_volume_box(params: BoxParams, box_pose: RigidPose) -> VolumeBox:
    """The box body cuboid (outer dimensions = params.size, flaps excluded)
    in world frame: the shell is built with its bottom at z=0, so the body
    center sits at (0, 0, size_z/2) in box frame."""
    sx, sy, sz = params.size
    center = box_pose.apply(np.array([0.0, 0.0, sz / 2.0]))
    vb = VolumeBox(
        center=center,
        half_extents=np.array([sx / 2.0, sy / 2.0, sz / 2.0]),
        rotation_wxyz=rotation_to_quat_wxyz(box_pose.rotation),
    )
    vb.validate()
    return vb


# ---------------------------------------------------------------------------
# JSON with exact float round trip
# ---------------------------------------------------------------------------


def _format_number(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite number cannot be serialized to JSON")
    return format(x, ".17g")


def json_dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON: insertion-ordered keys, floats at 17 significant
    digits (exact float64 round trip), 2-space indentation."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  {json.dumps(k)}: {json_dumps(v, indent + 1)}' for k, v in obj.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        body = ", ".join(json_dumps(v, indent) for v in obj)
        return "[" + body + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_number(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


# ---------------------------------------------------------------------------
# cloud.spcd
# ---------------------------------------------------------------------------


def write_cloud(path, cloud: StructuredCloud) -> None:
    payload = np.ascontiguousarray(cloud.points, dtype="<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, FORMAT_VERSION, cloud.width, cloud.height))
        fh.write(payload)


def read_cloud(path) -> StructuredCloud:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER.size:
        raise TruncatedPayloadError(f"{path}: file shorter than the 13-byte header")
    magic, version, width, height = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    expected = height * width * 3 * 4
    payload = blob[HEADER.size:]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} for {width}x{height}"
        )
    if len(payload) > expected:
        raise DimensionMismatchError(
            f"{path}: payload is {len(payload)} bytes, {len(payload) - expected} beyond {width}x{height}"
        )
    points = np.frombuffer(payload, dtype="<f4").reshape(height, width, 3)
    cloud = StructuredCloud(points=points.copy())
    nan = np.isnan(cloud.points)
    if (nan.any(axis=2) & ~nan.all(axis=2)).any():
        raise DimensionMismatchError(f"{path}: pixel with partially-NaN coordinates")
    return cloud


# ---------------------------------------------------------------------------
# sample read/write
# ---------------------------------------------------------------------------


def _meta_dict(rec: SampleRecord) -> dict:
    return {
        "camera_to_world": [float(v) for v in rec.camera_to_world.matrix().reshape(-1)],
        "volume_box": {
            "center": [float(v) for v in rec.volume_box.center],
            "half_extents": [float(v) for v in rec.volume_box.half_extents],
            "rotation_wxyz": [float(v) for v in rec.volume_box.rotation_wxyz],
        },
        "box_params": rec.box_params.to_dict(),
        "sample_index": rec.sample_index,
        "master_seed": rec.master_seed,
    }


def write_sample(sample_dir, rec: SampleRecord) -> None:
    sample_dir = Path(sample_dir)
    sample_dir.mkdir(parents=True, exist_ok=True)
    write_cloud(sample_dir / "cloud.spcd", rec.cloud)
    with open(sample_dir / "meta.json", "w", encoding="utf-8") as fh:
        fh.write(json_dumps(_meta_dict(rec)) + "\n")


def read_meta(sample_dir) -> dict:
    path = Path(sample_dir) / "meta.json"
    try:
        with open(path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MetadataError(f"{path}: malformed JSON: {exc}") from exc
    for key in ("camera_to_world", "volume_box", "box_params", "sample_index", "master_seed"):
        if key not in meta:
            raise MetadataError(f"{path}: missing key {key!r}")
    if len(meta["camera_to_world"]) != 16:
        raise MetadataError(f"{path}: camera_to_world must hold 16 floats")
    return meta


def read_sample(sample_dir) -> SampleRecord:
    """Exact inverse of write_sample."""
    sample_dir = Path(sample_dir)
    cloud = read_cloud(sample_dir / "cloud.spcd")
    meta = read_meta(sample_dir)
    m = np.array(meta["camera_to_world"], dtype=np.float64).reshape(4, 4)
    pose = RigidPose(rotation=m[:3, :3], translation=m[:3, 3])
    vb = meta["volume_box"]
    volume_box = VolumeBox(
        center=vb["center"], half_extents=vb["half_extents"], rotation_wxyz=vb["rotation_wxyz"]
    )
    return SampleRecord(
        cloud=cloud,
        camera_to_world=pose,
        volume_box=volume_box,
        box_params=BoxParams.from_dict(meta["box_params"]),
        sample_index=int(meta["sample_index"]),
        master_seed=int(meta["master_seed"]),
    )


def sample_dir_name(index: int) -> str:
    return f"sample_{index:06d}"


# ---------------------------------------------------------------------------
# dataset generation
# ---------------------------------------------------------------------------


def _transformed(mesh: TriMesh, pose: RigidPose) -> TriMesh:
    return TriMesh(positions=pose.apply(mesh.positions), triangles=mesh.triangles, uv=mesh.uv)


def generate_sample(cfg: GenerationConfig, index: int) -> SampleRecord:
    """Build, pose, and scan one sample; pure function of (config, index).

    Per-sample draw order: box parameters, camera pose, optional box yaw,
    optional depth noise (one normal per valid pixel, row-major, after the
    projector-shadow pass)."""
    stream = derive_stream(cfg.master_seed, index)
    params = sample_box_params(stream, cfg)
    camera = sample_camera_pose(stream, cfg)
    if cfg.random_yaw:
        box_pose = RigidPose(yaw_matrix(stream.uniform(0.0, 2.0 * math.pi)), np.zeros(3))
    else:
        box_pose = RigidPose.identity()

    mesh = build_box(params)
    world_mesh = _transformed(mesh, box_pose) if cfg.random_yaw else mesh
    accel = build_accel(world_mesh)
    intr = Intrinsics(cfg.width, cfg.height, cfg.horizontal_fov)

    t, _, dirs_cam = cast_grid(accel, intr, camera)
    with np.errstate(invalid="ignore"):  # misses carry t = inf
        points = t[..., None] * dirs_cam
    points[~np.isfinite(t)] = np.nan
    cloud = StructuredCloud(points=points.astype(np.float32))

    if cfg.projector_offset is not None:
        origin = camera.apply(np.asarray(cfg.projector_offset, dtype=np.float64))
        cloud = projector_shadow_filter(cloud, world_mesh, origin, camera, accel=accel)

    if cfg.noise_sigma > 0.0:
        pts = cloud.points.astype(np.float64)
        valid = cloud.validity
        n_valid = int(valid.sum())
        if n_valid:
            jitter = stream.normals(n_valid, 0.0, cfg.noise_sigma)
            depth = np.linalg.norm(pts[valid], axis=1)
            pts[valid] *= ((depth + jitter) / depth)[:, None]
            cloud = StructuredCloud(points=pts.astype(np.float32))

    return SampleRecord(
        cloud=cloud,
        camera_to_world=camera,
        volume_box=ground_truth_volume_box(params, box_pose),
        box_params=params,
        sample_index=index,
        master_seed=cfg.master_seed,
    )


def _sample_complete(sample_dir: Path, cfg: GenerationConfig) -> bool:
    cloud_path = sample_dir / "cloud.spcd"
    meta_path = sample_dir / "meta.json"
    if not (cloud_path.is_file() and meta_path.is_file()):
        return False
    expected = HEADER.size + cfg.height * cfg.width * 12
    if cloud_path.stat().st_size != expected:
        return False
    try:
        read_meta(sample_dir)
    except FormatError:
        return False
    return True


def manifest_dict(cfg: GenerationConfig, count: int) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "tool_version": __version__,
        "rng_id": RNG_ID,
        "count": count,
        "config": cfg.to_dict(),
    }


def generate_dataset(
    cfg: GenerationConfig,
    out_dir,
    count: int,
    threads: int | None = None,
    resume: bool = False,
    progress=None,
) -> dict:
    """Generate `count` samples plus manifest.json under `out_dir`.

    Output bytes are a pure function of (config, count); worker count only
    affects wall time. With resume=True, complete sample directories are
    left untouched."""
    cfg.validate()
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    pending = []
    for i in range(count):
        sdir = out_dir / sample_dir_name(i)
        if resume and _sample_complete(sdir, cfg):
            continue
        pending.append(i)

    def run_one(i: int) -> int:
        rec = generate_sample(cfg, i)
        write_sample(out_dir / sample_dir_name(i), rec)
        return i

    workers = threads if threads is not None else (os.cpu_count() or 1)
    workers = max(1, min(workers, max(1, len(pending))))
    done = count - len(pending)
    if progress:
        progress(done, count)
    if workers == 1:
        for i in pending:
            run_one(i)
            done += 1
            if progress:
                progress(done, count)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_one, i) for i in pending]
            for fut in as_completed(futures):
                fut.result()
                done += 1
                if progress:
                    progress(done, count)

    manifest = manifest_dict(cfg, count)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        fh.write(json_dumps(manifest) + "\n")
    return manifest


def read_manifest(root) -> dict:
    path = Path(root) / "manifest.json"
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MetadataError(f"{path}: malformed JSON: {exc}") from exc
    for key in ("count", "config", "tool_version", "rng_id", "format_version"):
        if key not in manifest:
            raise MetadataError(f"{path}: missing key {key!r}")
    return manifest
