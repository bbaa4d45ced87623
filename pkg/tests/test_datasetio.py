import json
import math
import struct
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from boxscan import (
    BoxParams,
    StructuredCloud,
    default_config,
    generate_dataset,
    generate_sample,
    ground_truth_volume_box,
    read_sample,
    write_sample,
)
from boxscan.datasetio import (
    BadMagicError,
    DimensionMismatchError,
    MetadataError,
    SampleRecord,
    TruncatedPayloadError,
    VersionMismatchError,
    json_dumps,
    read_cloud,
    read_manifest,
    sample_dir_name,
    write_cloud,
)
from boxscan.rotations import quat_wxyz_to_rotation, yaw_matrix
from boxscan.sampling import RigidPose

from conftest import dataset_tree_bytes

TINY = replace(default_config(7), width=32, height=24)


def tiny_record(index: int = 0) -> SampleRecord:
    return generate_sample(TINY, index)


class TestVolumeBox:
    def test_identity_pose(self):
        vb = ground_truth_volume_box(BoxParams(size=(0.3, 0.3, 0.2)), RigidPose.identity())
        np.testing.assert_array_equal(vb.center, [0.0, 0.0, 0.1])
        np.testing.assert_array_equal(vb.half_extents, [0.15, 0.15, 0.1])
        np.testing.assert_array_equal(vb.rotation_wxyz, [1.0, 0.0, 0.0, 0.0])

    def test_yawed_pose(self):
        pose = RigidPose(yaw_matrix(math.pi / 2), np.zeros(3))
        vb = ground_truth_volume_box(BoxParams(size=(0.3, 0.3, 0.2)), pose)
        np.testing.assert_array_equal(vb.half_extents, [0.15, 0.15, 0.1])
        np.testing.assert_allclose(quat_wxyz_to_rotation(vb.rotation_wxyz), pose.rotation, atol=1e-15)

    def test_flaps_do_not_affect_volume_box(self):
        a = ground_truth_volume_box(BoxParams(size=(0.3, 0.3, 0.2)), RigidPose.identity())
        b = ground_truth_volume_box(
            BoxParams(size=(0.3, 0.3, 0.2), flap_length=0.2), RigidPose.identity()
        )
        np.testing.assert_array_equal(a.center, b.center)
        np.testing.assert_array_equal(a.half_extents, b.half_extents)


class TestCloudFormat:
    def test_golden_2x2_all_invalid(self, tmp_path):
        # 13-byte header + 2*2*3 float32 NaNs, built by hand
        cloud = StructuredCloud(points=np.full((2, 2, 3), np.nan, dtype=np.float32))
        path = tmp_path / "cloud.spcd"
        write_cloud(path, cloud)
        blob = path.read_bytes()
        golden = b"SPCD" + bytes([1]) + struct.pack("<II", 2, 2) + b"\x00\x00\xc0\x7f" * 12
        assert len(golden) == 13 + 48
        assert blob == golden

    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(5, 7, 3)).astype(np.float32)
        pts[..., 2] = np.abs(pts[..., 2]) + 0.5
        pts[1, 2] = np.nan
        cloud = StructuredCloud(points=pts)
        write_cloud(tmp_path / "c.spcd", cloud)
        back = read_cloud(tmp_path / "c.spcd")
        assert back.points.tobytes() == cloud.points.tobytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "c.spcd"
        write_cloud(path, StructuredCloud(points=np.full((2, 2, 3), np.nan, dtype=np.float32)))
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(BadMagicError):
            read_cloud(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "c.spcd"
        write_cloud(path, StructuredCloud(points=np.full((2, 2, 3), np.nan, dtype=np.float32)))
        blob = bytearray(path.read_bytes())
        blob[4] = 9
        path.write_bytes(bytes(blob))
        with pytest.raises(VersionMismatchError):
            read_cloud(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "c.spcd"
        write_cloud(path, StructuredCloud(points=np.full((2, 2, 3), np.nan, dtype=np.float32)))
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(TruncatedPayloadError):
            read_cloud(path)

    def test_oversized_payload(self, tmp_path):
        path = tmp_path / "c.spcd"
        write_cloud(path, StructuredCloud(points=np.full((2, 2, 3), np.nan, dtype=np.float32)))
        path.write_bytes(path.read_bytes() + b"\x00" * 4)
        with pytest.raises(DimensionMismatchError):
            read_cloud(path)

    def test_partial_nan_pixel_rejected(self, tmp_path):
        pts = np.zeros((1, 1, 3), dtype=np.float32)
        pts[0, 0] = [1.0, 2.0, 3.0]
        path = tmp_path / "c.spcd"
        write_cloud(path, StructuredCloud(points=pts))
        blob = bytearray(path.read_bytes())
        blob[13:17] = b"\x00\x00\xc0\x7f"  # first float -> NaN
        path.write_bytes(bytes(blob))
        with pytest.raises(DimensionMismatchError):
            read_cloud(path)


class TestSampleRoundTrip:
    def test_field_for_field(self, tmp_path):
        rec = tiny_record(0)
        write_sample(tmp_path / "s", rec)
        back = read_sample(tmp_path / "s")
        assert back.cloud.points.tobytes() == rec.cloud.points.tobytes()
        np.testing.assert_array_equal(back.camera_to_world.rotation, rec.camera_to_world.rotation)
        np.testing.assert_array_equal(
            back.camera_to_world.translation, rec.camera_to_world.translation
        )
        np.testing.assert_array_equal(back.volume_box.center, rec.volume_box.center)
        np.testing.assert_array_equal(back.volume_box.half_extents, rec.volume_box.half_extents)
        np.testing.assert_array_equal(back.volume_box.rotation_wxyz, rec.volume_box.rotation_wxyz)
        assert back.box_params == rec.box_params
        assert back.sample_index == rec.sample_index
        assert back.master_seed == rec.master_seed

    def test_write_twice_identical_bytes(self, tmp_path):
        rec = tiny_record(1)
        write_sample(tmp_path / "a", rec)
        write_sample(tmp_path / "b", rec)
        assert (tmp_path / "a/cloud.spcd").read_bytes() == (tmp_path / "b/cloud.spcd").read_bytes()
        assert (tmp_path / "a/meta.json").read_bytes() == (tmp_path / "b/meta.json").read_bytes()

    def test_malformed_meta(self, tmp_path):
        rec = tiny_record(0)
        write_sample(tmp_path / "s", rec)
        (tmp_path / "s/meta.json").write_text("{broken")
        with pytest.raises(MetadataError):
            read_sample(tmp_path / "s")

    def test_json_17_digit_round_trip(self):
        values = [0.1, 1.0 / 3.0, 1e-300, math.pi, 0.30000000000000004]
        blob = json_dumps({"v": values})
        assert json.loads(blob)["v"] == values


class TestGenerateDataset:
    def test_layout_and_manifest(self, tmp_path):
        manifest = generate_dataset(TINY, tmp_path, count=2)
        assert (tmp_path / "sample_000000/cloud.spcd").is_file()
        assert (tmp_path / "sample_000001/meta.json").is_file()
        assert manifest["count"] == 2
        on_disk = read_manifest(tmp_path)
        assert on_disk["count"] == 2
        assert on_disk["rng_id"] == manifest["rng_id"]
        assert on_disk["config"] == TINY.to_dict()

    def test_thread_count_invariance(self, tmp_path):
        generate_dataset(TINY, tmp_path / "serial", count=6, threads=1)
        generate_dataset(TINY, tmp_path / "parallel", count=6, threads=4)
        assert dataset_tree_bytes(tmp_path / "serial") == dataset_tree_bytes(tmp_path / "parallel")

    def test_resume_is_idempotent(self, tmp_path):
        generate_dataset(TINY, tmp_path / "d", count=3, threads=1)
        before = dataset_tree_bytes(tmp_path / "d")
        generate_dataset(TINY, tmp_path / "d", count=3, threads=1, resume=True)
        assert dataset_tree_bytes(tmp_path / "d") == before

    def test_resume_fills_missing_samples(self, tmp_path):
        generate_dataset(TINY, tmp_path / "d", count=3, threads=1)
        before = dataset_tree_bytes(tmp_path / "d")
        # delete one sample and corrupt another
        import shutil

        shutil.rmtree(tmp_path / "d" / sample_dir_name(1))
        cloud_path = tmp_path / "d" / sample_dir_name(2) / "cloud.spcd"
        cloud_path.write_bytes(cloud_path.read_bytes()[:-8])
        generate_dataset(TINY, tmp_path / "d", count=3, threads=1, resume=True)
        assert dataset_tree_bytes(tmp_path / "d") == before

    def test_count_must_be_positive(self, tmp_path):
        with pytest.raises(ValueError):
            generate_dataset(TINY, tmp_path, count=0)

    def test_ground_truth_consistency(self, tmp_path):
        # all valid world-frame points inside the volume box dilated by
        # flap reach + bevel + 1 mm
        generate_dataset(TINY, tmp_path, count=4, threads=1)
        for i in range(4):
            rec = read_sample(tmp_path / sample_dir_name(i))
            valid = rec.cloud.validity
            if not valid.any():
                continue
            pts_world = rec.camera_to_world.apply(rec.cloud.points[valid].astype(np.float64))
            r_box = quat_wxyz_to_rotation(rec.volume_box.rotation_wxyz)
            local = (pts_world - rec.volume_box.center) @ r_box
            dilation = rec.box_params.flap_length + rec.box_params.bevel_radius + 1e-3
            limit = rec.volume_box.half_extents + dilation
            assert (np.abs(local) <= limit[None, :]).all()


class TestOptionalPasses:
    def test_noise_perturbs_depth_deterministically(self):
        noisy_cfg = replace(TINY, noise_sigma=0.002)
        a = generate_sample(noisy_cfg, 0)
        b = generate_sample(noisy_cfg, 0)
        assert a.cloud.points.tobytes() == b.cloud.points.tobytes()
        clean = generate_sample(TINY, 0)
        assert a.cloud.points.tobytes() != clean.cloud.points.tobytes()
        np.testing.assert_array_equal(a.cloud.validity, clean.cloud.validity)

    def test_random_yaw_rotates_volume_box(self):
        yaw_cfg = replace(TINY, random_yaw=True)
        rec = generate_sample(yaw_cfg, 0)
        assert abs(rec.volume_box.rotation_wxyz[3]) > 1e-6  # z component of quat
        rec.cloud.validate()

    def test_projector_offset_only_removes_points(self):
        proj_cfg = replace(TINY, projector_offset=(0.3, 0.0, 0.0))
        with_proj = generate_sample(proj_cfg, 0)
        without = generate_sample(TINY, 0)
        lost = without.cloud.validity & ~with_proj.cloud.validity
        gained = with_proj.cloud.validity & ~without.cloud.validity
        assert not gained.any()
        kept = with_proj.cloud.validity
        np.testing.assert_array_equal(
            with_proj.cloud.points[kept], without.cloud.points[kept]
        )
