import json
import math
from dataclasses import replace

import numpy as np
import pytest

from boxscan import (
    PosePrediction,
    default_config,
    evaluate,
    generate_dataset,
    load_predictions,
    rotation_error,
    translation_error,
)
from boxscan.datasetio import json_dumps, read_meta, sample_dir_name
from boxscan.metrics import DEFAULT_SYMMETRY, YAW_PI, EvaluationError
from boxscan.rotations import quat_wxyz_to_rotation, yaw_matrix


def axis_angle(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


def random_rotation(rng) -> np.ndarray:
    axis = rng.normal(size=3)
    return axis_angle(axis, rng.uniform(0, math.pi))


class TestTranslationError:
    def test_three_four_five(self):
        assert translation_error([0, 0, 0], [3, 4, 0]) == 5.0

    def test_identity(self):
        assert translation_error([1.5, -2, 0.25], [1.5, -2, 0.25]) == 0.0

    def test_small_offset(self):
        assert translation_error([1, 2, 3], [1, 2, 3.01]) == pytest.approx(0.01, abs=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            translation_error([np.nan, 0, 0], [0, 0, 0])

    def test_metric_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b, c = rng.normal(size=(3, 3))
            assert translation_error(a, b) == pytest.approx(translation_error(b, a), abs=0)
            assert translation_error(a, c) <= translation_error(a, b) + translation_error(b, c) + 1e-12


class TestRotationError:
    def test_identical_is_exactly_zero(self):
        rng = np.random.default_rng(1)
        r = random_rotation(rng)
        assert rotation_error(r, r) == 0.0

    def test_half_radian_about_z(self):
        r_hat = axis_angle([0, 0, 1], 0.5)
        assert rotation_error(r_hat, np.eye(3), symmetry=(np.eye(3),)) == pytest.approx(
            0.5, abs=1e-12
        )

    def test_yaw_pi_symmetry_absorbed_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            r = random_rotation(rng)
            assert rotation_error(r @ YAW_PI, r) == 0.0

    def test_every_symmetry_member_absorbed(self):
        rng = np.random.default_rng(3)
        r = random_rotation(rng)
        for s in DEFAULT_SYMMETRY:
            assert rotation_error(r @ s, r) == 0.0

    def test_axis_angle_recovery(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            angle = rng.uniform(0.0, math.pi)
            r_hat = axis_angle(rng.normal(size=3), angle)
            err = rotation_error(r_hat, np.eye(3), symmetry=(np.eye(3),))
            assert abs(err - angle) < 1e-9

    def test_left_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            r_hat, r, q = (random_rotation(rng) for _ in range(3))
            e1 = rotation_error(r_hat, r)
            e2 = rotation_error(q @ r_hat, q @ r)
            assert abs(e1 - e2) < 1e-9

    def test_range_and_no_nan(self):
        rng = np.random.default_rng(6)
        for _ in range(300):
            e = rotation_error(random_rotation(rng), random_rotation(rng))
            assert 0.0 <= e <= math.pi and not math.isnan(e)

    def test_near_rotation_repaired(self):
        r = axis_angle([0, 1, 0], 0.3) + 1e-5 * np.ones((3, 3))
        assert rotation_error(r, axis_angle([0, 1, 0], 0.3)) < 1e-4

    def test_far_from_rotation_rejected(self):
        with pytest.raises(ValueError):
            rotation_error(np.eye(3) * 2.0, np.eye(3))

    def test_empty_symmetry_rejected(self):
        with pytest.raises(ValueError):
            rotation_error(np.eye(3), np.eye(3), symmetry=())


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("gt")
    cfg = replace(default_config(31), width=16, height=12)
    generate_dataset(cfg, root, count=10, threads=1)
    return root


def self_predictions(root, count):
    preds = []
    for i in range(count):
        meta = read_meta(root / sample_dir_name(i))
        vb = meta["volume_box"]
        preds.append(
            PosePrediction(
                sample_index=i,
                translation=np.asarray(vb["center"], dtype=np.float64),
                rotation=quat_wxyz_to_rotation(vb["rotation_wxyz"]),
            )
        )
    return preds


class TestEvaluate:
    def test_self_predictions_are_exactly_zero(self, small_dataset):
        summary = evaluate(self_predictions(small_dataset, 10), small_dataset)
        assert summary.mean_te_mm == 0.0
        assert summary.mean_re_rad == 0.0
        assert len(summary.per_sample) == 10

    def test_ten_mm_offset(self, small_dataset):
        preds = [
            replace_translation(p, p.translation + np.array([0.01, 0.0, 0.0]))
            for p in self_predictions(small_dataset, 10)
        ]
        summary = evaluate(preds, small_dataset)
        assert summary.mean_te_mm == pytest.approx(10.0, abs=1e-9)

    def test_duplicate_index_rejected(self, small_dataset):
        preds = self_predictions(small_dataset, 3)
        preds.append(preds[0])
        with pytest.raises(EvaluationError):
            evaluate(preds, small_dataset)

    def test_unreadable_ground_truth_rejected(self, small_dataset, tmp_path):
        import shutil

        broken = tmp_path / "broken"
        shutil.copytree(small_dataset, broken)
        (broken / sample_dir_name(1) / "meta.json").write_text("{nope")
        with pytest.raises(EvaluationError):
            evaluate(self_predictions(small_dataset, 3), broken)

    def test_missing_sample_rejected(self, small_dataset):
        preds = self_predictions(small_dataset, 3)
        preds.append(
            PosePrediction(sample_index=99, translation=np.zeros(3), rotation=np.eye(3))
        )
        with pytest.raises(EvaluationError):
            evaluate(preds, small_dataset)

    def test_predictions_file_round_trip(self, small_dataset, tmp_path):
        preds = self_predictions(small_dataset, 10)
        path = tmp_path / "preds.json"
        path.write_text(
            json_dumps(
                [
                    {
                        "sample_index": p.sample_index,
                        "translation": [float(v) for v in p.translation],
                        "rotation": [float(v) for v in p.rotation.reshape(-1)],
                    }
                    for p in preds
                ]
            )
        )
        loaded = load_predictions(path)
        summary = evaluate(loaded, small_dataset)
        assert summary.mean_te_mm == 0.0
        assert summary.mean_re_rad == 0.0

    def test_rotated_by_yaw_pi_scores_zero(self, small_dataset):
        preds = [
            PosePrediction(p.sample_index, p.translation, p.rotation @ YAW_PI)
            for p in self_predictions(small_dataset, 5)
        ]
        summary = evaluate(preds, small_dataset)
        assert summary.mean_re_rad == 0.0

    def test_summary_serialization(self, small_dataset):
        summary = evaluate(self_predictions(small_dataset, 4), small_dataset)
        d = summary.to_dict()
        assert json.loads(json_dumps(d)) == d
        table = summary.format_table()
        assert "mean" in table


def replace_translation(p: PosePrediction, t) -> PosePrediction:
    return PosePrediction(sample_index=p.sample_index, translation=t, rotation=p.rotation)
