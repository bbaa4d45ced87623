"""Pose-error metrics and batch evaluation against dataset ground truth.

Translation error is the euclidean distance between predicted and true box
origins. Rotation error is the geodesic angle arccos((Tr(R' R^-1) - 1) / 2),
minimized over the symmetry candidates R' = R_hat * S: a rectangular box
looks identical after a half-turn about its vertical axis, so the default
symmetry set is {identity, yaw-pi}. The arccos argument is clamped to
[-1, 1] to absorb floating-point drift.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasetio import MetadataError, read_meta, sample_dir_name
from .rotations import orthonormality_error, project_to_rotation, quat_wxyz_to_rotation

__all__ = [
    "PosePrediction",
    "EvalSummary",
    "EvaluationError",
    "DEFAULT_SYMMETRY",
    "translation_error",
    "rotation_error",
    "evaluate",
    "load_predictions",
]


# exact +-1 entries so multiplying by the half-turn is lossless
YAW_PI = np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
DEFAULT_SYMMETRY = (np.eye(3), YAW_PI)


class EvaluationError(ValueError):
    """Predictions cannot be paired with ground truth."""


def _checked_rotation(r: np.ndarray, what: str) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3) or not np.isfinite(r).all():
        raise ValueError(f"{what}: rotation must be a finite 3x3 matrix")
    err = orthonormality_error(r)
    if err <= 1e-6:
        return r
    if err <= 1e-3:
        return project_to_rotation(r)
    raise ValueError(f"{what}: not a rotation (orthonormality defect {err:.3e})")


@dataclass(frozen=True)
class PosePrediction:
    sample_index: int
    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.isfinite(t).all():
            raise ValueError(f"prediction {self.sample_index}: non-finite translation")
        object.__setattr__(self, "translation", t)
        object.__setattr__(
            self, "rotation", _checked_rotation(self.rotation, f"prediction {self.sample_index}")
        )


@dataclass(frozen=True)
class EvalSummary:
    mean_te_mm: float
    mean_re_rad: float
    per_sample: tuple  # (index, te_mm, re_rad) triples

    def to_dict(self) -> dict:
        return {
            "mean_te_mm": self.mean_te_mm,
            "mean_re_rad": self.mean_re_rad,
            "samples": [
                {"sample_index": i, "te_mm": te, "re_rad": re} for i, te, re in self.per_sample
            ],
        }

    def format_table(self) -> str:
        lines = [
            f"{'sample':>8} {'te (mm)':>12} {'re (rad)':>12}",
            "-" * 34,
        ]
        for i, te, re in self.per_sample:
            lines.append(f"{i:>8} {te:>12.3f} {re:>12.3f}")
        lines.append("-" * 34)
        lines.append(f"{'mean':>8} {self.mean_te_mm:>12.3f} {self.mean_re_rad:>12.3f}")
        return "\n".join(lines)


def translation_error(t_hat, t) -> float:
    """||t - t_hat||_2 in meters."""
    t_hat = np.asarray(t_hat, dtype=np.float64).reshape(3)
    t = np.asarray(t, dtype=np.float64).reshape(3)
    if not (np.isfinite(t_hat).all() and np.isfinite(t).all()):
        raise ValueError("translation_error: non-finite input")
    return float(np.linalg.norm(t - t_hat))


def rotation_error(r_hat, r, symmetry=DEFAULT_SYMMETRY) -> float:
    """Geodesic angle between R_hat and R, minimized over R_hat * S for S in
    the symmetry set. Result in [0, pi]."""
    r_hat = _checked_rotation(r_hat, "r_hat")
    r = _checked_rotation(r, "r")
    if len(symmetry) == 0:
        raise ValueError("symmetry set must be non-empty")
    best = math.pi
    identity = np.eye(3)
    for s in symmetry:
        cand = r_hat if np.array_equal(s, identity) else r_hat @ np.asarray(s, dtype=np.float64)
        if np.array_equal(cand, r):
            return 0.0  # identical matrices: angle is exactly zero
        cos = (float(np.trace(cand @ r.T)) - 1.0) / 2.0
        angle = math.acos(min(1.0, max(-1.0, cos)))
        best = min(best, angle)
    return best


def load_predictions(path) -> list[PosePrediction]:
    """Parse a predictions file: JSON array of
    {sample_index, translation [3], rotation [9 row-major]}."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
    except json.JSONDecodeError as exc:
        raise EvaluationError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise EvaluationError(f"{path}: expected a JSON array of predictions")
    preds = []
    for entry in entries:
        try:
            preds.append(
                PosePrediction(
                    sample_index=int(entry["sample_index"]),
                    translation=np.asarray(entry["translation"], dtype=np.float64),
                    rotation=np.asarray(entry["rotation"], dtype=np.float64).reshape(3, 3),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise EvaluationError(f"{path}: bad prediction entry: {exc}") from exc
    return preds


def evaluate(predictions, gt_dir, symmetry=DEFAULT_SYMMETRY) -> EvalSummary:
    """Pair predictions with per-sample ground truth (box pose from the
    volume box) and report mean errors: translation in millimeters, rotation
    in radians. Summation runs in sample-index order."""
    gt_dir = Path(gt_dir)
    seen = set()
    for p in predictions:
        if p.sample_index in seen:
            raise EvaluationError(f"duplicate prediction for sample {p.sample_index}")
        seen.add(p.sample_index)
    if not predictions:
        raise EvaluationError("no predictions to evaluate")

    rows = []
    for p in sorted(predictions, key=lambda q: q.sample_index):
        sdir = gt_dir / sample_dir_name(p.sample_index)
        if not sdir.is_dir():
            raise EvaluationError(f"no ground-truth sample for index {p.sample_index}")
        try:
            meta = read_meta(sdir)
        except MetadataError as exc:
            raise EvaluationError(f"sample {p.sample_index}: unreadable ground truth: {exc}") from exc
        vb = meta["volume_box"]
        t_gt = np.asarray(vb["center"], dtype=np.float64)
        r_gt = quat_wxyz_to_rotation(vb["rotation_wxyz"])
        te = translation_error(p.translation, t_gt)
        re = rotation_error(p.rotation, r_gt, symmetry)
        rows.append((p.sample_index, te * 1000.0, re))

    mean_te = sum(r[1] for r in rows) / len(rows)
    mean_re = sum(r[2] for r in rows) / len(rows)
    return EvalSummary(mean_te_mm=mean_te, mean_re_rad=mean_re, per_sample=tuple(rows))
