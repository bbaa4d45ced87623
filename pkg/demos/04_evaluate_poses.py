"""
Scoring 6D pose predictions
===========================

Evaluates pose estimates against dataset ground truth with the two error
metrics: euclidean translation distance (reported in millimeters) and the
geodesic rotation angle minimized over the box's half-turn symmetry
(radians). Here the "predictions" are the ground truth plus a controlled
perturbation, so the expected scores are known.
"""

import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from boxscan import PosePrediction, default_config, evaluate, generate_dataset
from boxscan.datasetio import read_meta, sample_dir_name
from boxscan.metrics import YAW_PI
from boxscan.rotations import quat_wxyz_to_rotation

root = Path(__file__).parent / "out" / "eval_dataset"
cfg = replace(default_config(seed=7), width=96, height=72)
generate_dataset(cfg, root, count=8, threads=2)


def gt_poses():
    for i in range(8):
        vb = read_meta(root / sample_dir_name(i))["volume_box"]
        yield i, np.array(vb["center"]), quat_wxyz_to_rotation(vb["rotation_wxyz"])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


# 1. perfect predictions score exactly zero
perfect = [PosePrediction(i, t, r) for i, t, r in gt_poses()]
print("perfect:   ", evaluate(perfect, root).mean_te_mm, "mm,",
      evaluate(perfect, root).mean_re_rad, "rad")

# 2. 5 mm translation offset + 0.1 rad yaw error
off = [
    PosePrediction(i, t + [0.005, 0, 0], rot_z(0.1) @ r) for i, t, r in gt_poses()
]
summary = evaluate(off, root)
print(f"perturbed:  {summary.mean_te_mm:.3f} mm, {summary.mean_re_rad:.3f} rad")

# 3. a half-turn about the vertical axis is a symmetry of a rectangular box,
#    so the rotation metric forgives it
flipped = [PosePrediction(i, t, r @ YAW_PI) for i, t, r in gt_poses()]
print("yaw-pi flip:", evaluate(flipped, root).mean_te_mm, "mm,",
      evaluate(flipped, root).mean_re_rad, "rad")

print()
print(summary.format_table())
