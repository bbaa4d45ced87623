"""
Simulating a structured-light scan
==================================

Places a scanner on the positive octant looking at the origin, casts one
ray per pixel into a box mesh, and shows what the organized point cloud
looks like. Saves a depth image to demos/out/depth.png when matplotlib is
available; the numbers print either way.
"""

import math
from pathlib import Path

import numpy as np

from boxscan import BoxParams, Intrinsics, build_box, look_at, scan

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

box = build_box(
    BoxParams(
        size=(0.32, 0.26, 0.18),
        flap_length=0.10,
        open=(0.4, 1.3, 2.0, 1.6),
        thickness=0.004,
        bevel_radius=0.009,
    )
)

# scanner 1.2 m away, up and to the side, aimed at the world origin
eye = np.array([0.55, 0.40, 1.0])
pose = look_at(eye, np.zeros(3))
intr = Intrinsics(width=640, height=480, horizontal_fov=math.pi / 3)

cloud = scan(box, intr, pose)
valid = cloud.validity
print(f"scan: {intr.width} x {intr.height} px, {valid.mean() * 100:.1f}% pixels on the box")

depth = cloud.points[..., 2]  # camera-space z, NaN where the ray missed
print(f"depth range over the box: {np.nanmin(depth):.3f} .. {np.nanmax(depth):.3f} m")

# points are organized: neighboring pixels are neighboring surface points
j, i = np.argwhere(valid)[len(np.argwhere(valid)) // 2]
print(f"pixel ({i}, {j}) -> camera-space point {np.round(cloud.points[j, i], 4)} m")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    im = ax.imshow(depth, cmap="viridis")
    ax.set_title("simulated scan depth (m)")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.savefig(out / "depth.png", dpi=120, bbox_inches="tight")
    print(f"wrote {out / 'depth.png'}")
except ImportError:
    print("matplotlib not installed; skipping the depth image")
