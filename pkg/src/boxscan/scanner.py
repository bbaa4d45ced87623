"""Structured-light scan simulation: one ray per pixel through a pinhole.

Camera convention: X right, Y down, Z forward; principal point at the image
center; pixel centers at (i + 0.5, j + 0.5); row 0 is the top image row.
Points are recorded on the pixel grid in camera coordinates; pixels whose
rays miss the scene hold a NaN triple.

The ray/triangle test follows the watertight scheme (ray-aligned coordinate
permutation + edge functions with boundary-inclusive sign logic), so rays
grazing an edge shared by two triangles always report a hit. Nearest hits
are found through an axis-aligned BVH; a brute-force linear scan over all
triangles is provided as the independent search oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .mesh import TriMesh
from .sampling import RigidPose

__all__ = [
    "Intrinsics",
    "StructuredCloud",
    "RayHit",
    "Accel",
    "generate_rays",
    "build_accel",
    "intersect",
    "scan",
    "cast_grid",
    "project_to_pixels",
    "projector_shadow_filter",
]

_LEAF_SIZE = 4
_STACK_DEPTH = 128


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera: resolution plus horizontal field of view; the vertical
    FOV follows from square pixels."""

    width: int
    height: int
    horizontal_fov: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"resolution must be >= 1x1, got {self.width}x{self.height}")
        if not (0.0 < self.horizontal_fov < math.pi):
            raise ValueError(f"horizontal_fov must be in (0, pi), got {self.horizontal_fov}")

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(self.horizontal_fov / 2.0)


@dataclass(eq=False)
class StructuredCloud:
    """Organized W x H grid of camera-space points; invalid pixel = NaN triple."""

    points: np.ndarray  # (height, width, 3) float32

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float32)
        if self.points.ndim != 3 or self.points.shape[2] != 3:
            raise ValueError("points must have shape (height, width, 3)")

    @property
    def width(self) -> int:
        return self.points.shape[1]

    @property
    def height(self) -> int:
        return self.points.shape[0]

    @property
    def validity(self) -> np.ndarray:
        return ~np.isnan(self.points).any(axis=2)

    def validate(self) -> None:
        nan = np.isnan(self.points)
        mixed = nan.any(axis=2) & ~nan.all(axis=2)
        if mixed.any():
            raise ValueError("pixel with partially-NaN coordinates")
        valid = ~nan.all(axis=2)
        if (self.points[valid][:, 2] <= 0.0).any():
            raise ValueError("valid point with non-positive camera-space depth")


@dataclass(frozen=True)
class RayHit:
    t: float
    triangle_index: int
    barycentrics: tuple[float, float]  # weights of vertices 1 and 2


@dataclass(eq=False)
class Accel:
    """Immutable BVH over a triangle mesh; share freely across threads."""

    tri_verts: np.ndarray   # (m, 3, 3) float64
    bounds_lo: np.ndarray   # (nodes, 3)
    bounds_hi: np.ndarray   # (nodes, 3)
    left: np.ndarray        # (nodes,) int32, child id or -1
    right: np.ndarray
    first: np.ndarray       # (nodes,) int32, leaf range start into tri_order
    count: np.ndarray       # (nodes,) int32, 0 for inner nodes
    tri_order: np.ndarray   # (m,) int32 permutation into original triangles


def build_accel(mesh: TriMesh) -> Accel:
    """Median-split BVH on the longest centroid axis; deterministic."""
    mesh.validate()
    if mesh.n_triangles == 0:
        raise ValueError("cannot build an acceleration structure over an empty mesh")
    tv = np.ascontiguousarray(mesh.positions[mesh.triangles], dtype=np.float64)
    tri_lo = tv.min(axis=1)
    tri_hi = tv.max(axis=1)
    centroids = tv.mean(axis=1)

    bounds_lo, bounds_hi, left, right, first, count = [], [], [], [], [], []
    order: list[int] = []

    def emit(indices: np.ndarray) -> int:
        node = len(bounds_lo)
        bounds_lo.append(tri_lo[indices].min(axis=0))
        bounds_hi.append(tri_hi[indices].max(axis=0))
        left.append(-1)
        right.append(-1)
        first.append(0)
        count.append(0)
        if len(indices) <= _LEAF_SIZE:
            first[node] = len(order)
            count[node] = len(indices)
            order.extend(int(i) for i in indices)
            return node
        c = centroids[indices]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        sorted_idx = indices[np.argsort(c[:, axis], kind="stable")]
        half = len(sorted_idx) // 2
        left[node] = emit(sorted_idx[:half])
        right[node] = emit(sorted_idx[half:])
        return node

    import sys

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 10000))
    try:
        emit(np.arange(mesh.n_triangles, dtype=np.int64))
    finally:
        sys.setrecursionlimit(old_limit)

    return Accel(
        tri_verts=tv,
        bounds_lo=np.array(bounds_lo, dtype=np.float64).reshape(-1, 3),
        bounds_hi=np.array(bounds_hi, dtype=np.float64).reshape(-1, 3),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        first=np.array(first, dtype=np.int32),
        count=np.array(count, dtype=np.int32),
        tri_order=np.array(order, dtype=np.int32),
    )


@njit(cache=True, nogil=True, error_model="numpy", inline="always")
def _hit_triangle(origin, kx, ky, kz, sx, sy, sz, v0, v1, v2):
    """Watertight ray/triangle test in ray-aligned coordinates.

    Returns (t, b1, b2) with t = -1.0 on miss; boundary points (edge/vertex)
    count as hits so shared edges cannot leak rays.
    """
    akz = v0[kz] - origin[kz]
    bkz = v1[kz] - origin[kz]
    ckz = v2[kz] - origin[kz]
    ax = v0[kx] - origin[kx] - sx * akz
    ay = v0[ky] - origin[ky] - sy * akz
    bx = v1[kx] - origin[kx] - sx * bkz
    by = v1[ky] - origin[ky] - sy * bkz
    cx = v2[kx] - origin[kx] - sx * ckz
    cy = v2[ky] - origin[ky] - sy * ckz

    u = cx * by - cy * bx
    v = ax * cy - ay * cx
    w = bx * ay - by * ax
    if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
        return -1.0, 0.0, 0.0
    det = u + v + w
    if det == 0.0:
        return -1.0, 0.0, 0.0
    t = (u * (sz * akz) + v * (sz * bkz) + w * (sz * ckz)) / det
    if t <= 0.0:
        return -1.0, 0.0, 0.0
    return t, v / det, w / det


@njit(cache=True, nogil=True, error_model="numpy", inline="always")
def _ray_axes(dx, dy, dz):
    adx, ady, adz = abs(dx), abs(dy), abs(dz)
    if adz >= adx and adz >= ady:
        kz = 2
    elif ady >= adx:
        kz = 1
    else:
        kz = 0
    kx = (kz + 1) % 3
    ky = (kz + 2) % 3
    d = (dx, dy, dz)
    if d[kz] < 0.0:
        kx, ky = ky, kx
    sz = 1.0 / d[kz]
    sx = d[kx] * sz
    sy = d[ky] * sz
    return kx, ky, kz, sx, sy, sz


@njit(cache=True, nogil=True, error_model="numpy")
def _cast_rays_bvh(
    origin, dirs, bounds_lo, bounds_hi, left, right, first, count, tri_order, tv,
    t_out, tri_out, b1_out, b2_out,
):
    n = dirs.shape[0]
    stack = np.empty(_STACK_DEPTH, dtype=np.int32)
    for ri in range(n):
        dx, dy, dz = dirs[ri, 0], dirs[ri, 1], dirs[ri, 2]
        kx, ky, kz, sx, sy, sz = _ray_axes(dx, dy, dz)
        best_t = np.inf
        best_j = -1
        best_b1 = 0.0
        best_b2 = 0.0
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            # slab test, exact handling of zero direction components
            tmin = 0.0
            tmax = best_t
            hit = True
            for axis in range(3):
                o = origin[axis]
                d = dirs[ri, axis]
                lo = bounds_lo[node, axis]
                hi = bounds_hi[node, axis]
                if d == 0.0:
                    if o < lo or o > hi:
                        hit = False
                        break
                else:
                    inv = 1.0 / d
                    t0 = (lo - o) * inv
                    t1 = (hi - o) * inv
                    if t0 > t1:
                        t0, t1 = t1, t0
                    if t0 > tmin:
                        tmin = t0
                    if t1 < tmax:
                        tmax = t1
                    if tmin > tmax:
                        hit = False
                        break
            if not hit:
                continue
            if count[node] > 0:
                for k in range(first[node], first[node] + count[node]):
                    j = tri_order[k]
                    t, b1, b2 = _hit_triangle(
                        origin, kx, ky, kz, sx, sy, sz, tv[j, 0], tv[j, 1], tv[j, 2]
                    )
                    if t > 0.0 and (t < best_t or (t == best_t and j < best_j)):
                        best_t = t
                        best_j = j
                        best_b1 = b1
                        best_b2 = b2
            else:
                stack[sp] = right[node]
                sp += 1
                stack[sp] = left[node]
                sp += 1
        if best_j >= 0:
            t_out[ri] = best_t
            tri_out[ri] = best_j
            b1_out[ri] = best_b1
            b2_out[ri] = best_b2
        else:
            t_out[ri] = np.inf
            tri_out[ri] = -1
            b1_out[ri] = 0.0
            b2_out[ri] = 0.0


@njit(cache=True, nogil=True, error_model="numpy")
def _cast_rays_brute(origin, dirs, tv, t_out, tri_out, b1_out, b2_out):
    n = dirs.shape[0]
    m = tv.shape[0]
    for ri in range(n):
        dx, dy, dz = dirs[ri, 0], dirs[ri, 1], dirs[ri, 2]
        kx, ky, kz, sx, sy, sz = _ray_axes(dx, dy, dz)
        best_t = np.inf
        best_j = -1
        best_b1 = 0.0
        best_b2 = 0.0
        for j in range(m):
            t, b1, b2 = _hit_triangle(
                origin, kx, ky, kz, sx, sy, sz, tv[j, 0], tv[j, 1], tv[j, 2]
            )
            if t > 0.0 and (t < best_t or (t == best_t and j < best_j)):
                best_t = t
                best_j = j
                best_b1 = b1
                best_b2 = b2
        if best_j >= 0:
            t_out[ri] = best_t
            tri_out[ri] = best_j
            b1_out[ri] = best_b1
            b2_out[ri] = best_b2
        else:
            t_out[ri] = np.inf
            tri_out[ri] = -1
            b1_out[ri] = 0.0
            b2_out[ri] = 0.0


def _camera_dirs(intr: Intrinsics) -> np.ndarray:
    """Unit ray directions through pixel centers, camera frame, (H, W, 3)."""
    f = intr.focal_px
    xs = (np.arange(intr.width, dtype=np.float64) + 0.5 - intr.width / 2.0) / f
    ys = (np.arange(intr.height, dtype=np.float64) + 0.5 - intr.height / 2.0) / f
    gx, gy = np.meshgrid(xs, ys)
    dirs = np.stack([gx, gy, np.ones_like(gx)], axis=-1)
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def generate_rays(intr: Intrinsics, pose: RigidPose) -> tuple[np.ndarray, np.ndarray]:
    """(origin, directions): origin is the camera position; directions are
    unit world-space vectors through each pixel center, shape (H, W, 3)."""
    dirs_cam = _camera_dirs(intr)
    dirs_world = dirs_cam @ pose.rotation.T
    return pose.translation.copy(), np.ascontiguousarray(dirs_world)


def _cast_flat(origin: np.ndarray, dirs: np.ndarray, accel: Accel, brute: bool):
    n = dirs.shape[0]
    t = np.empty(n, dtype=np.float64)
    tri = np.empty(n, dtype=np.int32)
    b1 = np.empty(n, dtype=np.float64)
    b2 = np.empty(n, dtype=np.float64)
    origin = np.ascontiguousarray(origin, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    if brute:
        _cast_rays_brute(origin, dirs, accel.tri_verts, t, tri, b1, b2)
    else:
        _cast_rays_bvh(
            origin, dirs,
            accel.bounds_lo, accel.bounds_hi, accel.left, accel.right,
            accel.first, accel.count, accel.tri_order, accel.tri_verts,
            t, tri, b1, b2,
        )
    return t, tri, b1, b2


def intersect(origin, direction, accel: Accel) -> RayHit | None:
    """Nearest positive-t hit of one ray, or None. Ties on t take the lower
    triangle index."""
    direction = np.asarray(direction, dtype=np.float64).reshape(1, 3)
    t, tri, b1, b2 = _cast_flat(np.asarray(origin, dtype=np.float64), direction, accel, brute=False)
    if tri[0] < 0:
        return None
    return RayHit(t=float(t[0]), triangle_index=int(tri[0]), barycentrics=(float(b1[0]), float(b2[0])))


def cast_grid(accel: Accel, intr: Intrinsics, pose: RigidPose, brute: bool = False):
    """Cast the full pixel grid. Returns (t, tri, dirs_cam): t is +inf on
    misses, tri is -1; dirs_cam are the unit camera-frame directions."""
    dirs_cam = _camera_dirs(intr)
    dirs_world = dirs_cam @ pose.rotation.T
    t, tri, _, _ = _cast_flat(pose.translation, dirs_world.reshape(-1, 3), accel, brute)
    shape = (intr.height, intr.width)
    return t.reshape(shape), tri.reshape(shape), dirs_cam


def scan(mesh: TriMesh, intr: Intrinsics, pose: RigidPose, accel: Accel | None = None) -> StructuredCloud:
    """Scan a world-space mesh into an organized camera-space point cloud."""
    if accel is None:
        accel = build_accel(mesh)
    t, _, dirs_cam = cast_grid(accel, intr, pose)
    with np.errstate(invalid="ignore"):  # misses carry t = inf
        points = t[..., None] * dirs_cam  # camera frame: p = t * unit direction
    points[~np.isfinite(t)] = np.nan
    return StructuredCloud(points=points.astype(np.float32))


def project_to_pixels(intr: Intrinsics, points_cam: np.ndarray) -> np.ndarray:
    """Pinhole projection of camera-space points to (u, v) pixel coordinates."""
    p = np.asarray(points_cam, dtype=np.float64)
    f = intr.focal_px
    u = f * p[..., 0] / p[..., 2] + intr.width / 2.0
    v = f * p[..., 1] / p[..., 2] + intr.height / 2.0
    return np.stack([u, v], axis=-1)


def projector_shadow_filter(
    cloud: StructuredCloud,
    mesh: TriMesh,
    projector_origin,
    camera_pose: RigidPose,
    accel: Accel | None = None,
) -> StructuredCloud:
    """Invalidate points the projector cannot illuminate.

    A valid point is dropped iff the segment from `projector_origin` (world
    frame) to the point, shortened by 1e-6 m at the point end, intersects
    the mesh. A projector at the camera origin changes nothing.
    """
    if accel is None:
        accel = build_accel(mesh)
    proj = np.asarray(projector_origin, dtype=np.float64)
    valid = cloud.validity
    if not valid.any():
        return StructuredCloud(points=cloud.points.copy())
    pts_cam = cloud.points[valid].astype(np.float64)
    pts_world = camera_pose.apply(pts_cam)
    seg = pts_world - proj
    dist = np.linalg.norm(seg, axis=1)
    dirs = seg / dist[:, None]
    t, tri, _, _ = _cast_flat(proj, dirs, accel, brute=False)
    occluded = (tri >= 0) & (t < dist - 1e-6)
    points = cloud.points.copy()
    vj, vi = np.nonzero(valid)
    points[vj[occluded], vi[occluded]] = np.nan
    return StructuredCloud(points=points)
