"""Indexed triangle meshes: validation, measures, triangulation, OBJ export.

Conventions used across the package:
  * positions are float64, meters, shape (n_vertices, 3)
  * triangles are int32 vertex index triples, CCW when viewed from outside
  * uv is float64 per-corner, shape (n_triangles, 3, 2), meters in the
    unfolded-sheet plane
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_TRIANGLE_AREA = 1e-12  # m^2, anything smaller counts as degenerate


class MeshError(ValueError):
    """Raised when mesh data violates a structural invariant."""


@dataclass(eq=False)
class TriMesh:
    """Indexed triangle mesh with optional per-corner UVs."""

    positions: np.ndarray
    triangles: np.ndarray
    uv: np.ndarray | None = None
    normals: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int32)
        if self.uv is not None:
            self.uv = np.ascontiguousarray(self.uv, dtype=np.float64)

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def validate(self) -> None:
        """Check structural invariants; raise MeshError on the first violation."""
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise MeshError("positions must have shape (n, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must have shape (m, 3)")
        if not np.isfinite(self.positions).all():
            raise MeshError("non-finite vertex coordinate")
        if self.n_triangles:
            lo, hi = self.triangles.min(), self.triangles.max()
            if lo < 0 or hi >= self.n_vertices:
                raise MeshError(f"triangle index {hi if hi >= self.n_vertices else lo} out of range")
            areas = triangle_areas(self)
            if (areas < MIN_TRIANGLE_AREA).any():
                bad = int(np.argmin(areas))
                raise MeshError(f"degenerate triangle {bad} (area {areas[bad]:.3e} m^2)")
        if self.uv is not None and self.uv.shape != (self.n_triangles, 3, 2):
            raise MeshError("uv must have shape (n_triangles, 3, 2)")


def corners(mesh: TriMesh) -> np.ndarray:
    """Per-corner positions, shape (m, 3, 3)."""
    return mesh.positions[mesh.triangles]


def triangle_areas(mesh: TriMesh) -> np.ndarray:
    c = corners(mesh)
    cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    return 0.5 * np.linalg.norm(cross, axis=1)


def triangle_normals(mesh: TriMesh) -> np.ndarray:
    """Unit per-triangle normals (CCW-outward winding)."""
    c = corners(mesh)
    cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    norm = np.linalg.norm(cross, axis=1, keepdims=True)
    return cross / norm


def uv_areas(mesh: TriMesh) -> np.ndarray:
    if mesh.uv is None:
        raise MeshError("mesh has no uv data")
    a, b, c = mesh.uv[:, 0], mesh.uv[:, 1], mesh.uv[:, 2]
    return 0.5 * np.abs(
        (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
    )


def aabb(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """(min, max) corners over referenced vertices."""
    used = np.unique(mesh.triangles)
    pts = mesh.positions[used]
    return pts.min(axis=0), pts.max(axis=0)


def aabb_extents(mesh: TriMesh) -> np.ndarray:
    lo, hi = aabb(mesh)
    return hi - lo


def signed_volume(mesh: TriMesh) -> float:
    """Divergence-theorem volume; positive for closed CCW-outward surfaces."""
    c = corners(mesh)
    return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)


def directed_edges(mesh: TriMesh) -> np.ndarray:
    """All directed edges (v0, v1) in winding order, shape (3m, 2)."""
    t = mesh.triangles
    return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=0)


def edge_use_counts(mesh: TriMesh) -> dict[tuple[int, int], int]:
    counts: dict[tuple[int, int], int] = {}
    for a, b in directed_edges(mesh):
        key = (int(a), int(b)) if a < b else (int(b), int(a))
        counts[key] = counts.get(key, 0) + 1
    return counts


def boundary_edges(mesh: TriMesh) -> list[tuple[int, int]]:
    """Directed edges used by exactly one triangle, in deterministic order."""
    seen: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for a, b in directed_edges(mesh):
        key = (int(a), int(b)) if a < b else (int(b), int(a))
        seen.setdefault(key, []).append((int(a), int(b)))
    return [uses[0] for key, uses in sorted(seen.items()) if len(uses) == 1]


def euler_characteristic(mesh: TriMesh) -> int:
    v = len(np.unique(mesh.triangles))
    e = len(edge_use_counts(mesh))
    f = mesh.n_triangles
    return v - e + f


def is_closed_manifold(mesh: TriMesh) -> bool:
    """True iff every undirected edge is used exactly twice, once per direction."""
    seen: dict[tuple[int, int], list[bool]] = {}
    for a, b in directed_edges(mesh):
        key = (int(a), int(b)) if a < b else (int(b), int(a))
        seen.setdefault(key, []).append(a < b)
    for uses in seen.values():
        if len(uses) != 2 or uses[0] == uses[1]:
            return False
    return True


# ---------------------------------------------------------------------------
# Polygon-face meshes (construction substrate; triangulated on output)
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class FaceMesh:
    """Polygonal mesh with shared vertices and per-corner UVs.

    Faces are flat convex polygons wound CCW from outside. Used internally
    by the box construction ops; convert to TriMesh via triangulate().
    """

    positions: list[np.ndarray] = field(default_factory=list)
    faces: list[list[int]] = field(default_factory=list)
    uvs: list[list[tuple[float, float]]] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)

    def add_vertex(self, p) -> int:
        self.positions.append(np.asarray(p, dtype=np.float64))
        return len(self.positions) - 1

    def add_face(self, idx: list[int], uv: list[tuple[float, float]], tag: str) -> None:
        self.faces.append(list(idx))
        self.uvs.append(list(uv))
        self.tags.append(tag)

    def face_normal(self, fi: int) -> np.ndarray:
        loop = self.faces[fi]
        p = [self.positions[i] for i in loop]
        n = np.zeros(3)
        for k in range(1, len(loop) - 1):
            n += np.cross(p[k] - p[0], p[k + 1] - p[0])
        length = np.linalg.norm(n)
        if length == 0.0:
            raise MeshError(f"face {fi} is degenerate")
        return n / length


def _quad_diagonal(quad: list[int]) -> int:
    """Index (0 or 1) of the splitting diagonal: the one with the lower
    sorted vertex-index pair. 0 means (quad[0], quad[2])."""
    d0 = tuple(sorted((quad[0], quad[2])))
    d1 = tuple(sorted((quad[1], quad[3])))
    return 0 if d0 < d1 else 1


def triangulate(fm: FaceMesh) -> TriMesh:
    """Deterministic triangulation: quads split along the diagonal with the
    lower vertex-index pair; larger polygons fanned from their lowest index."""
    tris: list[tuple[int, int, int]] = []
    uvs: list[list[tuple[float, float]]] = []

    for loop, uv in zip(fm.faces, fm.uvs):
        n = len(loop)
        if n == 3:
            order = [(0, 1, 2)]
        elif n == 4:
            if _quad_diagonal(loop) == 0:
                order = [(0, 1, 2), (0, 2, 3)]
            else:
                order = [(1, 2, 3), (1, 3, 0)]
        else:
            k = min(range(n), key=lambda i: loop[i])
            order = [(k, (k + i) % n, (k + i + 1) % n) for i in range(1, n - 1)]
        for a, b, c in order:
            tris.append((loop[a], loop[b], loop[c]))
            uvs.append([uv[a], uv[b], uv[c]])

    positions = np.array(fm.positions, dtype=np.float64).reshape(-1, 3)
    return TriMesh(
        positions=positions,
        triangles=np.array(tris, dtype=np.int32).reshape(-1, 3),
        uv=np.array(uvs, dtype=np.float64).reshape(-1, 3, 2),
    )


def merge_coplanar_pairs(mesh: TriMesh) -> FaceMesh:
    """Reconstruct quad faces from a triangulated mesh.

    Merges a triangle pair back into a quad when the two are coplanar, the
    union is convex, and the shared edge matches the deterministic diagonal
    rule (i.e. the pair could have come from triangulate()). Unmatched
    triangles are kept as triangle faces.
    """
    normals = triangle_normals(mesh)
    edge_map: dict[tuple[int, int], list[int]] = {}
    for ti, tri in enumerate(mesh.triangles):
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            key = (a, b) if a < b else (b, a)
            edge_map.setdefault(key, []).append(ti)

    if mesh.uv is not None:
        uv = mesh.uv
    else:
        uv = np.zeros((mesh.n_triangles, 3, 2))

    fm = FaceMesh(positions=[p for p in mesh.positions])
    used = np.zeros(mesh.n_triangles, dtype=bool)
    for ti in range(mesh.n_triangles):
        if used[ti]:
            continue
        merged = False
        tri = [int(v) for v in mesh.triangles[ti]]
        for k in range(3):
            a, b = tri[k], tri[(k + 1) % 3]
            key = (a, b) if a < b else (b, a)
            partners = [tj for tj in edge_map[key] if tj != ti and not used[tj]]
            if not partners:
                continue
            tj = partners[0]
            if np.dot(normals[ti], normals[tj]) < 1.0 - 1e-9:
                continue
            other = [int(v) for v in mesh.triangles[tj]]
            opposite = [v for v in other if v != a and v != b]
            if len(opposite) != 1:
                continue
            d = opposite[0]
            # splice d across the shared edge (a, b): ... a, d, b ...
            quad = [tri[(k + 2) % 3], a, d, b]
            if not _is_convex_planar(fm.positions, quad, normals[ti]):
                continue
            # accept only if triangulate() would split this quad along (a, b),
            # i.e. the merge is the exact inverse of the diagonal rule
            if _quad_diagonal(quad) != 1:  # diagonal 1 is (quad[1], quad[3]) == (a, b)
                continue
            quad_uv = _quad_uv(mesh, ti, tj, quad, a, b, d)
            fm.add_face(quad, quad_uv, "quad")
            used[ti] = used[tj] = True
            merged = True
            break
        if not merged:
            fm.add_face(tri, [tuple(c) for c in uv[ti]], "tri")
            used[ti] = True
    return fm


def _is_convex_planar(positions: list[np.ndarray], loop: list[int], normal: np.ndarray) -> bool:
    n = len(loop)
    p = [positions[i] for i in loop]
    for i in range(n):
        e0 = p[(i + 1) % n] - p[i]
        e1 = p[(i + 2) % n] - p[(i + 1) % n]
        if np.dot(np.cross(e0, e1), normal) <= 0:
            return False
    return True


def _quad_uv(mesh: TriMesh, ti: int, tj: int, quad: list[int], a: int, b: int, d: int):
    out = []
    for v in quad:
        src = ti if v != d else tj
        tri = mesh.triangles[src]
        slot = int(np.where(tri == v)[0][0])
        out.append(tuple(mesh.uv[src, slot]) if mesh.uv is not None else (0.0, 0.0))
    return out


# ---------------------------------------------------------------------------
# OBJ export
# ---------------------------------------------------------------------------


def to_obj(mesh: TriMesh) -> str:
    """Wavefront OBJ text with v/vt/f records, 9 significant digits."""
    lines = []
    for p in mesh.positions:
        lines.append(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    vt_index: dict[tuple[float, float], int] = {}
    face_vt = np.zeros((mesh.n_triangles, 3), dtype=np.int64)
    if mesh.uv is not None:
        for ti in range(mesh.n_triangles):
            for k in range(3):
                key = (float(mesh.uv[ti, k, 0]), float(mesh.uv[ti, k, 1]))
                if key not in vt_index:
                    vt_index[key] = len(vt_index) + 1
                    lines.append(f"vt {key[0]:.9g} {key[1]:.9g}")
                face_vt[ti, k] = vt_index[key]
        for ti, tri in enumerate(mesh.triangles):
            lines.append(
                "f "
                + " ".join(f"{int(tri[k]) + 1}/{face_vt[ti, k]}" for k in range(3))
            )
    else:
        for tri in mesh.triangles:
            lines.append("f " + " ".join(str(int(v) + 1) for v in tri))
    return "\n".join(lines) + "\n"


def save_obj(mesh: TriMesh, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(to_obj(mesh))
