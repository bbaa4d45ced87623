"""Thicken an open surface into a closed solid shell.

Every vertex is displaced inward (against the outward normals) so that each
incident face plane moves by exactly the requested thickness; vertices on
creases solve the incident planes jointly (even-thickness offset). Boundary
loops are bridged with rim quads, producing a closed 2-manifold.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh, boundary_edges, triangle_normals, _quad_diagonal

__all__ = ["solidify", "SolidifyError"]

# normals closer than this are treated as the same plane when offsetting
_SAME_PLANE = 1.0 - 1e-8
# reject offsets this many times larger than the thickness (feature too sharp)
_MAX_OFFSET_FACTOR = 10.0


class SolidifyError(ValueError):
    """Offset would self-intersect or is otherwise infeasible."""


def _vertex_offsets(mesh: TriMesh, thickness: float) -> np.ndarray:
    normals = triangle_normals(mesh)
    incident: list[list[int]] = [[] for _ in range(mesh.n_vertices)]
    for ti, tri in enumerate(mesh.triangles):
        for v in tri:
            incident[int(v)].append(ti)

    offsets = np.zeros((mesh.n_vertices, 3))
    for v, tris in enumerate(incident):
        if not tris:
            continue
        reps: list[np.ndarray] = []
        for ti in tris:
            n = normals[ti]
            if not any(float(np.dot(n, r)) > _SAME_PLANE for r in reps):
                reps.append(n)
        for i in range(len(reps)):
            for j in range(i + 1, len(reps)):
                if float(np.dot(reps[i], reps[j])) <= -1.0 + 1e-6:
                    raise SolidifyError(f"opposed faces meet at vertex {v}")
        if len(reps) == 1:
            delta = -thickness * reps[0]
        elif len(reps) == 2:
            c = float(np.dot(reps[0], reps[1]))
            delta = -thickness * (reps[0] + reps[1]) / (1.0 + c)
        else:
            n_mat = np.stack(reps)
            rhs = np.full(len(reps), -thickness)
            delta, *_ = np.linalg.lstsq(n_mat, rhs, rcond=None)
        if float(np.linalg.norm(delta)) > _MAX_OFFSET_FACTOR * thickness:
            raise SolidifyError(f"offset at vertex {v} exceeds {_MAX_OFFSET_FACTOR}x thickness")
        offsets[v] = delta
    return offsets


def solidify(mesh: TriMesh, thickness: float) -> TriMesh:
    """Return a closed solid: the surface, its inward offset, and rim quads
    bridging each boundary loop. Rejects offsets that would locally invert."""
    if thickness <= 0.0:
        raise SolidifyError(f"thickness must be > 0, got {thickness}")
    mesh.validate()

    n_v = mesh.n_vertices
    offsets = _vertex_offsets(mesh, thickness)
    inner_positions = mesh.positions + offsets
    positions = np.concatenate([mesh.positions, inner_positions], axis=0)

    outer_tris = mesh.triangles
    inner_tris = mesh.triangles[:, [0, 2, 1]] + np.int32(n_v)

    # a locally inverted offset flips an inner face back toward its source
    src_normals = triangle_normals(mesh)
    inner_corners = positions[inner_tris]
    inner_cross = np.cross(
        inner_corners[:, 1] - inner_corners[:, 0], inner_corners[:, 2] - inner_corners[:, 0]
    )
    if (np.einsum("ij,ij->i", inner_cross, src_normals) >= 0.0).any():
        raise SolidifyError("thickness too large for local feature size (inner face inverted)")

    if mesh.uv is not None:
        uv_outer = mesh.uv
        uv_inner = mesh.uv[:, [0, 2, 1]]
    else:
        uv_outer = np.zeros((mesh.n_triangles, 3, 2))
        uv_inner = uv_outer

    edge_uv: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    for ti, tri in enumerate(mesh.triangles):
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            edge_uv[(a, b)] = (uv_outer[ti, k], uv_outer[ti, (k + 1) % 3])

    rim_tris: list[tuple[int, int, int]] = []
    rim_uvs: list[list[np.ndarray]] = []
    for a, b in boundary_edges(mesh):
        quad = [b, a, a + n_v, b + n_v]
        uv_a, uv_b = edge_uv[(a, b)]
        quad_uv = [uv_b, uv_a, uv_a, uv_b]
        if _quad_diagonal(quad) == 0:
            order = [(0, 1, 2), (0, 2, 3)]
        else:
            order = [(1, 2, 3), (1, 3, 0)]
        for i, j, k in order:
            rim_tris.append((quad[i], quad[j], quad[k]))
            rim_uvs.append([quad_uv[i], quad_uv[j], quad_uv[k]])

    triangles = np.concatenate(
        [outer_tris, inner_tris, np.array(rim_tris, dtype=np.int32).reshape(-1, 3)], axis=0
    )
    uv = np.concatenate(
        [uv_outer, uv_inner, np.array(rim_uvs, dtype=np.float64).reshape(-1, 3, 2)], axis=0
    )
    out = TriMesh(positions=positions, triangles=triangles, uv=uv)
    out.validate()
    return out
