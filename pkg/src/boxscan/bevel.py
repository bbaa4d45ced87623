"""Crease-edge filleting.

Replaces each selected sharp edge with `segments` strips approximating a
circular fillet of the given radius, tangent to both incident faces. Faces
adjacent to a selected edge are inset by the tangent offset; where three
mutually perpendicular selected edges meet (a box corner), the gap is closed
with a spherical patch. A selected edge may also terminate on an open
boundary (e.g. a wall corner ending at the box opening), in which case the
fillet runs to the very end of the edge and vertices shared with unselected
faces slide along the fold line so the surface stays crack-free.

Supported crease networks are those of sheet/box geometry: terminal
endpoints and 3-edge perpendicular corners. Anything else is rejected
rather than guessed at.
"""

from __future__ import annotations

import numpy as np

from .mesh import FaceMesh, TriMesh, merge_coplanar_pairs, triangulate

__all__ = ["bevel_edges", "bevel_faces", "BevelError"]

# default sharpness threshold for automatic edge selection (30 degrees)
AUTO_SELECT_ANGLE = np.pi / 6

_FLAT = 1e-12  # normal angles below sqrt(2*_FLAT) rad need no fillet
_SAME_PLANE = 1.0 - 1e-9


class BevelError(ValueError):
    """Bevel radius too large or crease network unsupported."""


def _ekey(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


class _EdgeInfo:
    __slots__ = ("key", "faces", "normals", "cos", "t", "axis_vec", "cutback")

    def __init__(self, key, faces, normals, cos, t, axis_vec):
        self.key = key
        self.faces = faces      # (fa, fb) sorted by face index
        self.normals = normals  # (n_fa, n_fb)
        self.cos = cos
        self.t = t              # in-plane tangent offset
        self.axis_vec = axis_vec  # edge point -> fillet axis
        self.cutback = {key[0]: 0.0, key[1]: 0.0}


def bevel_faces(
    fm: FaceMesh,
    radius: float,
    segments: int,
    edges: list[tuple[int, int]],
) -> FaceMesh:
    """Fillet the selected crease edges of a polygon mesh."""
    if radius < 0.0:
        raise BevelError(f"radius must be >= 0, got {radius}")
    if radius == 0.0 or not edges:
        return fm
    if not (isinstance(segments, int) and segments >= 1):
        raise BevelError(f"segments must be an integer >= 1, got {segments}")

    normals = [fm.face_normal(fi) for fi in range(len(fm.faces))]
    pos = fm.positions

    # directed edge occurrences: key -> [(face, from_vertex, to_vertex), ...]
    occ: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
    for fi, loop in enumerate(fm.faces):
        n = len(loop)
        for k in range(n):
            a, b = loop[k], loop[(k + 1) % n]
            occ.setdefault(_ekey(a, b), []).append((fi, a, b))

    sel: dict[tuple[int, int], _EdgeInfo] = {}
    for raw in edges:
        key = _ekey(int(raw[0]), int(raw[1]))
        uses = occ.get(key)
        if uses is None:
            raise BevelError(f"selected edge {key} is not a mesh edge")
        if len(uses) != 2:
            raise BevelError(f"selected edge {key} is not interior (used {len(uses)}x)")
        (fa, a0, b0), (fb, _, _) = sorted(uses)
        na, nb = normals[fa], normals[fb]
        c = float(np.clip(np.dot(na, nb), -1.0, 1.0))
        if c > 1.0 - _FLAT:
            continue  # flat fold, nothing to round
        if c < -1.0 + 1e-9:
            raise BevelError(f"edge {key}: faces meet at ~180 degrees")
        edir = pos[b0] - pos[a0]
        edir = edir / np.linalg.norm(edir)
        if float(np.dot(np.cross(na, nb), edir)) <= 0.0:
            raise BevelError(f"edge {key} is reflex; only convex creases can be filleted")
        t = radius * np.sqrt((1.0 - c) / (1.0 + c))
        axis_vec = -radius / (1.0 + c) * (na + nb)
        if key in sel:
            raise BevelError(f"edge {key} selected twice")
        sel[key] = _EdgeInfo(key, (fa, fb), (na, nb), c, t, axis_vec)

    if not sel:
        return fm

    # radius sanity: tangent offsets must stay well inside incident edges
    edge_len = {k: float(np.linalg.norm(pos[k[1]] - pos[k[0]])) for k in occ}
    for key, info in sel.items():
        incident = [k for k in occ if k[0] in key or k[1] in key]
        shortest = min(edge_len[k] for k in incident)
        if max(radius, info.t) >= 0.5 * shortest:
            raise BevelError(
                f"radius too large: offset {info.t:.6g} vs shortest incident edge {shortest:.6g}"
            )

    sel_at: dict[int, list[tuple[int, int]]] = {}
    for key in sorted(sel):
        sel_at.setdefault(key[0], []).append(key)
        sel_at.setdefault(key[1], []).append(key)

    # 3-edge corners: perpendicular check, sphere center, per-edge cutbacks
    corner: dict[int, dict] = {}
    for v, keys in sorted(sel_at.items()):
        if len(keys) == 1:
            continue
        if len(keys) != 3:
            raise BevelError(
                f"vertex {v} has {len(keys)} selected edges; only 1 or 3 supported"
            )
        dirs = []
        for key in keys:
            w = key[1] if key[0] == v else key[0]
            d = pos[w] - pos[v]
            dirs.append(d / np.linalg.norm(d))
        for i in range(3):
            for j in range(i + 1, 3):
                if abs(float(np.dot(dirs[i], dirs[j]))) > 1e-6:
                    raise BevelError(f"corner at vertex {v}: selected edges not perpendicular")
        faces = sorted({fi for key in keys for fi, _, _ in occ[key]})
        if len(faces) != 3:
            raise BevelError(f"corner at vertex {v}: expected 3 faces, found {len(faces)}")
        n_mat = np.stack([normals[fi] for fi in faces])
        try:
            o = pos[v] + np.linalg.solve(n_mat, np.full(3, -radius))
        except np.linalg.LinAlgError as exc:
            raise BevelError(f"corner at vertex {v}: degenerate face normals") from exc
        for key, d in zip(keys, dirs):
            cut = float(np.dot(o - pos[v], d))
            if cut <= 0.0:
                raise BevelError(f"corner at vertex {v}: non-convex corner")
            sel[key].cutback[v] = cut
        corner[v] = {"faces": faces, "center": o}

    for key, info in sel.items():
        if info.cutback[key[0]] + info.cutback[key[1]] >= edge_len[key] - 1e-12:
            raise BevelError(f"edge {key} too short for radius {radius}")

    # vertex clusters: faces around a creased vertex connected by unselected edges
    cluster_of: dict[tuple[int, int], int] = {}   # (vertex, face) -> cluster id
    cluster_delta: dict[tuple[int, int], np.ndarray] = {}  # (vertex, cid) -> shift
    for v in sorted(sel_at):
        faces_here = _faces_at(fm, v)
        adj: dict[int, set[int]] = {fi: set() for fi in faces_here}
        for key, uses in occ.items():
            if v not in key or key in sel:
                continue
            fis = [fi for fi, _, _ in uses if fi in adj]
            for i in range(len(fis)):
                for j in range(i + 1, len(fis)):
                    adj[fis[i]].add(fis[j])
                    adj[fis[j]].add(fis[i])
        unvisited = set(faces_here)
        while unvisited:
            seed = min(unvisited)
            stack, members = [seed], []
            unvisited.discard(seed)
            while stack:
                fi = stack.pop()
                members.append(fi)
                for fj in sorted(adj[fi]):
                    if fj in unvisited:
                        unvisited.discard(fj)
                        stack.append(fj)
            cid = min(members)
            for fi in members:
                cluster_of[(v, fi)] = cid
            cluster_delta[(v, cid)] = _cluster_shift(fm, normals, occ, sel, v, members)

    # --- assemble the new mesh -------------------------------------------
    out = FaceMesh()
    index: dict[tuple, int] = {}

    def get_vertex(key: tuple, p: np.ndarray) -> int:
        if key not in index:
            index[key] = out.add_vertex(np.asarray(p, dtype=np.float64))
        return index[key]

    new_uv: dict[tuple[int, int], np.ndarray] = {}  # (face, vertex) -> inset uv

    for fi, loop in enumerate(fm.faces):
        new_loop, new_uvs = [], []
        for slot, v in enumerate(loop):
            uv_old = np.asarray(fm.uvs[fi][slot], dtype=np.float64)
            if v in sel_at:
                cid = cluster_of[(v, fi)]
                delta = cluster_delta[(v, cid)]
                idx = get_vertex(("c", v, cid), pos[v] + delta)
                uv = uv_old + _uv_delta(fm, fi, delta)
            else:
                idx = get_vertex(("o", v), pos[v])
                uv = uv_old
            new_loop.append(idx)
            new_uvs.append((float(uv[0]), float(uv[1])))
            new_uv[(fi, v)] = np.asarray(new_uvs[-1])
        out.add_face(new_loop, new_uvs, fm.tags[fi])

    for key in sorted(sel):
        info = sel[key]
        fa, fb = info.faces
        na, nb = info.normals
        u, v = key
        edir = pos[v] - pos[u]
        edir = edir / np.linalg.norm(edir)
        rows = {}
        for end, into in ((u, edir), (v, -edir)):
            base = pos[end] + info.cutback[end] * into
            axis_pt = base + info.axis_vec
            row = []
            for m in range(segments + 1):
                if m == 0:
                    idx = index[("c", end, cluster_of[(end, fa)])]
                elif m == segments:
                    idx = index[("c", end, cluster_of[(end, fb)])]
                else:
                    w = (segments - m) * na + m * nb
                    w = w / np.linalg.norm(w)
                    idx = get_vertex(("s", key, end, m), axis_pt + radius * w)
                uv = ((segments - m) * new_uv[(fa, end)] + m * new_uv[(fb, end)]) / segments
                row.append((idx, (float(uv[0]), float(uv[1]))))
            rows[end] = row
        flip = _needs_flip(out, rows[u][0][0], rows[v][0][0], rows[v][1][0], rows[u][1][0], na + nb)
        for m in range(segments):
            quad = [rows[u][m], rows[v][m], rows[v][m + 1], rows[u][m + 1]]
            if flip:
                quad.reverse()
            out.add_face([q[0] for q in quad], [q[1] for q in quad], "bevel-edge")

    for v in sorted(corner):
        faces = corner[v]["faces"]
        o = corner[v]["center"]
        ns = [normals[fi] for fi in faces]
        cuv = [new_uv[(fi, v)] for fi in faces]
        pair_edge = {}
        for i in range(3):
            for j in range(i + 1, 3):
                shared = [
                    key
                    for key in sel_at[v]
                    if {faces[i], faces[j]} == set(sel[key].faces)
                ]
                if len(shared) != 1:
                    raise BevelError(f"corner at vertex {v}: face pair shares no selected edge")
                pair_edge[(i, j)] = shared[0]

        s = segments

        def grid_vertex(i: int, j: int, k: int) -> tuple[int, tuple[float, float]]:
            uv = (i * cuv[0] + j * cuv[1] + k * cuv[2]) / s
            uv = (float(uv[0]), float(uv[1]))
            zeros = [w == 0 for w in (i, j, k)]
            if zeros.count(True) == 2:  # grid corner == face inset corner
                axis = zeros.index(False)
                return index[("c", v, cluster_of[(v, faces[axis])])], uv
            if zeros.count(True) == 1:  # grid edge == strip end row
                axis = zeros.index(True)
                a, b = [w for w in range(3) if w != axis]
                key = pair_edge[(a, b)]
                m = (i, j, k)[b]
                lo = min(sel[key].faces)
                if lo != faces[a]:  # strip row runs from fa to fb
                    m = s - m
                return index[("s", key, v, m)], uv
            w = i * ns[0] + j * ns[1] + k * ns[2]
            w = w / np.linalg.norm(w)
            return get_vertex(("g", v, i, j, k), o + radius * w), uv

        tris = []
        for i in range(s):
            for j in range(s - i):
                k = s - 1 - i - j
                tris.append([(i + 1, j, k), (i, j + 1, k), (i, j, k + 1)])
                if k > 0:
                    tris.append([(i, j + 1, k), (i + 1, j, k), (i + 1, j + 1, k - 1)])
        first = [grid_vertex(*ijk) for ijk in tris[0]]
        p0, p1, p2 = (out.positions[c[0]] for c in first)
        flip = float(np.dot(np.cross(p1 - p0, p2 - p0), ns[0] + ns[1] + ns[2])) < 0.0
        for ijk_tri in tris:
            cs = [grid_vertex(*ijk) for ijk in ijk_tri]
            if flip:
                cs.reverse()
            out.add_face([c[0] for c in cs], [c[1] for c in cs], "bevel-corner")

    return out


def _faces_at(fm: FaceMesh, v: int) -> list[int]:
    return [fi for fi, loop in enumerate(fm.faces) if v in loop]


def _cluster_shift(fm, normals, occ, sel, v, members) -> np.ndarray:
    """Inset displacement for one fan of faces around a creased vertex."""
    pos = fm.positions
    constraints: dict[tuple[int, int], int] = {}
    for key, uses in occ.items():
        if v not in key or key not in sel:
            continue
        for fi, _, _ in uses:
            if fi in members:
                if key in constraints:
                    raise BevelError(
                        f"fillet of edge {key} ends at interior vertex {v}; unsupported"
                    )
                constraints[key] = fi

    def inward(key: tuple[int, int], fi: int) -> np.ndarray:
        frm, to = next((a, b) for f, a, b in occ[key] if f == fi)
        e = pos[to] - pos[frm]
        e = e / np.linalg.norm(e)
        return np.cross(normals[fi], e)

    items = sorted(constraints.items())
    if len(items) == 1:
        (key, fi), = items
        d_hat = inward(key, fi)
        t = sel[key].t
        reps: list[np.ndarray] = []
        for fj in members:
            if not any(float(np.dot(normals[fj], r)) > _SAME_PLANE for r in reps):
                reps.append(normals[fj])
        if len(reps) == 1:
            return t * d_hat
        if len(reps) == 2:
            fold = np.cross(reps[0], reps[1])
            fold_len = float(np.linalg.norm(fold))
            if fold_len < 1e-9:
                raise BevelError(f"vertex {v}: fold between opposed faces cannot be inset")
            fold = fold / fold_len
            proj = float(np.dot(d_hat, fold))
            if abs(proj) < 0.2:
                raise BevelError(f"vertex {v}: fold line nearly parallel to creased edge")
            return (t / proj) * fold
        raise BevelError(f"vertex {v}: more than two planes in one fan; unsupported")
    if len(items) == 2:
        (k1, f1), (k2, f2) = items
        if float(np.dot(normals[f1], normals[f2])) < _SAME_PLANE:
            raise BevelError(f"vertex {v}: two creases meet across non-coplanar faces")
        d1, d2 = inward(k1, f1), inward(k2, f2)
        t1, t2 = sel[k1].t, sel[k2].t
        c = float(np.dot(d1, d2))
        denom = 1.0 - c * c
        if denom < 1e-9:
            raise BevelError(f"vertex {v}: parallel creases in one face")
        a = (t1 - c * t2) / denom
        b = (t2 - c * t1) / denom
        return a * d1 + b * d2
    raise BevelError(f"vertex {v}: {len(items)} creases in one fan; unsupported")


def _uv_delta(fm: FaceMesh, fi: int, delta: np.ndarray) -> np.ndarray:
    """Map an in-plane 3D displacement through the face's affine UV chart."""
    loop = fm.faces[fi]
    p0, p1, p2 = (fm.positions[loop[k]] for k in range(3))
    u0, u1, u2 = (np.asarray(fm.uvs[fi][k], dtype=np.float64) for k in range(3))
    e1, e2 = p1 - p0, p2 - p0
    gram = np.array([[np.dot(e1, e1), np.dot(e1, e2)], [np.dot(e1, e2), np.dot(e2, e2)]])
    rhs = np.array([np.dot(e1, delta), np.dot(e2, delta)])
    ab = np.linalg.solve(gram, rhs)
    return ab[0] * (u1 - u0) + ab[1] * (u2 - u0)


def _needs_flip(out: FaceMesh, i0, i1, i2, i3, outward: np.ndarray) -> bool:
    p0, p1, p2 = out.positions[i0], out.positions[i1], out.positions[i2]
    return float(np.dot(np.cross(p1 - p0, p2 - p0), outward)) < 0.0


def bevel_edges(
    mesh: TriMesh,
    radius: float,
    segments: int = 4,
    edges: list[tuple[int, int]] | None = None,
) -> TriMesh:
    """Fillet sharp edges of a triangle mesh.

    With `edges=None`, every interior edge whose faces meet at more than 30
    degrees is selected. Coplanar triangle pairs are merged back into quads
    first so insets operate on whole panels.
    """
    if radius < 0.0:
        raise BevelError(f"radius must be >= 0, got {radius}")
    if radius == 0.0:
        return mesh
    fm = merge_coplanar_pairs(mesh)
    if edges is None:
        normals = [fm.face_normal(fi) for fi in range(len(fm.faces))]
        occ: dict[tuple[int, int], list[int]] = {}
        for fi, loop in enumerate(fm.faces):
            n = len(loop)
            for k in range(n):
                occ.setdefault(_ekey(loop[k], loop[(k + 1) % n]), []).append(fi)
        threshold = np.cos(AUTO_SELECT_ANGLE)
        edges = [
            key
            for key, fis in sorted(occ.items())
            if len(fis) == 2 and float(np.dot(normals[fis[0]], normals[fis[1]])) < threshold
        ]
    result = bevel_faces(fm, radius, segments, list(edges))
    tri = triangulate(result)
    tri.validate()
    return tri
