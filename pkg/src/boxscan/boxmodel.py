"""Parametric cardboard-box construction.

The box is built as a zero-thickness shell first: a base quad centered at
the origin (bottom in the z = 0 plane), four walls extruded up to size_z,
and one flap per wall hinged at the wall's top edge. Each flap is rotated
rigidly outward about its hinge by its own angle, measured from the wall's
upward continuation (0 = straight up, pi/2 = horizontal, pi = folded flat
against the outer wall). Flap tip corners are inset sideways by the taper.

The shell then optionally gets its crease edges filleted (vertical wall
corners and the base perimeter only; flap tips and hinges stay sharp) and
is finally thickened inward into a closed solid, so `size` remains the
outer dimension.

UVs come from the unfolded sheet: the base rectangle with walls folded out
on all four sides and flaps beyond the walls. Fold edges share UVs, so the
layout has no seams except the four vertical wall cuts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bevel import bevel_faces
from .mesh import FaceMesh, TriMesh, triangulate
from .solidify import solidify

__all__ = ["BoxParams", "InvalidParamsError", "build_shell", "unwrap_uv", "build_box"]

# geometric tolerance below which a flap or tip edge is dropped as degenerate
_DEGENERATE = 1e-9

# flap order everywhere: +x, -x, +y, -y
FLAP_ORDER = ("+x", "-x", "+y", "-y")


class InvalidParamsError(ValueError):
    """Box parameter violates an invariant; `field` names the offender."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class BoxParams:
    """Six-parameter cardboard box description (SI units, radians)."""

    size: tuple[float, float, float]
    flap_length: float = 0.0
    flap_taper: float = 0.0
    open: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    thickness: float = 0.0
    bevel_radius: float = 0.0
    bevel_segments: int = 4

    def validate(self) -> None:
        sx, sy, sz = self.size
        if not (sx > 0 and sy > 0 and sz > 0):
            raise InvalidParamsError("size", f"all components must be > 0, got {self.size}")
        if not all(math.isfinite(s) for s in self.size):
            raise InvalidParamsError("size", "non-finite component")
        if not (0.0 <= self.thickness < min(sx, sy) / 2):
            raise InvalidParamsError(
                "thickness", f"must be in [0, min(size_x, size_y)/2), got {self.thickness}"
            )
        if not (0.0 <= self.bevel_radius < min(sx, sy, sz) / 2):
            raise InvalidParamsError(
                "bevel_radius", f"must be in [0, min(size)/2), got {self.bevel_radius}"
            )
        if not self.flap_length >= 0.0:
            raise InvalidParamsError("flap_length", f"must be >= 0, got {self.flap_length}")
        if not (0.0 <= self.flap_taper <= min(sx, sy) / 2):
            raise InvalidParamsError(
                "flap_taper", f"must be in [0, min(size_x, size_y)/2], got {self.flap_taper}"
            )
        for i, angle in enumerate(self.open):
            if not (0.0 <= angle <= math.pi):
                raise InvalidParamsError("open", f"open[{i}] must be in [0, pi], got {angle}")
        if not (isinstance(self.bevel_segments, int) and self.bevel_segments >= 1):
            raise InvalidParamsError(
                "bevel_segments", f"must be an integer >= 1, got {self.bevel_segments}"
            )

    def to_dict(self) -> dict:
        return {
            "size": [float(s) for s in self.size],
            "flap_length": float(self.flap_length),
            "flap_taper": float(self.flap_taper),
            "open": [float(a) for a in self.open],
            "thickness": float(self.thickness),
            "bevel_radius": float(self.bevel_radius),
            "bevel_segments": int(self.bevel_segments),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoxParams":
        return cls(
            size=tuple(float(v) for v in d["size"]),
            flap_length=float(d.get("flap_length", 0.0)),
            flap_taper=float(d.get("flap_taper", 0.0)),
            open=tuple(float(v) for v in d.get("open", (0.0, 0.0, 0.0, 0.0))),
            thickness=float(d.get("thickness", 0.0)),
            bevel_radius=float(d.get("bevel_radius", 0.0)),
            bevel_segments=int(d.get("bevel_segments", 4)),
        )


def shell_faces(params: BoxParams) -> tuple[FaceMesh, list[tuple[int, int]]]:
    """Construct the open shell as polygon faces with unfolded-sheet UVs.

    Returns the face mesh and the crease edges eligible for beveling
    (four vertical wall corners plus the four base perimeter edges).
    """
    sx, sy, sz = params.size
    hx, hy = sx / 2.0, sy / 2.0
    length = params.flap_length
    taper = params.flap_taper

    fm = FaceMesh()
    b = [fm.add_vertex(p) for p in [(-hx, -hy, 0.0), (hx, -hy, 0.0), (hx, hy, 0.0), (-hx, hy, 0.0)]]
    t = [fm.add_vertex(p) for p in [(-hx, -hy, sz), (hx, -hy, sz), (hx, hy, sz), (-hx, hy, sz)]]

    uv_at = {
        b[0]: (-hx, -hy), b[1]: (hx, -hy), b[2]: (hx, hy), b[3]: (-hx, hy),
    }
    fm.add_face([b[0], b[3], b[2], b[1]], [uv_at[b[0]], uv_at[b[3]], uv_at[b[2]], uv_at[b[1]]], "base")

    # walls: (loop, uv of the four loop corners), built so the outward normal
    # points away from the box axis and the top edge runs opposite the flap
    walls = {
        "+x": ([b[1], b[2], t[2], t[1]], [(hx, -hy), (hx, hy), (hx + sz, hy), (hx + sz, -hy)]),
        "-x": ([b[3], b[0], t[0], t[3]], [(-hx, hy), (-hx, -hy), (-hx - sz, -hy), (-hx - sz, hy)]),
        "+y": ([b[2], b[3], t[3], t[2]], [(hx, hy), (-hx, hy), (-hx, hy + sz), (hx, hy + sz)]),
        "-y": ([b[0], b[1], t[1], t[0]], [(-hx, -hy), (hx, -hy), (hx, -hy - sz), (-hx, -hy - sz)]),
    }
    for name, (loop, uv) in walls.items():
        fm.add_face(loop, uv, f"wall{name}")

    # flap hinge data per wall: hinge endpoints (traversal order opposite the
    # wall top edge), outward axis, lateral unit, and the uv chart of the flap
    flap_geom = {
        "+x": (t[1], t[2], np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
        "-x": (t[3], t[0], np.array([-1.0, 0.0, 0.0]), np.array([0.0, -1.0, 0.0])),
        "+y": (t[2], t[3], np.array([0.0, 1.0, 0.0]), np.array([-1.0, 0.0, 0.0])),
        "-y": (t[0], t[1], np.array([0.0, -1.0, 0.0]), np.array([1.0, 0.0, 0.0])),
    }

    def flap_uv(name: str, point: np.ndarray, d: float) -> tuple[float, float]:
        # d = distance from the hinge along the flap; lateral = in-sheet offset
        if name == "+x":
            return (hx + sz + d, float(point[1]))
        if name == "-x":
            return (-hx - sz - d, float(point[1]))
        if name == "+y":
            return (float(point[0]), hy + sz + d)
        return (float(point[0]), -hy - sz - d)

    if length > _DEGENERATE:
        for idx, name in enumerate(FLAP_ORDER):
            ha_i, hb_i, outward, lateral = flap_geom[name]
            angle = params.open[idx]
            ha = fm.positions[ha_i]
            hb = fm.positions[hb_i]
            adir = math.sin(angle) * outward + math.cos(angle) * np.array([0.0, 0.0, 1.0])
            width = float(np.linalg.norm(hb - ha))
            tip_width = width - 2.0 * taper
            if tip_width > _DEGENERATE:
                tip_b = fm.add_vertex(hb + length * adir - taper * lateral)
                tip_a = fm.add_vertex(ha + length * adir + taper * lateral)
                loop = [ha_i, hb_i, tip_b, tip_a]
                uv = [
                    flap_uv(name, ha, 0.0),
                    flap_uv(name, hb, 0.0),
                    flap_uv(name, fm.positions[tip_b], length),
                    flap_uv(name, fm.positions[tip_a], length),
                ]
            else:
                tip_m = fm.add_vertex((ha + hb) / 2.0 + length * adir)
                loop = [ha_i, hb_i, tip_m]
                uv = [
                    flap_uv(name, ha, 0.0),
                    flap_uv(name, hb, 0.0),
                    flap_uv(name, fm.positions[tip_m], length),
                ]
            fm.add_face(loop, uv, f"flap{name}")

    crease_edges = [
        (b[0], b[1]), (b[1], b[2]), (b[2], b[3]), (b[0], b[3]),
        (b[0], t[0]), (b[1], t[1]), (b[2], t[2]), (b[3], t[3]),
    ]
    return fm, crease_edges


def build_shell(params: BoxParams) -> TriMesh:
    """Open zero-thickness shell: base, walls, rotated flaps. Bottom at z=0,
    centered in x/y, outward-consistent winding."""
    params.validate()
    fm, _ = shell_faces(params)
    mesh = triangulate(fm)
    mesh.validate()
    return mesh


def unwrap_uv(params: BoxParams, shell: TriMesh) -> TriMesh:
    """Attach unfolded-sheet UVs to a shell produced by build_shell.

    The chart is isometric per panel: the base rectangle, walls folded out
    around it, flaps beyond the walls; fold edges share UV coordinates.
    """
    expected = build_shell(params)
    if expected.triangles.shape != shell.triangles.shape or not np.array_equal(
        expected.triangles, shell.triangles
    ):
        raise ValueError("shell topology does not match build_shell(params)")
    if not np.allclose(expected.positions, shell.positions, atol=1e-9, rtol=0.0):
        raise ValueError("shell geometry does not match build_shell(params)")
    return TriMesh(positions=shell.positions.copy(), triangles=shell.triangles.copy(), uv=expected.uv.copy())


def build_box(params: BoxParams) -> TriMesh:
    """Full construction: shell with flaps -> unfolded UVs -> crease fillets
    -> inward thickness. Deterministic function of the parameters."""
    params.validate()
    fm, creases = shell_faces(params)
    if params.bevel_radius > 0.0:
        fm = bevel_faces(fm, params.bevel_radius, params.bevel_segments, creases)
    mesh = triangulate(fm)
    if params.thickness > 0.0:
        mesh = solidify(mesh, params.thickness)
    mesh.validate()
    return mesh
