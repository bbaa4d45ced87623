import numpy as np
import pytest

from boxscan.mesh import FaceMesh, TriMesh, triangulate


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests see steady-state cost."""
    from boxscan.mesh import TriMesh
    from boxscan.scanner import build_accel, intersect

    quad = TriMesh(
        positions=np.array([[-1, -1, 2], [1, -1, 2], [1, 1, 2], [-1, 1, 2]], dtype=np.float64),
        triangles=np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32),
    )
    acc = build_accel(quad)
    intersect((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), acc)
    from boxscan.scanner import _cast_flat

    _cast_flat(np.zeros(3), np.array([[0.0, 0.0, 1.0]]), acc, brute=True)


def make_unit_cube() -> TriMesh:
    """Closed axis-aligned unit cube, quads split by the package's own rule."""
    fm = FaceMesh()
    for p in [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]:
        fm.add_vertex(np.array(p, dtype=np.float64))
    quads = [
        [0, 3, 2, 1],  # bottom (-z out)
        [4, 5, 6, 7],  # top
        [0, 1, 5, 4],  # -y
        [1, 2, 6, 5],  # +x
        [2, 3, 7, 6],  # +y
        [3, 0, 4, 7],  # -x
    ]
    for q in quads:
        fm.add_face(q, [(0.0, 0.0)] * 4, "cube")
    return triangulate(fm)


def dataset_tree_bytes(root) -> dict[str, bytes]:
    from pathlib import Path

    root = Path(root)
    out = {}
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        out[str(path.relative_to(root))] = path.read_bytes()
    return out
