"""Hand-built meshes shared by several test modules."""

from __future__ import annotations

import numpy as np

from holefill.mesh import SurfaceMesh


def cube(size=1.0, drop=()):
    """Unit cube, 12 outward triangles; ``drop`` removes faces by index (top = 2, 3)."""
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                  [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], float) * size
    f = [(0, 2, 1), (0, 3, 2), (4, 5, 6), (4, 6, 7), (0, 1, 5), (0, 5, 4),
         (1, 2, 6), (1, 6, 5), (2, 3, 7), (2, 7, 6), (3, 0, 4), (3, 4, 7)]
    return SurfaceMesh(v, [t for i, t in enumerate(f) if i not in set(drop)])


def grid(nx, ny, spacing=1.0, skip=()):
    """Planar z=0 quad grid, two up-facing triangles per cell; cells in ``skip`` are left out.

    Vertex (i, j) has id ``j * (nx + 1) + i``.
    """
    verts = [(i * spacing, j * spacing, 0.0) for j in range(ny + 1) for i in range(nx + 1)]
    faces = []
    for j in range(ny):
        for i in range(nx):
            if (i, j) in set(skip):
                continue
            a = j * (nx + 1) + i
            b, c, d = a + 1, a + nx + 2, a + nx + 1
            faces += [(a, b, c), (a, c, d)]
    return [list(p) for p in verts], faces


def add_tent(verts, faces, u, v, height=0.4, spread=0.2):
    """Closed tetrahedron standing on edge u-v above the z=0 plane."""
    pu, pv = np.asarray(verts[u]), np.asarray(verts[v])
    mid = (pu + pv) / 2
    e = (pv - pu) / np.linalg.norm(pv - pu)
    side = np.cross([0, 0, 1.0], e)
    a = len(verts)
    verts.append(list(mid + height * np.array([0, 0, 1.0]) + spread * side))
    b = len(verts)
    verts.append(list(mid + height * np.array([0, 0, 1.0]) - spread * side))
    tet = [(u, v, a), (u, a, b), (u, b, v), (v, b, a)]
    cen = (pu + pv + np.asarray(verts[a]) + np.asarray(verts[b])) / 4
    out = []
    for t in tet:
        p = [np.asarray(verts[i]) for i in t]
        n = np.cross(p[1] - p[0], p[2] - p[0])
        out.append(t if np.dot(n, sum(p) / 3 - cen) > 0 else (t[0], t[2], t[1]))
    faces += out
    return a, b
