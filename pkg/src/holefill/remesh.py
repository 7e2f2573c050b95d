"""Phase 3: close each true hole with a flat constrained Delaunay patch.

Only ring vertices enter the triangulation, so a patch never adds or moves
a vertex; the 2D projection decides connectivity and nothing else.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .cdt import CDTError, ProjectionFoldError, cdt
from .config import RepairConfig
from .geometry import (DegenerateGeometryError, fit_plane, point_plane_distance, project_to_plane,
                       signed_area2, triangle_area, triangle_intersection_segment,
                       triangle_overlap_area, triangle_plane)
from .holedetect import BorderRing, HoleSet
from .mesh import SurfaceMesh

log = logging.getLogger(__name__)


@dataclass
class FillResult:
    ring_vertices: list[int]
    faces_added: int = 0
    rejected_degenerate: int = 0
    rejected_intersecting: int = 0
    rejected_topology: int = 0  # passed geometry checks but rolled back
    residual: float = 0.0  # largest ring vertex distance to the fit plane
    status: str = "unfillable"  # filled | partial | unfillable
    reason: str | None = None
    faces: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def candidates(self) -> int:
        return (self.faces_added + self.rejected_degenerate + self.rejected_intersecting
                + self.rejected_topology)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["faces"] = [list(f) for f in self.faces]
        return d


def _ring_polygon(mesh: SurfaceMesh, ring: BorderRing) -> list[int]:
    """Ring vertex ids in border direction with duplicate groups collapsed.

    Each group is represented by its smallest id occurring in the ring.
    """
    ids = ring.vertex_ids()
    g = mesh.dup_group
    grp = (lambda v: int(g[v])) if g is not None else (lambda v: v)
    rep: dict[int, int] = {}
    for v in ids:
        k = grp(v)
        rep[k] = min(rep.get(k, v), v)
    seq = []
    for v in ids:
        r = rep[grp(v)]
        if not seq or seq[-1] != r:
            seq.append(r)
    while len(seq) > 1 and seq[0] == seq[-1]:
        seq.pop()
    if ring.orientation < 0:
        seq = seq[::-1]
    return seq


def _face_boxes(mesh: SurfaceMesh) -> tuple[np.ndarray, np.ndarray]:
    if not mesh.faces:
        return np.zeros((0, 3)), np.zeros((0, 3))
    tri = mesh.vertices[np.asarray(mesh.faces, dtype=int)]
    return tri.min(axis=1), tri.max(axis=1)


def _faces_clash(p: np.ndarray, q: np.ndarray, shared: int, cfg: RepairConfig) -> bool:
    """Do candidate triangle ``p`` and existing face ``q`` overlap beyond a shared boundary?"""
    scale = max(1.0, float(np.max(np.abs(np.vstack([p, q])))))
    try:
        plane = triangle_plane(*q, area_eps=cfg.area_eps)
    except DegenerateGeometryError:
        return False
    coplanar = all(point_plane_distance(x, plane) <= cfg.plane_eps * scale for x in p)
    if coplanar:
        ov = triangle_overlap_area(project_to_plane(p, plane), project_to_plane(q, plane))
        return ov > max(cfg.area_eps, 1e-9 * min(triangle_area(*p), triangle_area(*q)))
    if shared:
        return False
    seg = triangle_intersection_segment(p, q, eps=cfg.plane_eps * scale)
    return seg is not None and float(np.linalg.norm(seg[1] - seg[0])) > cfg.eps_duplicate


def fill_hole(mesh: SurfaceMesh, ring: BorderRing, cfg: RepairConfig) -> FillResult:
    """Triangulate one closed ring and insert the faces that pass validation."""
    poly = _ring_polygon(mesh, ring)
    res = FillResult(ring_vertices=list(poly))
    if len(poly) < 3:
        res.reason = "degenerate-ring"
        return res
    pts3 = mesh.vertices[poly]
    try:
        plane = fit_plane(pts3)
    except DegenerateGeometryError:
        res.reason = "degenerate-plane"
        return res
    res.residual = max(point_plane_distance(p, plane) for p in pts3)
    pts2 = project_to_plane(pts3, plane)
    n = len(poly)
    try:
        tri = cdt(pts2, [(i, (i + 1) % n) for i in range(n)], keep="parity")
    except ProjectionFoldError:
        res.reason = "projection-fold"
        return res
    except CDTError as exc:
        res.reason = f"triangulation-failed: {exc}"
        return res
    flip = signed_area2(pts2) < 0  # keep the ring's border direction in every new face
    cands = [(poly[a], poly[c], poly[b]) if flip else (poly[a], poly[b], poly[c])
             for a, b, c in tri.triangles]

    lo, hi = _face_boxes(mesh)
    g = mesh.dup_group
    grp = (lambda v: int(g[v])) if g is not None else (lambda v: v)
    accepted = []
    for f in cands:
        p = mesh.vertices[list(f)]
        if triangle_area(*p) <= cfg.area_eps:
            res.rejected_degenerate += 1
            continue
        pad = cfg.eps_duplicate
        near = np.flatnonzero(np.all(lo <= p.max(axis=0) + pad, axis=1) &
                              np.all(hi >= p.min(axis=0) - pad, axis=1)) if len(lo) else []
        fg = {grp(v) for v in f}
        clash = False
        for j in near:
            q_ids = mesh.faces[j]
            shared = len(fg & {grp(v) for v in q_ids})
            if _faces_clash(p, mesh.vertices[list(q_ids)], shared, cfg):
                clash = True
                break
        if clash:
            res.rejected_intersecting += 1
        else:
            accepted.append(f)

    if not accepted:
        res.reason = "all-candidates-rejected"
        return res
    before = mesh.n_halfedges - 3 * len(mesh.faces)
    old_faces = list(mesh.faces)
    mesh.faces = old_faces + accepted
    mesh.rebuild()
    after = mesh.n_halfedges - 3 * len(mesh.faces)
    if after > before:
        log.info("rolling back fill of ring %s: border count %d -> %d", poly, before, after)
        mesh.faces = old_faces
        mesh.rebuild()
        res.rejected_topology = len(accepted)
        res.reason = "border-count-increase"
        return res
    res.faces = accepted
    res.faces_added = len(accepted)
    if res.faces_added == len(cands):
        res.status = "filled"
    else:
        res.status = "partial"
        res.reason = "some-candidates-rejected"
    return res


def fill_all(mesh: SurfaceMesh, holes: HoleSet, cfg: RepairConfig) -> list[FillResult]:
    """Fill true holes one after another, lowest ring vertex id first."""
    rings = sorted(holes.true_holes, key=lambda r: (min(r.vertex_ids()), r.vertex_ids()))
    return [fill_hole(mesh, r, cfg) for r in rings]
