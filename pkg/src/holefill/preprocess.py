"""Phase 1: resolve self-intersections, stitch pseudo-hole seams, mark defects."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .cdt import CDTError, cdt
from .config import RepairConfig
from .geometry import orient2, plane_basis, triangle_intersection_segment
from .mesh import OverlapClass, SurfaceMesh, edge_key

log = logging.getLogger(__name__)


@dataclass
class PreprocessReport:
    self_intersection_pairs: int = 0
    self_intersection_resolved: int = 0
    faces_removed: int = 0
    faces_added: int = 0
    discarded_subtriangles: int = 0
    stitched_pairs: int = 0
    stitch_ambiguities: int = 0
    duplicate_groups: int = 0
    overlap_edges: dict = field(default_factory=lambda: {c.value: 0 for c in OverlapClass
                                                         if c is not OverlapClass.NONE})
    # original face -> its sub-triangles, for area audits; not part of the JSON record
    remeshed: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "self_intersection_pairs": self.self_intersection_pairs,
            "self_intersection_resolved": self.self_intersection_resolved,
            "faces_removed": self.faces_removed,
            "faces_added": self.faces_added,
            "discarded_subtriangles": self.discarded_subtriangles,
            "stitched_pairs": self.stitched_pairs,
            "stitch_ambiguities": self.stitch_ambiguities,
            "duplicate_groups": self.duplicate_groups,
            "overlap_edges": dict(self.overlap_edges),
        }


# -- duplicate vertices -------------------------------------------------------

def duplicate_groups(points, radius: float) -> np.ndarray:
    """Single-linkage groups of points within ``radius``; label = lowest member id."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    if n == 0:
        return np.zeros(0, dtype=int)
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    lowest = np.full(labels.max() + 1, n, dtype=int)
    np.minimum.at(lowest, labels, np.arange(n))
    return lowest[labels]


def mark_duplicates(mesh: SurfaceMesh, cfg: RepairConfig) -> np.ndarray:
    mesh.dup_group = duplicate_groups(mesh.vertices, cfg.eps_duplicate)
    return mesh.dup_group


def count_duplicate_groups(groups: np.ndarray) -> int:
    """Number of groups holding more than one vertex."""
    if len(groups) == 0:
        return 0
    return int(np.sum(np.bincount(groups) > 1))


# -- overlapping edges --------------------------------------------------------

def mark_overlapping_edges(mesh: SurfaceMesh, cfg: RepairConfig) -> dict:
    """Classify every edge; returns ``{edge: OverlapClass}`` and stores it on the mesh."""
    if mesh.dup_group is None:
        mark_duplicates(mesh, cfg)
    g = mesh.dup_group
    eps = cfg.eps_duplicate
    edges = mesh.edges()
    marks = {e: OverlapClass.NONE for e in edges}
    partners: dict[tuple[int, int], set] = defaultdict(set)
    if not edges:
        mesh.edge_marks, mesh.overlap_partners = marks, {}
        return marks
    e = np.asarray(edges, dtype=int)
    p0 = mesh.vertices[e[:, 0]]
    p1 = mesh.vertices[e[:, 1]]
    length = np.linalg.norm(p1 - p0, axis=1)

    degenerate = (g[e[:, 0]] == g[e[:, 1]]) | (length <= eps)
    for i in np.flatnonzero(degenerate):
        marks[edges[i]] = OverlapClass.DEGENERATE

    by_groups: dict[tuple[int, int], list[int]] = defaultdict(list)
    for i, (a, b) in enumerate(edges):
        if not degenerate[i]:
            by_groups[edge_key(int(g[a]), int(g[b]))].append(i)
    for ids in by_groups.values():
        if len(ids) > 1:
            for i in ids:
                marks[edges[i]] = OverlapClass.SAME_ENDPOINTS
                partners[edges[i]].update(edges[j] for j in ids if j != i)

    lo = np.minimum(p0, p1) - eps
    hi = np.maximum(p0, p1) + eps
    gk = [edge_key(int(g[a]), int(g[b])) for a, b in edges]
    for i in range(len(edges)):
        if degenerate[i]:
            continue
        cand = np.flatnonzero(np.all(lo[i] <= hi, axis=1) & np.all(lo <= hi[i], axis=1))
        cand = np.asarray([j for j in cand[cand > i] if not degenerate[j] and gk[j] != gk[i]],
                          dtype=int)
        if len(cand) == 0:
            continue
        hit = _collinear_overlap(p0[i], p1[i], p0[cand], p1[cand], eps)
        for j in cand[hit]:
            partners[edges[i]].add(edges[j])
            partners[edges[j]].add(edges[i])
            for k in (i, j):
                if marks[edges[k]] is OverlapClass.NONE:
                    marks[edges[k]] = OverlapClass.COLLINEAR_DISTINCT
    mesh.edge_marks = marks
    mesh.overlap_partners = dict(partners)
    return marks


def _line_dist(p, q0, q1):
    d = q1 - q0
    return np.linalg.norm(np.cross(p - q0, d), axis=-1) / np.linalg.norm(d, axis=-1)


def _collinear_overlap(a0, a1, b0, b1, eps: float):
    """Both endpoints of each edge within eps of the other's line, shared extent > eps.

    ``b0``/``b1`` may be stacked (m, 3) arrays; the result is then a boolean array.
    """
    a0, a1 = np.asarray(a0, dtype=float), np.asarray(a1, dtype=float)
    b0, b1 = np.asarray(b0, dtype=float), np.asarray(b1, dtype=float)
    near = np.maximum.reduce([_line_dist(b0, a0, a1), _line_dist(b1, a0, a1),
                              _line_dist(a0, b0, b1), _line_dist(a1, b0, b1)]) < eps
    d = (a1 - a0) / np.linalg.norm(a1 - a0)
    la = float(np.dot(a1 - a0, d))
    tb0 = (b0 - a0) @ d
    tb1 = (b1 - a0) @ d
    extent = np.minimum(la, np.maximum(tb0, tb1)) - np.maximum(0.0, np.minimum(tb0, tb1))
    return near & (extent > eps)


def count_marks(marks: dict) -> dict:
    c = Counter(m.value for m in marks.values())
    return {k.value: c.get(k.value, 0) for k in OverlapClass if k is not OverlapClass.NONE}


# -- pseudo-hole stitching ----------------------------------------------------

def stitch_pseudo_holes(mesh: SurfaceMesh, cfg: RepairConfig,
                        report: PreprocessReport | None = None) -> int:
    """Weld border half-edge pairs running in opposite directions between duplicates.

    Repeats until no matching pair is left. Returns the number of stitched pairs.
    """
    if mesh.dup_group is None:
        mark_duplicates(mesh, cfg)
    total = 0
    while True:
        g = mesh.dup_group
        by_key: dict[tuple[int, int], list[int]] = defaultdict(list)
        for h in mesh.border_halfedges():
            by_key[(int(g[mesh.he_origin[h]]), int(g[mesh.he_target[h]]))].append(h)
        used = set()
        welds: dict[int, int] = {}
        for h in mesh.border_halfedges():
            if h in used:
                continue
            go, gt = int(g[mesh.he_origin[h]]), int(g[mesh.he_target[h]])
            if go == gt:
                continue
            mates = [m for m in by_key.get((gt, go), []) if m not in used and m != h]
            if not mates:
                continue
            if len(mates) > 1 or len(by_key[(go, gt)]) > 1:
                if report is not None:
                    report.stitch_ambiguities += 1
                log.info("ambiguous stitch at border half-edge %d (%d candidates)", h, len(mates))
            m = mates[0]
            # weld onto the group label, which is the lowest vertex id of the group
            pending = {mesh.he_origin[h]: go, mesh.he_target[h]: gt,
                       mesh.he_origin[m]: gt, mesh.he_target[m]: go}
            if _collapses_face(mesh, {**welds, **pending}):
                continue
            welds.update(pending)
            used.update((h, m))
        faces = [tuple(welds.get(v, v) for v in f) for f in mesh.faces]
        if not used or faces == mesh.faces:
            break
        mesh.faces = faces
        mesh.rebuild()
        total += len(used) // 2
    if report is not None:
        report.stitched_pairs += total
    return total


def _collapses_face(mesh: SurfaceMesh, welds: dict) -> bool:
    touched = set(welds)
    for v in touched:
        for f in mesh.vertex_faces[v]:
            if len({welds.get(x, x) for x in mesh.faces[f]}) < 3:
                return True
    return False


# -- self-intersections -------------------------------------------------------

def find_self_intersections(mesh: SurfaceMesh, cfg: RepairConfig) -> list:
    """Pairs ``(f1, f2, p, q)`` of non-adjacent faces crossing along a segment > eps_duplicate."""
    nf = len(mesh.faces)
    if nf < 2:
        return []
    groups = mesh.dup_group if mesh.dup_group is not None else \
        duplicate_groups(mesh.vertices, cfg.eps_duplicate)
    tri = mesh.vertices[np.asarray(mesh.faces, dtype=int)]
    lo = tri.min(axis=1) - cfg.plane_eps
    hi = tri.max(axis=1) + cfg.plane_eps
    fgroups = [set(int(groups[v]) for v in f) for f in mesh.faces]
    out = []
    for i in range(nf):
        cand = np.flatnonzero(np.all(lo[i] <= hi, axis=1) & np.all(lo <= hi[i], axis=1))
        for j in cand[cand > i]:
            if fgroups[i] & fgroups[j]:
                continue
            seg = triangle_intersection_segment(tri[i], tri[j], cfg.plane_eps)
            if seg is None:
                continue
            p, q = seg
            if np.linalg.norm(q - p) > cfg.eps_duplicate:
                out.append((i, int(j), p, q))
    return out


def _split_segments(segs: list, tol: float) -> list:
    """Split 2D segments at their mutual crossings."""
    pieces = []
    for i, (a, b) in enumerate(segs):
        ts = [0.0, 1.0]
        for j, (c, d) in enumerate(segs):
            if i == j:
                continue
            den = orient2((0, 0), (b[0] - a[0], b[1] - a[1]), (d[0] - c[0], d[1] - c[1]))
            if abs(den) <= 1e-300:
                continue
            t = ((c[0] - a[0]) * (d[1] - c[1]) - (c[1] - a[1]) * (d[0] - c[0])) / den
            s = ((c[0] - a[0]) * (b[1] - a[1]) - (c[1] - a[1]) * (b[0] - a[0])) / den
            if -tol <= t <= 1 + tol and -tol <= s <= 1 + tol:
                ts.append(min(max(t, 0.0), 1.0))
        ts = sorted(set(ts))
        for t0, t1 in zip(ts, ts[1:]):
            pieces.append(((a[0] + t0 * (b[0] - a[0]), a[1] + t0 * (b[1] - a[1])),
                           (a[0] + t1 * (b[0] - a[0]), a[1] + t1 * (b[1] - a[1]))))
    return pieces


def _retriangulate_face(mesh: SurfaceMesh, f: int, segments: list, cfg: RepairConfig,
                        new_vertex, report: PreprocessReport) -> list:
    """Sub-triangles of face ``f`` with ``segments`` (3D, on the face) as constraints."""
    corners = [int(v) for v in mesh.faces[f]]
    P = mesh.vertices[corners]
    n = np.cross(P[1] - P[0], P[2] - P[0])
    n /= np.linalg.norm(n)
    u, v = plane_basis(n)

    def to2(x):
        d = np.asarray(x) - P[0]
        return (float(d @ u), float(d @ v))

    def to3(xy):
        return P[0] + xy[0] * u + xy[1] * v

    scale = float(np.max(np.linalg.norm(P - P[0], axis=1)))
    tol = 1e-12 * max(scale, 1.0)
    pts2: list = [to2(p) for p in P]
    ids: list = list(corners)

    def point_index(xy, xyz=None):
        for k, q in enumerate(pts2):
            if abs(q[0] - xy[0]) <= tol and abs(q[1] - xy[1]) <= tol:
                return k
        pts2.append(xy)
        ids.append(new_vertex(to3(xy) if xyz is None else xyz))
        return len(pts2) - 1

    segs2 = _split_segments([(to2(a), to2(b)) for a, b in segments], 1e-12)
    cons = set()
    for a, b in segs2:
        ia, ib = point_index(a), point_index(b)
        if ia != ib:
            cons.add((min(ia, ib), max(ia, ib)))
    # face boundary, split where constraint points land on it
    for k in range(3):
        a, b = pts2[k], pts2[(k + 1) % 3]
        on = [k]
        for m in range(3, len(pts2)):
            q = pts2[m]
            if abs(orient2(a, b, q)) <= tol * scale:
                t = ((q[0] - a[0]) * (b[0] - a[0]) + (q[1] - a[1]) * (b[1] - a[1])) / \
                    ((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2)
                if 0.0 < t < 1.0:
                    on.append(m)
        on.sort(key=lambda m: (pts2[m][0] - a[0]) * (b[0] - a[0]) + (pts2[m][1] - a[1]) * (b[1] - a[1]))
        on.append((k + 1) % 3)
        for x, y in zip(on, on[1:]):
            cons.add((min(x, y), max(x, y)))
    tri = cdt(pts2, sorted(cons), keep="hull")
    out = []
    for a, b, c in tri.triangles:
        tri_ids = (ids[a], ids[b], ids[c])
        area = 0.5 * abs(orient2(pts2[a], pts2[b], pts2[c]))
        if area <= cfg.area_eps:
            report.discarded_subtriangles += 1
            log.info("discarding degenerate sub-triangle %s of face %d", tri_ids, f)
            continue
        out.append(tri_ids)  # ccw in the face's own basis keeps the original winding
    return out


def resolve_self_intersections(mesh: SurfaceMesh, cfg: RepairConfig,
                               report: PreprocessReport | None = None) -> PreprocessReport:
    """Split every pair of crossing faces along their intersection segment.

    New vertices are the segment endpoints; they lie on both supporting planes,
    so each face is retriangulated in its own plane.
    """
    report = report if report is not None else PreprocessReport()
    pairs = find_self_intersections(mesh, cfg)
    report.self_intersection_pairs += len(pairs)
    if not pairs:
        return report
    segs: dict[int, list] = defaultdict(list)
    for f1, f2, p, q in pairs:
        segs[f1].append((p, q))
        segs[f2].append((p, q))

    new_pts: list[np.ndarray] = []
    base = len(mesh.vertices)

    def new_vertex(x):
        x = np.asarray(x, dtype=float)
        for k, y in enumerate(new_pts):
            if np.linalg.norm(x - y) <= cfg.plane_eps:
                return base + k
        new_pts.append(x)
        return base + len(new_pts) - 1

    replaced: dict[int, list] = {}
    for f in sorted(segs):
        try:
            replaced[f] = _retriangulate_face(mesh, f, segs[f], cfg, new_vertex, report)
        except CDTError as exc:
            log.warning("could not retriangulate face %d: %s", f, exc)
    if new_pts:
        mesh.vertices = np.vstack([mesh.vertices, np.asarray(new_pts)])
        if mesh.dup_group is not None:
            mesh.dup_group = np.concatenate([mesh.dup_group, np.arange(base, base + len(new_pts))])
    keep = [f for i, f in enumerate(mesh.faces) if i not in replaced]
    added = [t for f in sorted(replaced) for t in replaced[f]]
    for f, subs in replaced.items():
        report.remeshed[mesh.faces[f]] = list(subs)
    report.faces_removed += len(replaced)
    report.faces_added += len(added)
    report.self_intersection_resolved += sum(1 for f1, f2, _, _ in pairs
                                             if f1 in replaced and f2 in replaced)
    mesh.faces = keep + added
    mesh.rebuild()
    return report


def preprocess(mesh: SurfaceMesh, cfg: RepairConfig) -> PreprocessReport:
    """Run the whole first phase in place."""
    report = PreprocessReport()
    mesh.dup_group = None
    resolve_self_intersections(mesh, cfg, report)
    mark_duplicates(mesh, cfg)
    stitch_pseudo_holes(mesh, cfg, report)
    report.duplicate_groups = count_duplicate_groups(mesh.dup_group)
    marks = mark_overlapping_edges(mesh, cfg)
    report.overlap_edges = count_marks(marks)
    return report
