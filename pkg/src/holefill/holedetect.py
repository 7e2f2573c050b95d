"""Phase 2: trace border rings and tell true holes from pseudo-holes.

A border half-edge ``h`` and its predecessor ``h_p`` span a virtual triangle.
If that triangle lies on top of a face incident to its corners (or their
duplicates) the apparent gap is covered and the pair is not a hole boundary.
Rings left open by the walk are completed across overlapping and
non-manifold edges, then put in canonical cyclic order.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .config import RepairConfig
from .geometry import (DegenerateGeometryError, fit_plane, point_plane_distance, project_to_plane,
                       signed_area2, triangle_area, triangle_overlap_area, triangle_plane)
from .mesh import NONE, OverlapClass, SurfaceMesh, edge_key
from .preprocess import mark_duplicates, mark_overlapping_edges

log = logging.getLogger(__name__)


class CycleError(RuntimeError):
    """A border walk ran longer than the mesh has half-edges."""


class AmbiguousRingError(ValueError):
    def __init__(self, vertex: int, msg: str = "ring branches"):
        super().__init__(f"{msg} at vertex {vertex}")
        self.vertex = vertex


class Provenance(str, Enum):
    TRAVERSED = "traversed"
    OVERLAP = "overlap-completed"
    NONMANIFOLD = "nonmanifold-completed"


@dataclass(frozen=True)
class RingEdge:
    u: int
    v: int
    halfedge: int | None  # border half-edge id, None for completion edges off the border
    provenance: Provenance = Provenance.TRAVERSED


@dataclass
class BorderRing:
    edges: list[RingEdge] = field(default_factory=list)
    closed: bool = False
    reason: str | None = None
    orientation: int = 1  # +1 when the ordered edges follow the border half-edges

    def vertex_ids(self) -> list[int]:
        return [e.u for e in self.edges]

    def halfedges(self) -> set[int]:
        return {e.halfedge for e in self.edges if e.halfedge is not None}

    def provenance_counts(self) -> dict:
        c = Counter(e.provenance.value for e in self.edges)
        return {p.value: c.get(p.value, 0) for p in Provenance}

    def add(self, e: RingEdge) -> bool:
        if e.halfedge is not None:
            if any(x.halfedge == e.halfedge for x in self.edges):
                return False
        elif any(x.halfedge is None and (x.u, x.v) == (e.u, e.v) for x in self.edges):
            return False
        self.edges.append(e)
        return True


@dataclass(frozen=True)
class VirtualTriangle:
    points: np.ndarray  # (3, 3): v0, v1, v2
    vertices: tuple[int, int, int]
    halfedges: tuple[int | None, int | None]  # (h_p, h)

    @property
    def area(self) -> float:
        return triangle_area(*self.points)


@dataclass
class RejectedCandidate:
    ring: BorderRing
    kind: str  # "pseudo-hole" | "unclosable" | "degenerate-ring" | "ambiguous"
    reason: str


@dataclass
class HoleSet:
    true_holes: list[BorderRing] = field(default_factory=list)
    rejected: list[RejectedCandidate] = field(default_factory=list)

    def to_records(self) -> list[dict]:
        recs = []
        for r in self.true_holes:
            recs.append(_record(r, "true-hole", None))
        for c in self.rejected:
            recs.append(_record(c.ring, c.kind, c.reason))
        return recs


def _record(ring: BorderRing, cls: str, reason: str | None) -> dict:
    return {
        "classification": cls,
        "reason": reason,
        "vertex_ids": [int(v) for v in ring.vertex_ids()],
        "edge_count": len(ring.edges),
        "closed": bool(ring.closed),
        "provenance": ring.provenance_counts(),
    }


# -- the virtual triangle test -----------------------------------------------

def triangle_measures(alpha, beta, cfg: RepairConfig):
    """``(D, A)`` for virtual triangle ``alpha`` against face ``beta``.

    D is the largest distance of alpha's corners to beta's plane and A the
    overlap area of alpha projected on that plane divided by beta's area.
    Returns None when beta is degenerate.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    try:
        plane = triangle_plane(*beta, area_eps=cfg.area_eps)
    except DegenerateGeometryError:
        return None
    dist = max(point_plane_distance(p, plane) for p in alpha)
    a2 = project_to_plane(alpha, plane)
    b2 = project_to_plane(beta, plane)
    area_b = abs(signed_area2(b2))
    return dist, triangle_overlap_area(a2, b2) / area_b


def intersection_test(alpha, beta, cfg: RepairConfig) -> bool:
    """True when ``alpha`` lies on face ``beta``: D < eps_distance and A > eps_area_ratio."""
    if isinstance(alpha, VirtualTriangle):
        alpha = alpha.points
    m = triangle_measures(alpha, beta, cfg)
    if m is None:
        log.debug("degenerate face skipped in intersection test")
        return False
    d, a = m
    return d < cfg.eps_distance and a > cfg.eps_area_ratio


class _Context:
    """Per-run lookups shared by the detection steps."""

    def __init__(self, mesh: SurfaceMesh, cfg: RepairConfig):
        if mesh.dup_group is None:
            mark_duplicates(mesh, cfg)
        if not mesh.edge_marks and mesh.faces:
            mark_overlapping_edges(mesh, cfg)
        self.mesh = mesh
        self.cfg = cfg
        self.members: dict[int, list[int]] = defaultdict(list)
        for v, g in enumerate(mesh.dup_group.tolist()):
            self.members[g].append(v)
        self.vertex_edges: dict[int, list[tuple[int, int]]] = defaultdict(list)
        for e in mesh.edges():
            self.vertex_edges[e[0]].append(e)
            self.vertex_edges[e[1]].append(e)
        self.nm_neighbors: dict[int, list[int]] = defaultdict(list)
        for a, b in sorted(mesh.nonmanifold_edges):
            self.nm_neighbors[a].append(b)
            self.nm_neighbors[b].append(a)
        self.visited: set[int] = set()
        self.claimed: dict[int, int] = {}  # border half-edge -> ring index

    def g(self, v: int) -> int:
        return int(self.mesh.dup_group[v])

    def group_members(self, v: int) -> list[int]:
        return self.members[self.g(v)]

    def covered(self, v0: int, v1: int, v2: int) -> bool:
        """Virtual triangle v0 v1 v2 lies on a face incident to its corners' groups."""
        mesh = self.mesh
        alpha = mesh.vertices[[v0, v1, v2]]
        faces = sorted({f for v in (v0, v1, v2) for m in self.group_members(v)
                        for f in mesh.vertex_faces[m]})
        return any(intersection_test(alpha, mesh.face_points(f), self.cfg) for f in faces)


def _virtual_apex(ctx: _Context, hp: int, v1: int, v2: int) -> int | None:
    """Origin of h_p, or further back along the chain while the triangle is flat."""
    mesh = ctx.mesh
    pts = mesh.vertices
    cur = hp
    for _ in range(mesh.n_halfedges):
        v0 = mesh.he_origin[cur]
        if ctx.g(v0) not in (ctx.g(v1), ctx.g(v2)) and \
                triangle_area(pts[v0], pts[v1], pts[v2]) > ctx.cfg.area_eps:
            return v0
        cur = mesh.he_prev[cur]
        if cur == NONE or cur == hp:
            return None
    return None


def _pair_is_hole(ctx: _Context, hp: int, h: int) -> bool:
    mesh = ctx.mesh
    v1, v2 = mesh.he_origin[h], mesh.he_target[h]
    v0 = _virtual_apex(ctx, hp, v1, v2)
    if v0 is None:
        # flat all the way: a zero-area triangle covers nothing
        return True
    return not ctx.covered(v0, v1, v2)


def _valid_border(ctx: _Context, h: int) -> bool:
    m = ctx.mesh
    if not m.is_border(h):
        return False
    mark = m.edge_marks.get(edge_key(m.he_origin[h], m.he_target[h]), OverlapClass.NONE)
    return mark is not OverlapClass.DEGENERATE


def _preceding(ctx: _Context, h: int) -> int | None:
    m = ctx.mesh
    hp = m.he_prev[h]
    if hp != NONE:
        return hp
    # broken chain: smallest untraversed border half-edge ending at a duplicate of origin(h)
    gid = ctx.g(m.he_origin[h])
    cands = [b for b in m.border_halfedges()
             if b != h and b not in ctx.visited and ctx.g(m.he_target[b]) == gid]
    return min(cands) if cands else None


def _walk(ctx: _Context, seed_he: int) -> tuple[BorderRing, int]:
    m = ctx.mesh
    seed = seed_he
    for _ in range(m.n_halfedges + 1):
        p = m.he_prev[seed]
        if p == NONE or p == seed_he or p in ctx.visited:
            break
        seed = p
    ring = BorderRing()
    rejected_pairs = 0
    h = seed
    for _ in range(m.n_halfedges + 1):
        ctx.visited.add(h)
        hp = _preceding(ctx, h)
        if hp is not None and _valid_border(ctx, hp) and _valid_border(ctx, h):
            if _pair_is_hole(ctx, hp, h):
                ring.add(RingEdge(m.he_origin[hp], m.he_target[hp], hp))
                ring.add(RingEdge(m.he_origin[h], m.he_target[h], h))
            else:
                rejected_pairs += 1
        nxt = m.he_next[h]
        if nxt == NONE or nxt == seed or nxt in ctx.visited:
            return ring, rejected_pairs
        h = nxt
    raise CycleError(f"border walk from half-edge {seed_he} does not terminate")


def trace_border_rings(mesh: SurfaceMesh, cfg: RepairConfig, _ctx: _Context | None = None):
    """Walk every border chain once; returns ``(rings, rejected)``.

    ``rings`` hold the collected edges in walk order, possibly open.
    ``rejected`` lists chains where every pair was covered by a face.
    """
    ctx = _ctx or _Context(mesh, cfg)
    rings: list[BorderRing] = []
    rejected: list[RejectedCandidate] = []
    for h in mesh.border_halfedges():
        if h in ctx.visited or not _valid_border(ctx, h):
            continue
        before = set(ctx.visited)
        ring, n_rej = _walk(ctx, h)
        if ring.edges:
            rings.append(ring)
        else:
            chain = [RingEdge(mesh.he_origin[b], mesh.he_target[b], b)
                     for b in sorted(ctx.visited - before)]
            rejected.append(RejectedCandidate(BorderRing(chain), "pseudo-hole", "intersected"))
    rings = _merge_sharing(rings)
    for i, r in enumerate(rings):
        for he in r.halfedges():
            ctx.claimed[he] = i
        r.closed = ring_is_closed(r, ctx.mesh)
    return rings, rejected


def _merge_sharing(rings: list[BorderRing]) -> list[BorderRing]:
    """Union rings that collected the same half-edge (via the broken-chain fallback)."""
    out: list[BorderRing] = []
    owner: dict[int, int] = {}
    for r in rings:
        hits = sorted({owner[h] for h in r.halfedges() if h in owner})
        if not hits:
            out.append(r)
            idx = len(out) - 1
        else:
            idx = hits[0]
            for e in r.edges:
                out[idx].add(e)
            for j in hits[1:]:
                for e in out[j].edges:
                    out[idx].add(e)
                out[j] = BorderRing()
        for h in out[idx].halfedges():
            owner[h] = idx
    return [r for r in out if r.edges]


# -- closure -------------------------------------------------------------------

def _degrees(ring: BorderRing, mesh: SurfaceMesh):
    g = mesh.dup_group if mesh.dup_group is not None else np.arange(len(mesh.vertices))
    out_d: Counter = Counter()
    in_d: Counter = Counter()
    for e in ring.edges:
        out_d[int(g[e.u])] += 1
        in_d[int(g[e.v])] += 1
    return g, out_d, in_d


def ring_is_closed(ring: BorderRing, mesh: SurfaceMesh) -> bool:
    """Edges balance at every duplicate group and form one connected set."""
    if len(ring.edges) < 2:
        return False
    g, out_d, in_d = _degrees(ring, mesh)
    nodes = set(out_d) | set(in_d)
    if any(out_d[n] != in_d[n] for n in nodes):
        return False
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in ring.edges:
        parent[find(int(g[e.u]))] = find(int(g[e.v]))
    return len({find(n) for n in nodes}) == 1


def _open_end(ring: BorderRing, ctx: _Context):
    """(end vertex, previous vertex, start groups) of the first dangling end."""
    g, out_d, in_d = _degrees(ring, ctx.mesh)
    ends = sorted(n for n in in_d if in_d[n] > out_d[n])
    starts = {n for n in out_d if out_d[n] > in_d[n]}
    if not ends:
        return None
    end = ends[0]
    for e in reversed(ring.edges):
        if int(g[e.v]) == end:
            return e.v, e.u, starts
    return None


def complete_ring_overlap(ring: BorderRing, mesh: SurfaceMesh, cfg: RepairConfig,
                          _ctx: _Context | None = None, max_steps: int | None = None) -> BorderRing:
    """Extend an open ring at its end with untraversed border or overlapping edges."""
    ctx = _ctx or _Context(mesh, cfg)
    steps = cfg.max_completion_iters if max_steps is None else max_steps
    me = id(ring)
    for _ in range(steps):
        if ring_is_closed(ring, mesh):
            ring.closed, ring.reason = True, None
            return ring
        end = _open_end(ring, ctx)
        if end is None:
            ring.reason = "disconnected"
            return ring
        endv, prevv, starts = end
        in_ring_he = ring.halfedges()
        in_ring_und = {edge_key(ctx.g(e.u), ctx.g(e.v)) for e in ring.edges}
        cands = []
        for x in ctx.group_members(endv):
            for b in _border_out_of(ctx, x):
                if b in in_ring_he or ctx.claimed.get(b, me) != me:
                    continue
                cands.append((x, mesh.he_target[b], b))
            for a, b2 in ctx.vertex_edges[x]:
                y = b2 if a == x else a
                key = (a, b2)
                mark = mesh.edge_marks.get(key, OverlapClass.NONE)
                if mark not in (OverlapClass.SAME_ENDPOINTS, OverlapClass.COLLINEAR_DISTINCT):
                    continue
                if edge_key(ctx.g(x), ctx.g(y)) in in_ring_und:
                    continue
                partners = mesh.overlap_partners.get(key, ())
                if any(edge_key(ctx.g(p), ctx.g(q)) in in_ring_und for p, q in partners):
                    cands.append((x, y, None))
        if not cands:
            ring.reason = "no-overlap-candidate"
            return ring

        def rank(c):
            x, y, he = c
            fails = ctx.covered(prevv, endv, y) if ctx.g(prevv) != ctx.g(y) else True
            closes = ctx.g(y) in starts
            return (fails, not closes, he is None, he if he is not None else -1, x, y)

        x, y, he = min(cands, key=rank)
        ring.add(RingEdge(x, y, he, Provenance.OVERLAP))
        if he is not None:
            ctx.claimed[he] = me
            ctx.visited.add(he)
    ring.closed = ring_is_closed(ring, mesh)
    if not ring.closed:
        ring.reason = "iteration-limit"
    return ring


def _border_out_of(ctx: _Context, v: int) -> list[int]:
    if not hasattr(ctx, "_border_out"):
        m = ctx.mesh
        d = defaultdict(list)
        for b in m.border_halfedges():
            d[m.he_origin[b]].append(b)
        ctx._border_out = d
    return ctx._border_out.get(v, [])


def complete_ring_nonmanifold(ring: BorderRing, mesh: SurfaceMesh, cfg: RepairConfig,
                              _ctx: _Context | None = None,
                              max_steps: int | None = None) -> BorderRing:
    """Extend an open ring across non-manifold edges to the nearest valid coplanar vertex."""
    ctx = _ctx or _Context(mesh, cfg)
    steps = cfg.max_completion_iters if max_steps is None else max_steps
    for _ in range(steps):
        if ring_is_closed(ring, mesh):
            ring.closed, ring.reason = True, None
            return ring
        end = _open_end(ring, ctx)
        if end is None:
            ring.reason = "disconnected"
            return ring
        endv, prevv, _ = end
        in_ring_und = {edge_key(ctx.g(e.u), ctx.g(e.v)) for e in ring.edges}
        cands = []
        for x in ctx.group_members(endv):
            for y in ctx.nm_neighbors[x]:
                if ctx.g(y) == ctx.g(x) or edge_key(ctx.g(x), ctx.g(y)) in in_ring_und:
                    continue
                cands.append((x, y))
        if not cands:
            ring.reason = "no-nonmanifold-candidate"
            return ring
        ring_pts = {ctx.g(v): v for e in ring.edges for v in (e.u, e.v)}
        pts = mesh.vertices[sorted(set(ring_pts.values()) | {y for _, y in cands})]
        try:
            plane = fit_plane(pts)
            off = max(point_plane_distance(p, plane) for p in pts)
        except DegenerateGeometryError:
            off = 0.0
        if off > cfg.coplanar_tol:
            ring.reason = "noncoplanar-candidates"
            return ring
        p_end = mesh.vertices[endv]
        cands.sort(key=lambda c: (float(np.linalg.norm(mesh.vertices[c[1]] - p_end)), c[1], c[0]))
        chosen = None
        for x, y in cands:
            if ctx.g(prevv) == ctx.g(y) or not ctx.covered(prevv, endv, y):
                chosen = (x, y)
                break
        if chosen is None:
            ring.reason = "no-valid-nonmanifold-candidate"
            return ring
        ring.add(RingEdge(chosen[0], chosen[1], None, Provenance.NONMANIFOLD))
    ring.closed = ring_is_closed(ring, mesh)
    if not ring.closed:
        ring.reason = "iteration-limit"
    return ring


# -- ordering -------------------------------------------------------------------

def reorder_ring(ring: BorderRing, mesh: SurfaceMesh | None = None) -> BorderRing:
    """Order the ring's edges into one cycle in canonical direction.

    The cycle starts at the lowest vertex id and heads to the neighbour with
    the lower id; duplicates count as one vertex when linking edges.
    """
    if not ring.edges:
        raise AmbiguousRingError(-1, "empty ring")
    g = (mesh.dup_group if mesh is not None and mesh.dup_group is not None else None)

    def grp(v):
        return int(g[v]) if g is not None else v

    adj: dict[int, list[int]] = defaultdict(list)  # group -> edge indices
    for i, e in enumerate(ring.edges):
        adj[grp(e.u)].append(i)
        adj[grp(e.v)].append(i)
    for n in sorted(adj):
        if len(adj[n]) != 2:
            raise AmbiguousRingError(min(v for e in ring.edges for v in (e.u, e.v) if grp(v) == n),
                                     "ring is not a single cycle")
    low = min(v for e in ring.edges for v in (e.u, e.v))
    start = grp(low)

    def other(i, n):
        e = ring.edges[i]
        return grp(e.v) if grp(e.u) == n else grp(e.u)

    def lowest_id(n):
        return min(v for e in ring.edges for v in (e.u, e.v) if grp(v) == n)

    i0, i1 = adj[start]
    first = i0 if (lowest_id(other(i0, start)), i0) <= (lowest_id(other(i1, start)), i1) else i1
    ordered, agree = [], 0
    node, i = start, first
    used = set()
    while i not in used:
        used.add(i)
        e = ring.edges[i]
        if grp(e.u) == node:
            ordered.append(e)
            agree += 1
        else:
            ordered.append(RingEdge(e.v, e.u, e.halfedge, e.provenance))
            agree -= 1
        node = other(i, node)
        a, b = adj[node]
        i = b if a == i else a
    if len(used) != len(ring.edges):
        raise AmbiguousRingError(low, "ring is not connected")
    out = BorderRing(ordered, closed=True, reason=None, orientation=1 if agree >= 0 else -1)
    return out


def split_simple_cycles(ring: BorderRing, mesh: SurfaceMesh) -> list[BorderRing]:
    """Cut a closed ring that revisits a vertex group into simple cycles.

    Two holes touching at a single vertex are traced as one walk; each loop
    is its own hole. Edges are chained in collection order and a cycle is cut
    off whenever the path returns to a group already on it.
    """
    g = mesh.dup_group

    def grp(v):
        return int(g[v]) if g is not None else v

    out_edges: dict[int, list[int]] = defaultdict(list)
    for i, e in enumerate(ring.edges):
        out_edges[grp(e.u)].append(i)
    used: set[int] = set()
    cycles: list[list[RingEdge]] = []
    for start in range(len(ring.edges)):
        if start in used:
            continue
        path: list[int] = []
        pos: dict[int, int] = {}
        i = start
        while i is not None:
            used.add(i)
            e = ring.edges[i]
            pos.setdefault(grp(e.u), len(path))
            path.append(i)
            t = grp(e.v)
            if t in pos:
                k = pos[t]
                cycles.append([ring.edges[j] for j in path[k:]])
                for j in path[k:]:
                    pos.pop(grp(ring.edges[j].u), None)
                del path[k:]
            nxt = [j for j in out_edges[t] if j not in used]
            i = nxt[0] if nxt else None
        if path:
            cycles.append([ring.edges[j] for j in path])
    if len(cycles) == 1:
        return [ring]
    return [BorderRing(c, closed=ring_is_closed(BorderRing(c), mesh)) for c in cycles]


# -- composition -------------------------------------------------------------------

def _is_degenerate_ring(ring: BorderRing, ctx: _Context) -> bool:
    groups = {}
    for e in ring.edges:
        groups.setdefault(ctx.g(e.u), e.u)
    if len(groups) < 3:
        return True
    pts = ctx.mesh.vertices[list(groups.values())]
    try:
        plane = fit_plane(pts)
    except DegenerateGeometryError:
        return True
    return abs(signed_area2(project_to_plane(pts, plane))) <= ctx.cfg.area_eps


def detect_holes(mesh: SurfaceMesh, cfg: RepairConfig) -> HoleSet:
    """Trace, complete, reorder and classify every candidate ring."""
    ctx = _Context(mesh, cfg)
    rings, rejected = trace_border_rings(mesh, cfg, ctx)
    holes = HoleSet(rejected=list(rejected))
    for idx, ring in enumerate(rings):
        for he in ring.halfedges():
            ctx.claimed[he] = idx
    for ring in rings:
        for _ in range(cfg.max_completion_iters):
            if ring.closed:
                break
            n = len(ring.edges)
            complete_ring_overlap(ring, mesh, cfg, ctx, max_steps=1)
            if ring.closed:
                break
            complete_ring_nonmanifold(ring, mesh, cfg, ctx, max_steps=1)
            if len(ring.edges) == n:
                break
        ring.closed = ring_is_closed(ring, mesh)
        if not ring.closed:
            holes.rejected.append(RejectedCandidate(ring, "unclosable", ring.reason or "open"))
            continue
        for sub in split_simple_cycles(ring, mesh):
            try:
                ordered = reorder_ring(sub, mesh)
            except AmbiguousRingError as exc:
                holes.rejected.append(RejectedCandidate(sub, "ambiguous", str(exc)))
                continue
            if _is_degenerate_ring(ordered, ctx):
                holes.rejected.append(RejectedCandidate(ordered, "degenerate-ring", "zero-area"))
                continue
            holes.true_holes.append(ordered)
    holes.true_holes.sort(key=lambda r: min(r.vertex_ids()))
    return holes
