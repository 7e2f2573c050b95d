"""2D constrained Delaunay triangulation without Steiner points.

Bowyer-Watson insertion inside a large super-triangle, constraint recovery
by edge flips (Sloan 1993), then Lawson flips on the unconstrained edges.
Sized for hole rings and per-face retriangulation, i.e. tens of points.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import orient2, segments_cross2


class CDTError(ValueError):
    pass


class ProjectionFoldError(CDTError):
    """The constraint polygon crosses itself, typically a folded projection."""


@dataclass
class ConstrainedTriangulation2:
    points: np.ndarray
    constraints: list[tuple[int, int]]
    triangles: list[tuple[int, int, int]] = field(default_factory=list)  # counter-clockwise

    def edges(self) -> set[tuple[int, int]]:
        out = set()
        for a, b, c in self.triangles:
            for u, v in ((a, b), (b, c), (c, a)):
                out.add((min(u, v), max(u, v)))
        return out


def _incircle(a, b, c, d) -> float:
    """Positive when d lies inside the circumcircle of counter-clockwise abc."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    return ((adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
            - (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady)
            + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady))


class _Tri:
    """Mutable triangulation keyed by directed edges."""

    def __init__(self, pts: list):
        self.p = pts
        self.tris: set[tuple[int, int, int]] = set()
        self.edge: dict[tuple[int, int], tuple[int, int, int]] = {}

    @staticmethod
    def _canon(t):
        i = t.index(min(t))
        return t[i:] + t[:i]

    def add(self, a, b, c):
        t = self._canon((a, b, c))
        self.tris.add(t)
        for u, v in ((a, b), (b, c), (c, a)):
            self.edge[(u, v)] = t

    def remove(self, t):
        self.tris.discard(t)
        a, b, c = t
        for u, v in ((a, b), (b, c), (c, a)):
            if self.edge.get((u, v)) == t:
                del self.edge[(u, v)]

    def opposite(self, u, v):
        """Apex of the triangle on the left of directed edge u->v."""
        t = self.edge.get((u, v))
        if t is None:
            return None
        return next(w for w in t if w != u and w != v)

    def has_edge(self, u, v):
        return (u, v) in self.edge or (v, u) in self.edge

    def flip(self, u, v):
        a = self.opposite(u, v)
        b = self.opposite(v, u)
        self.remove(self.edge[(u, v)])
        self.remove(self.edge[(v, u)])
        self.add(a, u, b)
        self.add(b, v, a)
        return a, b


def _in_circum(p, t, q, n_real) -> bool:
    supers = sum(1 for i in t if i >= n_real)
    if supers == 0:
        return _incircle(p[t[0]], p[t[1]], p[t[2]], q) > 0.0
    if supers == 1:
        # super vertex at infinity: the circle degenerates to the half-plane
        # left of the real edge
        k = next(j for j in range(3) if t[j] >= n_real)
        a, b = p[t[(k + 1) % 3]], p[t[(k + 2) % 3]]
        o = orient2(a, b, q)
        if o != 0.0:
            return o > 0.0
        dot = (q[0] - a[0]) * (b[0] - a[0]) + (q[1] - a[1]) * (b[1] - a[1])
        return 0.0 < dot < (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
    return _incircle(p[t[0]], p[t[1]], p[t[2]], q) > 0.0


def _bowyer_watson(tri: _Tri, order, n_real: int) -> None:
    p = tri.p
    for i in order:
        q = p[i]
        seed = next((t for t in tri.tris if _contains(p, t, q)), None)
        if seed is None:
            raise CDTError(f"point {i} lies outside the super triangle")
        # cavity: triangles reachable from the seed whose circumcircle holds q
        bad = {seed}
        stack = [seed]
        while stack:
            t = stack.pop()
            a, b, c = t
            for u, v in ((a, b), (b, c), (c, a)):
                nb = tri.edge.get((v, u))
                if nb is not None and nb not in bad and _in_circum(p, nb, q, n_real):
                    bad.add(nb)
                    stack.append(nb)
        # grow until every boundary edge sees q strictly (float noise on cocircular input)
        while True:
            boundary = []
            grow = None
            for t in bad:
                a, b, c = t
                for u, v in ((a, b), (b, c), (c, a)):
                    nb = tri.edge.get((v, u))
                    if nb is None or nb not in bad:
                        if orient2(p[u], p[v], q) <= 0.0:
                            if nb is None:
                                raise CDTError(f"point {i} could not be inserted")
                            grow = nb
                        boundary.append((u, v))
            if grow is None:
                break
            bad.add(grow)
        for t in bad:
            tri.remove(t)
        for u, v in boundary:
            tri.add(u, v, i)


def _side(p, u, v, q) -> float:
    # evaluate each undirected edge in one fixed order so the two triangles
    # sharing it get exactly opposite signs, even for points on the edge
    return orient2(p[u], p[v], q) if u < v else -orient2(p[v], p[u], q)


def _contains(p, t, q) -> bool:
    a, b, c = t
    return _side(p, a, b, q) >= 0 and _side(p, b, c, q) >= 0 and _side(p, c, a, q) >= 0


def _crosses(p, u, v, a, b) -> bool:
    """Proper crossing of segment ab with edge uv (shared endpoints excluded)."""
    if len({u, v, a, b}) < 4:
        return False
    d1 = orient2(p[a], p[b], p[u])
    d2 = orient2(p[a], p[b], p[v])
    d3 = orient2(p[u], p[v], p[a])
    d4 = orient2(p[u], p[v], p[b])
    return d1 * d2 < 0 and d3 * d4 < 0


def _recover_constraint(tri: _Tri, a: int, b: int) -> list:
    p = tri.p
    if tri.has_edge(a, b):
        return []
    for w in range(len(p)):
        if w != a and w != b and _on_open_segment(p[a], p[b], p[w]):
            raise CDTError(f"constraint {a}-{b} passes through point {w}")
    crossing = deque(
        (u, v) for (u, v) in tri.edge if u < v and _crosses(p, u, v, a, b)
    )
    new_edges = []
    guard = 0
    limit = 50 * (len(crossing) + 1) ** 2 + 100
    while crossing:
        guard += 1
        if guard > limit:
            raise CDTError(f"constraint {a}-{b} could not be recovered")
        u, v = crossing.popleft()
        c = tri.opposite(u, v)
        d = tri.opposite(v, u)
        if c is None or d is None:
            raise CDTError(f"constraint {a}-{b} leaves the triangulation")
        # quad u, d, v, c must be strictly convex to flip
        if not (orient2(p[c], p[d], p[u]) * orient2(p[c], p[d], p[v]) < 0):
            crossing.append((u, v))
            continue
        if orient2(p[u], p[d], p[c]) == 0.0 or orient2(p[v], p[c], p[d]) == 0.0:
            crossing.append((u, v))
            continue
        tri.flip(u, v)
        e = (min(c, d), max(c, d))
        if _crosses(p, e[0], e[1], a, b):
            crossing.append(e)
        else:
            new_edges.append(e)
    return new_edges


def _on_open_segment(a, b, w, tol: float = 1e-12) -> bool:
    scale = max(abs(b[0] - a[0]), abs(b[1] - a[1]), 1e-300)
    if abs(orient2(a, b, w)) > tol * scale * scale:
        return False
    t = ((w[0] - a[0]) * (b[0] - a[0]) + (w[1] - a[1]) * (b[1] - a[1])) / (
        (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2)
    return 1e-12 < t < 1 - 1e-12


def _lawson(tri: _Tri, fixed: set, real: int) -> None:
    p = tri.p
    stack = [e for e in tri.edge if e[0] < e[1]]
    guard = 0
    while stack:
        guard += 1
        if guard > 100000:
            raise CDTError("Delaunay flipping did not converge")
        u, v = stack.pop()
        if (min(u, v), max(u, v)) in fixed or (u, v) not in tri.edge or (v, u) not in tri.edge:
            continue
        c = tri.opposite(u, v)
        d = tri.opposite(v, u)
        if c is None or d is None or max(u, v, c, d) >= real:
            continue
        # triangle (u, v, c) is counter-clockwise
        if _incircle(p[u], p[v], p[c], p[d]) > 1e-12 * _scale4(p, u, v, c, d):
            if orient2(p[c], p[d], p[u]) * orient2(p[c], p[d], p[v]) >= 0:
                continue
            tri.flip(u, v)
            stack += [(u, c), (c, v), (v, d), (d, u)]


def _scale4(p, *ids) -> float:
    xs = [p[i][0] for i in ids]
    ys = [p[i][1] for i in ids]
    s = max(max(xs) - min(xs), max(ys) - min(ys))
    return s ** 4


def cdt(points2, constraints, keep: str = "parity") -> ConstrainedTriangulation2:
    """Constrained Delaunay triangulation of ``points2``.

    ``constraints`` are index pairs. With ``keep="parity"`` only triangles
    inside the region bounded by the constraints are returned (even-odd
    rule); with ``keep="hull"`` every triangle of the convex hull is kept.
    Returned triangles are counter-clockwise.
    """
    pts = np.asarray(points2, dtype=float).reshape(-1, 2)
    n = len(pts)
    cons = [(int(a), int(b)) for a, b in constraints]
    for a, b in cons:
        if a == b or not (0 <= a < n and 0 <= b < n):
            raise CDTError(f"bad constraint {a}-{b}")
    if keep == "parity":
        _check_simple(pts, cons)
    if n < 3:
        return ConstrainedTriangulation2(pts, cons, [])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
    mid = (lo + hi) / 2.0
    big = 1e3 * span
    plist = [tuple(q) for q in pts.tolist()]
    plist += [(mid[0] - 2 * big, mid[1] - big), (mid[0] + 2 * big, mid[1] - big), (mid[0], mid[1] + 2 * big)]
    tri = _Tri(plist)
    tri.add(n, n + 1, n + 2)
    _bowyer_watson(tri, range(n), n)
    fixed = set()
    for a, b in cons:
        _recover_constraint(tri, a, b)
        fixed.add((min(a, b), max(a, b)))
    _lawson(tri, fixed, n)
    if keep == "parity":
        tris = _parity_inside(tri, fixed, n)
    elif keep == "hull":
        tris = [t for t in tri.tris if max(t) < n]
    else:
        raise ValueError(f"unknown keep mode {keep!r}")
    return ConstrainedTriangulation2(pts, cons, sorted(tris))


def _parity_inside(tri: _Tri, fixed: set, n: int) -> list:
    start = next(t for t in tri.tris if max(t) >= n)
    depth = {start: 0}
    queue = deque([start])
    while queue:
        t = queue.popleft()
        a, b, c = t
        for u, v in ((a, b), (b, c), (c, a)):
            nb = tri.edge.get((v, u))
            if nb is None or nb in depth:
                continue
            depth[nb] = depth[t] + (1 if (min(u, v), max(u, v)) in fixed else 0)
            queue.append(nb)
    return [t for t, d in depth.items() if d % 2 == 1 and max(t) < n]


def _check_simple(pts: np.ndarray, cons: list) -> None:
    """Raise ProjectionFoldError if constraint segments touch other than at shared ends."""
    if len({tuple(q) for q in pts.tolist()}) < len(pts):
        raise ProjectionFoldError("coincident projected points")
    m = len(cons)
    for i in range(m):
        a, b = cons[i]
        for j in range(i + 1, m):
            c, d = cons[j]
            shared = {a, b} & {c, d}
            if len(shared) == 2:
                raise ProjectionFoldError(f"repeated constraint {a}-{b}")
            if shared:
                # adjacent segments may only meet at the shared vertex
                s = shared.pop()
                x = b if a == s else a
                y = d if c == s else c
                if abs(orient2(pts[s], pts[x], pts[y])) <= 1e-14 * _span2(pts, s, x, y) and \
                        np.dot(pts[x] - pts[s], pts[y] - pts[s]) > 0:
                    raise ProjectionFoldError(f"constraints {a}-{b} and {c}-{d} overlap")
                continue
            if segments_cross2(pts[a], pts[b], pts[c], pts[d]):
                raise ProjectionFoldError(f"constraints {a}-{b} and {c}-{d} cross")


def _span2(pts, *ids) -> float:
    q = pts[list(ids)]
    s = float(np.max(q.max(axis=0) - q.min(axis=0)))
    return s * s
