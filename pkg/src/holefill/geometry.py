"""Plane fitting, projection and small-polygon geometry used by all phases."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


class DegenerateGeometryError(ValueError):
    """Raised when points do not span a plane (collinear or coincident)."""


@dataclass(frozen=True)
class Plane:
    normal: np.ndarray  # unit length
    offset: float  # signed distance of the plane from the origin along normal
    u: np.ndarray  # in-plane basis, u x v == normal
    v: np.ndarray

    @property
    def origin(self) -> np.ndarray:
        return self.normal * self.offset

    def signed_distance(self, p) -> float:
        return float(np.dot(self.normal, p) - self.offset)


def plane_basis(normal) -> tuple[np.ndarray, np.ndarray]:
    n = np.asarray(normal, dtype=float)
    # cross with the axis least aligned with n
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(n)))] = 1.0
    u = np.cross(n, axis)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v


def make_plane(normal, point) -> Plane:
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    u, v = plane_basis(n)
    return Plane(n, float(np.dot(n, point)), u, v)


def triangle_plane(a, b, c, area_eps: float = 1e-12) -> Plane:
    """Supporting plane of a triangle, normal following its winding."""
    a, b, c = (np.asarray(p, dtype=float) for p in (a, b, c))
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    if norm / 2.0 <= area_eps:
        raise DegenerateGeometryError("triangle has no supporting plane")
    return make_plane(n / norm, a)


def _first_noncollinear_cross(pts: np.ndarray, tol: float) -> np.ndarray | None:
    n = len(pts)
    for i, j, k in itertools.combinations(range(n), 3):
        c = np.cross(pts[j] - pts[i], pts[k] - pts[i])
        if np.linalg.norm(c) > tol:
            return c
    return None


def fit_plane(points) -> Plane:
    """Orthogonal least-squares plane through ``points``.

    The normal is the eigenvector of the smallest eigenvalue of the centered
    covariance. Its sign makes the first non-collinear triple of the input
    counter-clockwise in the (u, v) projection.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
        raise DegenerateGeometryError("need at least 3 points to fit a plane")
    centroid = pts.mean(axis=0)
    x = pts - centroid
    scale = float(np.max(np.abs(x))) if len(x) else 0.0
    if scale == 0.0:
        raise DegenerateGeometryError("points are coincident")
    evals, evecs = np.linalg.eigh(x.T @ x)
    # largest distance from the principal line; eigenvalues alone are too noisy for this
    axis = evecs[:, 2]
    off_line = x - np.outer(x @ axis, axis)
    if float(np.max(np.linalg.norm(off_line, axis=1))) <= 1e-12 * max(scale, 1.0):
        raise DegenerateGeometryError("points are collinear")
    normal = evecs[:, 0]
    if evals[1] - evals[0] <= 1e-12 * evals[2]:
        # smallest eigenvalue is not unique: lexicographically smallest candidate
        cands = [evecs[:, 0], evecs[:, 1]]
        cands = [c if tuple(c) >= tuple(-c) else -c for c in cands]
        normal = min(cands, key=tuple)
    ref = _first_noncollinear_cross(pts, 1e-12 * scale * scale)
    if ref is not None and np.dot(normal, ref) < 0:
        normal = -normal
    normal = normal / np.linalg.norm(normal)
    return make_plane(normal, centroid)


def plane_residual(plane: Plane, points) -> float:
    """Sum of squared orthogonal distances."""
    pts = np.asarray(points, dtype=float)
    d = pts @ plane.normal - plane.offset
    return float(np.dot(d, d))


def point_plane_distance(p, plane: Plane) -> float:
    return abs(float(np.dot(plane.normal, p)) - plane.offset)


def project_to_plane(p, plane: Plane) -> np.ndarray:
    """Orthogonal projection of ``p`` expressed in the plane's (u, v) basis.

    Accepts a single point or an (n, 3) array.
    """
    q = np.asarray(p, dtype=float) - plane.origin
    return np.stack([q @ plane.u, q @ plane.v], axis=-1)


def lift_from_plane(uv, plane: Plane) -> np.ndarray:
    uv = np.asarray(uv, dtype=float)
    return plane.origin + uv[..., :1] * plane.u + uv[..., 1:2] * plane.v


def triangle_area(a, b, c) -> float:
    a = np.asarray(a, dtype=float)
    return 0.5 * float(np.linalg.norm(np.cross(np.asarray(b) - a, np.asarray(c) - a)))


def signed_area2(poly) -> float:
    """Signed area of a 2D polygon (positive when counter-clockwise)."""
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def orient2(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def clip_convex(subject: list, clip_ccw: list) -> list:
    """Sutherland-Hodgman clip of ``subject`` by a counter-clockwise convex polygon."""
    out = list(subject)
    n = len(clip_ccw)
    for i in range(n):
        if not out:
            break
        a, b = clip_ccw[i], clip_ccw[(i + 1) % n]
        inp, out = out, []
        s = inp[-1]
        s_in = orient2(a, b, s) >= 0.0
        for e in inp:
            e_in = orient2(a, b, e) >= 0.0
            if e_in:
                if not s_in:
                    out.append(_line_cross(a, b, s, e))
                out.append(e)
            elif s_in:
                out.append(_line_cross(a, b, s, e))
            s, s_in = e, e_in
    return out


def _line_cross(a, b, s, e):
    ds = orient2(a, b, s)
    de = orient2(a, b, e)
    t = ds / (ds - de)
    return (s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1]))


def triangle_overlap_area(a, b) -> float:
    """Area of the intersection of two 2D triangles; 0 if either is degenerate."""
    ta = [tuple(map(float, p)) for p in a]
    tb = [tuple(map(float, p)) for p in b]
    sa = signed_area2(ta)
    sb = signed_area2(tb)
    if sa == 0.0 or sb == 0.0:
        return 0.0
    if sa < 0:
        ta = ta[::-1]
    if sb < 0:
        tb = tb[::-1]
    poly = clip_convex(ta, tb)
    if len(poly) < 3:
        return 0.0
    return max(0.0, signed_area2(poly))


def segments_cross2(p1, p2, q1, q2, tol: float = 0.0) -> bool:
    """True when closed segments p1p2 and q1q2 share any point."""
    d1 = orient2(q1, q2, p1)
    d2 = orient2(q1, q2, p2)
    d3 = orient2(p1, p2, q1)
    d4 = orient2(p1, p2, q2)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and \
            ((d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)):
        return True

    def on_seg(a, b, p, d):
        if abs(d) > tol:
            return False
        return (min(a[0], b[0]) - 1e-15 <= p[0] <= max(a[0], b[0]) + 1e-15 and
                min(a[1], b[1]) - 1e-15 <= p[1] <= max(a[1], b[1]) + 1e-15)

    return (on_seg(q1, q2, p1, d1) or on_seg(q1, q2, p2, d2) or
            on_seg(p1, p2, q1, d3) or on_seg(p1, p2, q2, d4))


def triangle_intersection_segment(t1, t2, eps: float = 1e-9):
    """Segment where two non-coplanar 3D triangles cross, or None.

    Returns ``(p, q)`` endpoints. Coplanar or parallel pairs return None;
    overlap of coplanar faces is not a crossing.
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    n1 = np.cross(t1[1] - t1[0], t1[2] - t1[0])
    n2 = np.cross(t2[1] - t2[0], t2[2] - t2[0])
    l1, l2 = np.linalg.norm(n1), np.linalg.norm(n2)
    if l1 == 0.0 or l2 == 0.0:
        return None
    n1 /= l1
    n2 /= l2
    d2 = (t2 - t1[0]) @ n1
    d1 = (t1 - t2[0]) @ n2
    d2 = np.where(np.abs(d2) <= eps, 0.0, d2)
    d1 = np.where(np.abs(d1) <= eps, 0.0, d1)
    if np.all(d2 > 0) or np.all(d2 < 0) or np.all(d1 > 0) or np.all(d1 < 0):
        return None
    direction = np.cross(n1, n2)
    dl = np.linalg.norm(direction)
    if dl <= 1e-12:
        return None
    direction /= dl
    s1 = _plane_cut(t1, d1)
    s2 = _plane_cut(t2, d2)
    if s1 is None or s2 is None:
        return None
    a = sorted(float(np.dot(direction, p)) for p in s1)
    b = sorted(float(np.dot(direction, p)) for p in s2)
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    if lo > hi:
        return None
    base = s1[0] - np.dot(direction, s1[0]) * direction
    # snap endpoints onto both supporting planes' common line
    return base + lo * direction, base + hi * direction


def _plane_cut(tri: np.ndarray, d: np.ndarray):
    """Points of ``tri`` lying on the other plane, given signed distances ``d``."""
    pts = []
    for i in range(3):
        j = (i + 1) % 3
        if d[i] == 0.0:
            pts.append(tri[i])
        if (d[i] > 0 and d[j] < 0) or (d[i] < 0 and d[j] > 0):
            t = d[i] / (d[i] - d[j])
            pts.append(tri[i] + t * (tri[j] - tri[i]))
    if not pts:
        return None
    if len(pts) == 1:
        return pts[0], pts[0]
    # farthest pair, robust to repeated points
    best = max(itertools.combinations(pts, 2), key=lambda pq: float(np.linalg.norm(pq[0] - pq[1])))
    return best
