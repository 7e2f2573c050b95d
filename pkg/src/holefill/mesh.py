"""Indexed half-edge triangle mesh that tolerates non-manifold input.

Faces are the source of truth; the half-edge records are rebuilt from them
by :meth:`SurfaceMesh.rebuild` after every topological edit. Face ``f`` owns
half-edges ``3f, 3f+1, 3f+2``; border half-edges are appended after those.

Edges with more than two incident faces (or two faces of the same winding)
cannot be expressed with plain twins. Half-edges on such an edge are paired
greedily with an opposite-direction partner in face order; whatever is left
gets ``twin == NONMANIFOLD`` and no border partner.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from enum import Enum

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)

BORDER = -1  # face id of a border half-edge
NONMANIFOLD = -2  # twin id of an unpaired half-edge on a non-manifold edge
NONE = -1  # missing next/prev on a broken border chain


class ObjParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class OverlapClass(str, Enum):
    NONE = "none"
    DEGENERATE = "degenerate"
    SAME_ENDPOINTS = "same-endpoints"
    COLLINEAR_DISTINCT = "collinear-distinct"


def edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


class SurfaceMesh:
    def __init__(self, vertices=None, faces=None):
        v = np.zeros((0, 3)) if vertices is None else np.asarray(vertices, dtype=float)
        self.vertices = v.reshape(-1, 3).copy()
        self.faces: list[tuple[int, int, int]] = [tuple(int(i) for i in f) for f in (faces or [])]
        # defect marks, filled by preprocess
        self.dup_group: np.ndarray | None = None  # vertex id -> lowest id of its duplicate group
        self.edge_marks: dict[tuple[int, int], OverlapClass] = {}
        self.overlap_partners: dict[tuple[int, int], set] = {}
        self.rebuild()

    # -- construction -------------------------------------------------------

    def copy(self) -> "SurfaceMesh":
        m = SurfaceMesh(self.vertices, self.faces)
        if self.dup_group is not None:
            m.dup_group = self.dup_group.copy()
        m.edge_marks = dict(self.edge_marks)
        m.overlap_partners = {k: set(v) for k, v in self.overlap_partners.items()}
        return m

    def add_vertex(self, p) -> int:
        self.vertices = np.vstack([self.vertices, np.asarray(p, dtype=float).reshape(1, 3)])
        if self.dup_group is not None:
            self.dup_group = np.append(self.dup_group, len(self.vertices) - 1)
        return len(self.vertices) - 1

    def rebuild(self) -> None:
        nv = len(self.vertices)
        for f in self.faces:
            if len(f) != 3 or len(set(f)) != 3:
                raise ValueError(f"invalid triangle {f}")
            if min(f) < 0 or max(f) >= nv:
                raise ValueError(f"face {f} references a vertex out of range")
        nf = len(self.faces)
        origin, target, face = [], [], []
        for fi, (a, b, c) in enumerate(self.faces):
            origin += [a, b, c]
            target += [b, c, a]
            face += [fi, fi, fi]
        n = 3 * nf
        twin = [None] * n
        nxt = [3 * (h // 3) + (h % 3 + 1) % 3 for h in range(n)]
        prv = [3 * (h // 3) + (h % 3 + 2) % 3 for h in range(n)]

        by_edge: dict[tuple[int, int], list[int]] = defaultdict(list)
        for h in range(n):
            by_edge[edge_key(origin[h], target[h])].append(h)
        nonmanifold_edges = set()
        for key, hs in by_edge.items():
            for i, h in enumerate(hs):
                if twin[h] is not None:
                    continue
                for g in hs[i + 1:]:
                    if twin[g] is None and origin[g] == target[h] and target[g] == origin[h]:
                        twin[h], twin[g] = g, h
                        break
            if len(hs) > 1:
                for h in hs:
                    if twin[h] is None:
                        twin[h] = NONMANIFOLD
                        nonmanifold_edges.add(key)
            if len(hs) > 2:
                nonmanifold_edges.add(key)

        # border partners for lone half-edges
        for h in range(n):
            if twin[h] is None:
                b = len(origin)
                origin.append(target[h])
                target.append(origin[h])
                face.append(BORDER)
                twin.append(h)
                nxt.append(NONE)
                prv.append(NONE)
                twin[h] = b

        self.he_origin = origin
        self.he_target = target
        self.he_face = face
        self.he_twin = twin
        self.he_next = nxt
        self.he_prev = prv
        self.nonmanifold_edges = nonmanifold_edges
        self._link_borders(n)

        self.vertex_faces: list[list[int]] = [[] for _ in range(nv)]
        for fi, f in enumerate(self.faces):
            for v in f:
                self.vertex_faces[v].append(fi)

    def _link_borders(self, first_border: int) -> None:
        borders = range(first_border, len(self.he_origin))
        out_of: dict[int, list[int]] = defaultdict(list)
        for b in borders:
            out_of[self.he_origin[b]].append(b)
        claimed = set()
        unresolved = []
        limit = len(self.he_origin) + 1
        for b in borders:
            u = self.he_target[b]
            g = self.he_twin[b]  # face half-edge u -> v
            found = None
            for _ in range(limit):
                t = self.he_twin[self.he_prev[g]]
                if t == NONMANIFOLD:
                    break
                if self.he_face[t] == BORDER:
                    found = t
                    break
                g = t
            if found is None or found in claimed:
                unresolved.append(b)
            else:
                self.he_next[b] = found
                claimed.add(found)
        for b in unresolved:
            u = self.he_target[b]
            cands = [c for c in out_of[u] if c not in claimed and c != b]
            if cands:
                self.he_next[b] = cands[0]
                claimed.add(cands[0])
        for b in borders:
            if self.he_next[b] != NONE:
                self.he_prev[self.he_next[b]] = b

    # -- queries ------------------------------------------------------------

    @property
    def n_halfedges(self) -> int:
        return len(self.he_origin)

    def is_border(self, h: int) -> bool:
        return self.he_face[h] == BORDER

    def border_halfedges(self) -> list[int]:
        return [h for h in range(3 * len(self.faces), self.n_halfedges)]

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as sorted vertex pairs, in first-appearance order."""
        seen = {}
        for a, b, c in self.faces:
            for e in (edge_key(a, b), edge_key(b, c), edge_key(c, a)):
                seen.setdefault(e, None)
        return list(seen)

    def referenced_vertices(self) -> np.ndarray:
        if not self.faces:
            return np.zeros(0, dtype=int)
        return np.unique(np.asarray(self.faces, dtype=int).ravel())

    def group(self, v: int) -> int:
        return int(self.dup_group[v]) if self.dup_group is not None else v

    def group_members(self, v: int) -> list[int]:
        if self.dup_group is None:
            return [v]
        g = self.dup_group[v]
        return [int(i) for i in np.flatnonzero(self.dup_group == g)]

    def face_points(self, f: int) -> np.ndarray:
        return self.vertices[list(self.faces[f])]

    def face_area(self, f: int) -> float:
        p = self.face_points(f)
        return 0.5 * float(np.linalg.norm(np.cross(p[1] - p[0], p[2] - p[0])))

    def check_invariants(self) -> None:
        nf = len(self.faces)
        for h in range(self.n_halfedges):
            t = self.he_twin[h]
            if t >= 0:
                assert self.he_twin[t] == h, f"twin({h}) not symmetric"
                assert self.he_origin[t] == self.he_target[h]
            if h < 3 * nf:
                assert self.he_face[h] == h // 3
                assert self.he_next[self.he_next[self.he_next[h]]] == h
            else:
                assert self.he_face[h] == BORDER and t >= 0
            if self.he_next[h] != NONE:
                assert self.he_prev[self.he_next[h]] == h
            if self.he_prev[h] != NONE:
                assert self.he_next[self.he_prev[h]] == h
            assert 0 <= self.he_origin[h] < len(self.vertices)


def euler_and_borders(mesh: SurfaceMesh) -> tuple[int, int, int]:
    """(V - E + F, border half-edge count, connected components).

    V counts only vertices referenced by a face, so vertices orphaned by
    welding do not distort the characteristic.
    """
    used = mesh.referenced_vertices()
    edges = mesh.edges()
    chi = len(used) - len(edges) + len(mesh.faces)
    n_border = mesh.n_halfedges - 3 * len(mesh.faces)
    if len(used) == 0:
        return chi, n_border, 0
    e = np.asarray(edges, dtype=int)
    nv = len(mesh.vertices)
    graph = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(nv, nv))
    _, labels = connected_components(graph, directed=False)
    return chi, n_border, len(np.unique(labels[used]))


def face_components(mesh: SurfaceMesh) -> np.ndarray:
    """Component label per face, faces connected through shared vertices."""
    nv = len(mesh.vertices)
    if not mesh.faces:
        return np.zeros(0, dtype=int)
    e = np.asarray(mesh.edges(), dtype=int)
    graph = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(nv, nv))
    _, labels = connected_components(graph, directed=False)
    return labels[np.asarray([f[0] for f in mesh.faces])]


# -- OBJ --------------------------------------------------------------------

def _obj_index(tok: str, nv: int, lineno: int) -> int:
    head = tok.split("/")[0]
    try:
        i = int(head)
    except ValueError:
        raise ObjParseError(lineno, f"bad face index {tok!r}") from None
    if i > 0:
        idx = i - 1
    elif i < 0:
        idx = nv + i
    else:
        raise ObjParseError(lineno, "face index 0 is invalid")
    if not 0 <= idx < nv:
        raise ObjParseError(lineno, f"face index {i} out of range ({nv} vertices)")
    return idx


def load_obj(data: bytes | str) -> SurfaceMesh:
    """Parse Wavefront OBJ; n-gons are fan-triangulated from their first vertex."""
    text = data.decode("utf-8", errors="replace") if isinstance(data, bytes) else data
    verts: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ObjParseError(lineno, "vertex needs 3 coordinates")
            try:
                xyz = tuple(float(t) for t in parts[1:4])
            except ValueError:
                raise ObjParseError(lineno, "non-numeric vertex coordinate") from None
            if not all(np.isfinite(xyz)):
                raise ObjParseError(lineno, "non-finite vertex coordinate")
            verts.append(xyz)
        elif tag == "f":
            if len(parts) < 4:
                raise ObjParseError(lineno, "face needs at least 3 vertices")
            idx = [_obj_index(t, len(verts), lineno) for t in parts[1:]]
            for k in range(1, len(idx) - 1):
                tri = (idx[0], idx[k], idx[k + 1])
                if len(set(tri)) < 3:
                    log.warning("line %d: dropping triangle with repeated vertex %s", lineno, tri)
                    continue
                faces.append(tri)
    return SurfaceMesh(np.asarray(verts, dtype=float).reshape(-1, 3), faces)


def save_obj(mesh: SurfaceMesh) -> bytes:
    out = [f"v {x:.9g} {y:.9g} {z:.9g}\n" for x, y, z in mesh.vertices.tolist()]
    out += [f"f {a + 1} {b + 1} {c + 1}\n" for a, b, c in mesh.faces]
    return "".join(out).encode("ascii")


def read_obj(path) -> SurfaceMesh:
    with open(path, "rb") as fh:
        return load_obj(fh.read())


def write_obj(mesh: SurfaceMesh, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_obj(mesh))


def component_euler(mesh: SurfaceMesh) -> list[int]:
    """Euler characteristic of each face component, ordered by lowest face id."""
    if not mesh.faces:
        return []
    labels = face_components(mesh)
    out = []
    for lab in dict.fromkeys(labels.tolist()):
        faces = [f for f, l in zip(mesh.faces, labels.tolist()) if l == lab]
        verts = {v for f in faces for v in f}
        edges = {edge_key(a, b) for f in faces for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0]))}
        out.append(len(verts) - len(edges) + len(faces))
    return out
