"""Deterministic defect fixtures for building-like meshes.

A recipe names a base solid and a list of defects; :func:`generate` returns
the broken mesh plus ground truth describing what a correct repair should
find. Recipes have a line-oriented text form::

    name box-roof-hole
    base box size=4,3,2.5 subdiv=3
    seed 7
    remove-quads top 1 1
    duplicate-seam-quads -y 0 0 1 0

Vertex arguments accept a plain id or, on boxes, a lattice point ``@ix,iy,iz``.
"""

from __future__ import annotations

import shlex
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .mesh import SurfaceMesh, edge_key

DUP_EPS = 1e-3  # duplicate radius the fixtures are designed around
SEAM_JITTER = 0.3 * DUP_EPS
SLIVER_OFFSET = 0.4 * DUP_EPS

BASES = ("box", "gabled-house", "torus", "two-component")
SIDES = ("bottom", "top", "-y", "+y", "-x", "+x")


class RecipeError(ValueError):
    pass


@dataclass(frozen=True)
class Defect:
    kind: str
    args: tuple = ()


@dataclass
class DefectRecipe:
    name: str
    base: str
    params: dict = field(default_factory=dict)
    defects: list[Defect] = field(default_factory=list)
    seed: int = 0

    def to_text(self) -> str:
        lines = [f"name {self.name}"]
        base = [self.base] + [f"{k}={_fmt_param(v)}" for k, v in self.params.items()]
        lines.append("base " + " ".join(base))
        lines.append(f"seed {self.seed}")
        lines += [" ".join([d.kind, *map(str, d.args)]) for d in self.defects]
        return "\n".join(lines) + "\n"


@dataclass
class GroundTruth:
    true_holes: list[list[tuple]] = field(default_factory=list)  # ring vertex coordinates
    pseudo_holes: list[str] = field(default_factory=list)  # injected pseudo defects
    genus: bool = False  # filling may close a tunnel of the base shape
    split_component: bool = False  # ring spans components; expected unfillable
    sphere: bool = True  # every component should end watertight with euler 2
    expected_exit: int = 0

    @property
    def limitation(self) -> bool:
        return self.genus or self.split_component


def _fmt_param(v) -> str:
    if isinstance(v, (tuple, list)):
        return ",".join(f"{x:g}" for x in v)
    return f"{v:g}" if isinstance(v, float) else str(v)


def parse_recipe(text: str) -> DefectRecipe:
    name, base, params, defects, seed = None, None, {}, [], 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = shlex.split(line)
        head, rest = tok[0], tok[1:]
        if head == "name":
            name = " ".join(rest)
        elif head == "base":
            if not rest or rest[0] not in BASES:
                raise RecipeError(f"line {lineno}: unknown base {rest[:1]}")
            base = rest[0]
            for kv in rest[1:]:
                k, _, v = kv.partition("=")
                params[k] = _parse_value(v)
        elif head == "seed":
            seed = int(rest[0])
        else:
            defects.append(Defect(head, tuple(rest)))
    if base is None:
        raise RecipeError("recipe has no base line")
    return DefectRecipe(name or base, base, params, defects, seed)


def _parse_value(v: str):
    if "," in v:
        return tuple(float(x) for x in v.split(","))
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


# -- base shapes -------------------------------------------------------------------

class _Builder:
    def __init__(self):
        self.vertices: list = []
        self.faces: list = []
        self.lattice: dict = {}

    def vertex(self, p, key=None) -> int:
        if key is not None and key in self.lattice:
            return self.lattice[key]
        self.vertices.append(np.asarray(p, dtype=float))
        i = len(self.vertices) - 1
        if key is not None:
            self.lattice[key] = i
        return i


def _orient_outward(verts, faces, center):
    out = []
    for f in faces:
        a, b, c = (verts[i] for i in f)
        n = np.cross(b - a, c - a)
        out.append(f if np.dot(n, (a + b + c) / 3 - center) >= 0 else (f[0], f[2], f[1]))
    return out


_SIDE_AXES = {  # fixed axis, fixed lattice value (0 or n), axis for i, axis for j
    "bottom": (2, 0, 0, 1), "top": (2, 1, 0, 1),
    "-y": (1, 0, 0, 2), "+y": (1, 1, 0, 2),
    "-x": (0, 0, 1, 2), "+x": (0, 1, 1, 2),
}


def _box(b: _Builder, size=(1.0, 1.0, 1.0), subdiv=1, origin=(0.0, 0.0, 0.0)):
    n = int(subdiv)
    size = np.asarray(size, dtype=float)
    origin = np.asarray(origin, dtype=float)
    tag = len(b.vertices)
    first_face = len(b.faces)
    for side in SIDES:
        ax, at, ai, aj = _SIDE_AXES[side]
        for i in range(n):
            for j in range(n):
                ids = []
                for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                    lat = [0, 0, 0]
                    lat[ax], lat[ai], lat[aj] = at * n, i + di, j + dj
                    ids.append(b.vertex(origin + size * np.asarray(lat) / n, key=(tag, *lat)))
                b.faces += [(ids[0], ids[1], ids[2]), (ids[0], ids[2], ids[3])]
    center = origin + size / 2
    b.faces[first_face:] = _orient_outward(b.vertices, b.faces[first_face:], center)


def _gabled_house(b: _Builder, size=(6.0, 8.0), wall=3.0, ridge=2.0):
    sx, sy = size
    pts = [(0, 0, 0), (sx, 0, 0), (sx, sy, 0), (0, sy, 0),
           (0, 0, wall), (sx, 0, wall), (sx, sy, wall), (0, sy, wall),
           (sx / 2, 0, wall + ridge), (sx / 2, sy, wall + ridge)]
    b0, b1, b2, b3, e0, e1, e2, e3, r0, r1 = (b.vertex(p) for p in pts)
    faces = [
        (b0, b1, b2), (b0, b2, b3),  # ground
        (b0, b1, e1), (b0, e1, r0), (b0, r0, e0),  # front gable
        (b3, b2, e2), (b3, e2, r1), (b3, r1, e3),  # back gable
        (b0, b3, e3), (b0, e3, e0),  # west eave wall
        (b1, b2, e2), (b1, e2, e1),  # east eave wall
        (e0, r0, r1), (e0, r1, e3),  # west roof
        (e1, e2, r1), (e1, r1, r0),  # east roof
    ]
    center = np.array([sx / 2, sy / 2, (wall + ridge) / 3])
    b.faces += _orient_outward(b.vertices, faces, center)


def _torus(b: _Builder, R=3.0, r=1.0, nu=16, nv=8):
    nu, nv = int(nu), int(nv)
    ids = {}
    for i in range(nu):
        for j in range(nv):
            u, v = 2 * np.pi * i / nu, 2 * np.pi * j / nv
            ids[i, j] = b.vertex(((R + r * np.cos(v)) * np.cos(u),
                                  (R + r * np.cos(v)) * np.sin(u), r * np.sin(v)))
    for i in range(nu):
        for j in range(nv):
            a, c = ids[i, j], ids[(i + 1) % nu, (j + 1) % nv]
            bb, d = ids[(i + 1) % nu, j], ids[i, (j + 1) % nv]
            u = 2 * np.pi * (i + 0.5) / nu
            tube = np.array([R * np.cos(u), R * np.sin(u), 0.0])
            b.faces += _orient_outward(b.vertices, [(a, bb, c), (a, c, d)], tube)


def _split_frame(b: _Builder, gap=0.02):
    """Flat square frame cut into two C-shaped halves separated by ``gap``."""
    h = 1.5 - gap / 2
    xs = (0.0, 1.0, h)
    ys = (0.0, 1.0, 2.0, 3.0)
    cells = [(0, 0), (1, 0), (0, 1), (0, 2), (1, 2)]  # (column, row) of a C
    for mirror in (False, True):
        key = ("frame", mirror)
        for ci, ri in cells:
            quad = []
            for dx, dy in ((0, 0), (1, 0), (1, 1), (0, 1)):
                x, y = xs[ci + dx], ys[ri + dy]
                if mirror:
                    x = 3.0 - x
                quad.append(b.vertex((x, y, 0.0), key=(key, ci + dx, ri + dy)))
            tris = [(quad[0], quad[1], quad[2]), (quad[0], quad[2], quad[3])]
            if mirror:
                tris = [(t[0], t[2], t[1]) for t in tris]
            b.faces += tris


def _build_base(recipe: DefectRecipe) -> tuple[_Builder, dict]:
    b = _Builder()
    p = dict(recipe.params)
    info = {"subdiv": int(p.get("subdiv", 1)), "box_tag": 0}
    if recipe.base == "box":
        _box(b, p.get("size", (1.0, 1.0, 1.0)), info["subdiv"])
    elif recipe.base == "gabled-house":
        _gabled_house(b, p.get("size", (6.0, 8.0)), p.get("wall", 3.0), p.get("ridge", 2.0))
    elif recipe.base == "torus":
        info["nv"] = int(p.get("nv", 8))
        _torus(b, p.get("R", 3.0), p.get("r", 1.0), p.get("nu", 16), info["nv"])
    elif recipe.base == "two-component":
        layout = p.get("layout", "apart")
        if layout == "apart":
            _box(b, (1.0, 1.0, 1.0), info["subdiv"])
            _box(b, (1.0, 1.0, 1.0), info["subdiv"], origin=(3.0, 0.0, 0.0))
        elif layout == "split":
            _split_frame(b, p.get("gap", 0.02))
        else:
            raise RecipeError(f"unknown two-component layout {layout!r}")
    else:
        raise RecipeError(f"unknown base {recipe.base!r}")
    return b, info


# -- defects -------------------------------------------------------------------

def _quad_faces(recipe, info, args) -> list[int]:
    if recipe.base not in ("box", "two-component"):
        raise RecipeError("quad addressing needs a box base")
    n = info["subdiv"]
    side = args[0]
    if side not in SIDES:
        raise RecipeError(f"unknown side {side!r}")
    nums = [int(a) for a in args[1:]]
    if len(nums) == 2:
        nums = nums * 2
    if len(nums) != 4:
        raise RecipeError("quad range needs i j or i0 j0 i1 j1")
    i0, j0, i1, j1 = nums
    if not (0 <= i0 <= i1 < n and 0 <= j0 <= j1 < n):
        raise RecipeError(f"quad range {nums} outside a {n}x{n} side")
    s = SIDES.index(side)
    return [2 * (s * n * n + i * n + j) + k
            for i in range(i0, i1 + 1) for j in range(j0, j1 + 1) for k in (0, 1)]


def _vertex_arg(b: _Builder, tok: str) -> int:
    if tok.startswith("@"):
        lat = tuple(int(x) for x in tok[1:].split(","))
        key = (0, *lat)
        if key not in b.lattice:
            raise RecipeError(f"lattice point {tok} is not a surface vertex")
        return b.lattice[key]
    v = int(tok)
    if not 0 <= v < len(b.vertices):
        raise RecipeError(f"vertex {v} out of range")
    return v


def _face_ids(recipe, info, d: Defect, nf: int) -> list[int]:
    if d.kind.endswith("-quads"):
        ids = _quad_faces(recipe, info, d.args)
    else:
        ids = [int(a) for a in d.args]
    for f in ids:
        if not 0 <= f < nf:
            raise RecipeError(f"{d.kind}: face {f} out of range")
    return ids


def _faces_with_edge(faces, u, v) -> list[int]:
    return [i for i, f in enumerate(faces) if f is not None and u in f and v in f]


def _coords(b: _Builder, ids) -> list[tuple]:
    return [tuple(round(float(x), 9) for x in b.vertices[i]) for i in ids]


def _removed_rings(faces_removed: list[tuple]) -> list[list[int]]:
    """Boundary loops of removed face patches (edge-connected), as vertex id lists."""
    if not faces_removed:
        return []
    parent = list(range(len(faces_removed)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    by_edge = defaultdict(list)
    for i, f in enumerate(faces_removed):
        for a, c in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            by_edge[edge_key(a, c)].append(i)
    for fs in by_edge.values():
        for i in fs[1:]:
            parent[find(i)] = find(fs[0])
    comps = defaultdict(list)
    for i in range(len(faces_removed)):
        comps[find(i)].append(i)
    rings = []
    for members in comps.values():
        cnt = defaultdict(int)
        for i in members:
            f = faces_removed[i]
            for a, c in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                cnt[edge_key(a, c)] += 1
        bnd = [e for e, k in cnt.items() if k == 1]
        adj = defaultdict(set)
        for a, c in bnd:
            adj[a].add(c)
            adj[c].add(a)
        seen = set()
        for v in sorted(adj):
            if v in seen:
                continue
            loop, stack = [], [v]
            while stack:
                x = stack.pop()
                if x in seen:
                    continue
                seen.add(x)
                loop.append(x)
                stack.extend(sorted(adj[x] - seen))
            rings.append(sorted(loop))
    return rings


def generate(recipe: DefectRecipe) -> tuple[SurfaceMesh, GroundTruth]:
    """Build the broken mesh and its ground truth; a pure function of the recipe."""
    rng = np.random.default_rng(recipe.seed)
    b, info = _build_base(recipe)
    gt = GroundTruth()
    faces: list = list(b.faces)
    nf = len(faces)
    removed: set[int] = set()
    extra: list = []
    base_vertex_count = len(b.vertices)

    if recipe.base == "torus":
        gt.genus = True
        gt.sphere = False
    if recipe.base == "two-component" and recipe.params.get("layout", "apart") == "split":
        gt.split_component = True
        gt.sphere = False
        gt.expected_exit = 2

    def live(f):
        if f in removed:
            raise RecipeError(f"defect references removed face {f}")
        return faces[f]

    for d in recipe.defects:
        k = d.kind
        if k in ("remove-faces", "remove-quads"):
            for f in _face_ids(recipe, info, d, nf):
                live(f)
                removed.add(f)
        elif k == "remove-ring":
            if recipe.base != "torus":
                raise RecipeError("remove-ring needs a torus base")
            nv = info["nv"]
            j0, j1 = int(d.args[0]), int(d.args[1])
            for f in range(nf):
                if j0 <= (f // 2) % nv <= j1:
                    live(f)
                    removed.add(f)
        elif k in ("duplicate-seam", "duplicate-seam-quads"):
            patch = _face_ids(recipe, info, d, nf)
            pv = {v for f in patch for v in live(f)}
            outside = {v for i, f in enumerate(faces) if i not in patch and i not in removed
                       for v in f}
            seam = sorted(pv & outside)
            dup = {}
            for v in seam:
                jit = rng.normal(size=3)
                jit *= SEAM_JITTER * rng.uniform(0.2, 1.0) / np.linalg.norm(jit)
                dup[v] = b.vertex(b.vertices[v] + jit)
            for f in patch:
                faces[f] = tuple(dup.get(v, v) for v in faces[f])
            gt.pseudo_holes.append("duplicate-seam")
        elif k in ("overlap-edges", "tjunction"):
            u, v = (_vertex_arg(b, t) for t in d.args[:2])
            owners = [f for f in _faces_with_edge(faces, u, v) if f not in removed]
            if len(owners) != 2:
                raise RecipeError(f"{k}: edge {u}-{v} is not an interior manifold edge")
            # split the face holding v->u so the new vertex sits on its side
            fb = next(f for f in owners
                      if any((faces[f][i], faces[f][(i + 1) % 3]) == (v, u) for i in range(3)))
            apex = next(x for x in faces[fb] if x not in (u, v))
            pu, pv_, pa = b.vertices[u], b.vertices[v], b.vertices[apex]
            mid = (pu + pv_) / 2
            if k == "overlap-edges":
                e = (pv_ - pu) / np.linalg.norm(pv_ - pu)
                w = pa - mid
                w -= np.dot(w, e) * e
                m = b.vertex(mid + SLIVER_OFFSET * w / np.linalg.norm(w))
                gt.true_holes.append(_coords(b, sorted((u, v, m))))
            else:
                m = b.vertex(mid)
                gt.pseudo_holes.append("tjunction")
                gt.sphere = False
            faces[fb] = None
            removed.add(fb)
            extra += [(v, m, apex), (m, u, apex)]
        elif k == "nonmanifold-fan":
            u, v = (_vertex_arg(b, t) for t in d.args[:2])
            owners = [f for f in _faces_with_edge(faces, u, v) if f not in removed]
            if not owners:
                raise RecipeError(f"nonmanifold-fan: no face on edge {u}-{v}")
            n = np.zeros(3)
            for f in owners:
                a, c, e = (b.vertices[i] for i in faces[f])
                nn = np.cross(c - a, e - a)
                n += nn / np.linalg.norm(nn)
            n /= np.linalg.norm(n)
            a = b.vertex((b.vertices[u] + b.vertices[v]) / 2 + 0.3 * n)
            extra += [(u, v, a), (v, u, a)]
            gt.pseudo_holes.append("nonmanifold-fan")
            gt.sphere = False
        elif k == "self-intersect":
            f = int(d.args[0])
            P = b.vertices
            a, c, e = (P[i] for i in live(f))
            n = np.cross(c - a, e - a)
            n /= np.linalg.norm(n)
            t = (c - a) / np.linalg.norm(c - a)
            cen = (a + c + e) / 3
            ia = b.vertex(cen + 0.15 * n)
            ib = b.vertex(cen - 0.15 * n + 0.03 * t)
            ic = b.vertex(cen - 0.15 * n - 0.03 * t)
            extra.append((ia, ib, ic))
            gt.pseudo_holes.append("self-intersect")
            gt.sphere = False
        elif k == "overlay-face":
            f = int(d.args[0])
            src = live(f)
            copy = []
            for v in src:
                jit = rng.normal(size=3)
                jit *= SEAM_JITTER * rng.uniform(0.2, 1.0) / np.linalg.norm(jit)
                copy.append(b.vertex(b.vertices[v] + jit))
            extra.append(tuple(copy))
            gt.pseudo_holes.append("overlay-face")
            gt.sphere = False
        else:
            raise RecipeError(f"unknown defect {k!r}")

    base_removed = [b.faces[f] for f in sorted(removed)
                    if f < nf and faces[f] is not None]
    # faces split by overlap/tjunction defects are not holes themselves
    hole_rings = _removed_rings(base_removed)
    gt.true_holes = [_coords(b, r) for r in hole_rings] + gt.true_holes
    if recipe.base == "two-component" and gt.split_component:
        gt.true_holes = []
    out_faces = [f for i, f in enumerate(faces) if i not in removed and f is not None] + extra
    verts = np.asarray(b.vertices, dtype=float).reshape(-1, 3)
    del base_vertex_count
    return SurfaceMesh(verts, out_faces), gt


# -- comparison against ground truth -----------------------------------------------

def _dedupe_points(pts, tol):
    out = []
    for p in pts:
        if not any(np.linalg.norm(np.subtract(p, q)) <= tol for q in out):
            out.append(tuple(p))
    return out


def ring_matches(points, expected, tol: float = DUP_EPS) -> bool:
    """Same vertex positions up to ``tol``, ignoring order and duplicates."""
    a = _dedupe_points(points, tol)
    b = _dedupe_points(expected, tol)
    if len(a) != len(b):
        return False
    return all(any(np.linalg.norm(np.subtract(p, q)) <= tol for q in a) for p in b)


def classification_matches(mesh: SurfaceMesh, holes, gt: GroundTruth,
                           tol: float = DUP_EPS) -> bool:
    """Detected true holes correspond one to one with the expected rings."""
    found = [[tuple(mesh.vertices[v]) for v in r.vertex_ids()] for r in holes.true_holes]
    if len(found) != len(gt.true_holes):
        return False
    unused = list(range(len(found)))
    for exp in gt.true_holes:
        hit = next((i for i in unused if ring_matches(found[i], exp, tol)), None)
        if hit is None:
            return False
        unused.remove(hit)
    return True


# -- shipped suite -------------------------------------------------------------------

_SUITE_TEXT = """
name box-top-quad
base box size=1,1,1 subdiv=1
remove-quads top 0 0
---
name box-single-triangle
base box size=2,2,2 subdiv=2
remove-faces 12
---
name box-s3-center
base box size=3,3,3 subdiv=3
remove-quads top 1 1
---
name box-s3-two-patches
base box size=4,3,2.5 subdiv=3
remove-quads top 0 0 1 0
remove-quads -x 1 1
---
name box-s3-three-patches
base box size=4,3,2.5 subdiv=3
remove-quads top 2 2
remove-quads +y 0 0 0 1
remove-quads bottom 1 1 2 1
---
name box-s4-four-patches
base box size=8,6,5 subdiv=4
remove-quads top 1 1 2 2
remove-quads -y 0 0
remove-quads +x 2 1 3 1
remove-quads bottom 3 3
---
name box-s3-l-patch
base box size=3,3,3 subdiv=3
remove-quads top 0 0 1 0
remove-quads top 0 1
---
name box-s3-corner-patch
base box size=3,3,3 subdiv=3
remove-quads top 2 0
remove-quads -y 2 2
---
name box-s3-pinched
base box size=3,3,3 subdiv=3
remove-quads top 0 0
remove-quads top 1 1
---
name box-s3-seam
base box size=3,3,3 subdiv=3
seed 11
duplicate-seam-quads -y 0 0 1 1
---
name box-s3-hole-and-seam
base box size=3,3,3 subdiv=3
seed 5
remove-quads top 1 1
duplicate-seam-quads +x 0 0 1 0
---
name box-s3-sliver
base box size=3,3,3 subdiv=3
overlap-edges @1,1,3 @2,1,3
---
name box-s4-mixed
base box size=6,5,4 subdiv=4
seed 3
remove-quads top 0 0 1 1
remove-quads -x 2 2
duplicate-seam-quads +y 1 1 2 2
overlap-edges @3,2,0 @3,3,0
---
name house-roof-triangle
base gabled-house size=6,8 wall=3 ridge=2
remove-faces 12
---
name house-bent
base gabled-house size=6,8 wall=3 ridge=2
remove-faces 13 9
---
name house-gable
base gabled-house size=6,8 wall=3 ridge=2
remove-faces 3
---
name house-two-holes-seam
base gabled-house size=6,8 wall=3 ridge=2
seed 2
remove-faces 14
remove-faces 0
duplicate-seam 6
---
name house-seam-only
base gabled-house size=6,8 wall=3 ridge=2
seed 9
duplicate-seam 12 13
---
name box-overlay-face
base box size=2,2,2 subdiv=2
seed 4
overlay-face 9
---
name box-tjunction
base box size=3,3,3 subdiv=3
tjunction @1,1,3 @2,1,3
---
name box-self-intersect
base box size=3,3,3 subdiv=3
self-intersect 20
---
name box-fin-and-hole
base box size=3,3,3 subdiv=3
remove-quads top 1 1
nonmanifold-fan @0,0,0 @1,0,0
---
name torus-one-face
base torus R=3 r=1 nu=16 nv=8
remove-faces 5
---
name torus-tunnel
base torus R=3 r=1 nu=16 nv=8
remove-ring 3 4
---
name two-boxes
base two-component layout=apart subdiv=1
remove-quads top 0 0
remove-faces 20
---
name split-frame
base two-component layout=split gap=0.02
"""


def shipped_recipes() -> list[DefectRecipe]:
    return [parse_recipe(chunk) for chunk in _SUITE_TEXT.split("---") if chunk.strip()]


def recipe_by_name(name: str) -> DefectRecipe:
    for r in shipped_recipes():
        if r.name == name:
            return r
    raise KeyError(name)
