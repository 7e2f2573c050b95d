import numpy as np
import pytest

from holefill.config import RepairConfig
from holefill.geometry import fit_plane, project_to_plane, segments_cross2
from holefill.holedetect import BorderRing, HoleSet, RingEdge, detect_holes
from holefill.mesh import SurfaceMesh, component_euler, euler_and_borders
from holefill.preprocess import preprocess
from holefill.remesh import fill_all, fill_hole
from holefill.synthkit import generate, recipe_by_name

from fixtures import cube, grid

CFG = RepairConfig()


def detect_and_fill(mesh):
    preprocess(mesh, CFG)
    holes = detect_holes(mesh, CFG)
    return holes, fill_all(mesh, holes, CFG)


def in_circle(a, b, c, p):
    m = np.array([[a[0] - p[0], a[1] - p[1], (a[0] - p[0]) ** 2 + (a[1] - p[1]) ** 2],
                  [b[0] - p[0], b[1] - p[1], (b[0] - p[0]) ** 2 + (b[1] - p[1]) ** 2],
                  [c[0] - p[0], c[1] - p[1], (c[0] - p[0]) ** 2 + (c[1] - p[1]) ** 2]])
    orient = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return np.linalg.det(m) * np.sign(orient) > 1e-12


def test_cube_roof_square_gets_two_faces():
    m = cube(drop=(2, 3))
    n_v = len(m.vertices)
    _, fills = detect_and_fill(m)
    assert len(fills) == 1
    r = fills[0]
    assert r.status == "filled" and r.faces_added == 2 and r.residual == 0.0
    assert euler_and_borders(m) == (2, 0, 1)
    assert len(m.nonmanifold_edges) == 0
    assert len(m.vertices) == n_v
    assert r.candidates == 2


def test_patch_keeps_original_faces_and_ring_edges():
    m, _ = generate(recipe_by_name("box-s3-l-patch"))
    before = list(m.faces)
    holes, fills = detect_and_fill(m)
    assert m.faces[:len(before)] == before
    ring = holes.true_holes[0]
    n = len(fills[0].ring_vertices)
    assert fills[0].faces_added == n - 2
    patch_edges = {frozenset(e) for f in fills[0].faces for e in zip(f, f[1:] + f[:1])}
    assert {frozenset((e.u, e.v)) for e in ring.edges} <= patch_edges


def test_patch_is_constrained_delaunay_in_the_fit_plane():
    m, _ = generate(recipe_by_name("box-s3-l-patch"))
    _, fills = detect_and_fill(m)
    ids = fills[0].ring_vertices
    pl = fit_plane(m.vertices[ids])
    uv = {v: project_to_plane(m.vertices[v], pl) for v in ids}
    ring = list(zip(ids, ids[1:] + ids[:1]))
    for f in fills[0].faces:
        cen = np.mean([uv[x] for x in f], axis=0)
        for v in ids:
            if v in f or not in_circle(*(uv[x] for x in f), uv[v]):
                continue
            # an in-circle vertex is allowed only when a ring edge hides it
            blocked = any(segments_cross2(cen, uv[v], uv[a], uv[b]) for a, b in ring
                          if v not in (a, b))
            assert blocked, (f, v)


def test_bent_ring_fill_adds_no_vertex():
    m, _ = generate(recipe_by_name("house-bent"))
    n_v = len(m.vertices)
    _, fills = detect_and_fill(m)
    assert fills and all(r.status == "filled" for r in fills)
    assert all(r.residual > 0 for r in fills)
    assert len(m.vertices) == n_v
    assert euler_and_borders(m)[1] == 0


@pytest.mark.parametrize("name", ["box-top-quad", "box-s3-center", "box-s3-two-patches",
                                  "box-s4-four-patches", "box-s3-corner-patch",
                                  "house-roof-triangle", "house-gable"])
def test_sphere_fixtures_close_with_n_minus_two_faces(name):
    m, _ = generate(recipe_by_name(name))
    _, fills = detect_and_fill(m)
    for r in fills:
        assert r.faces_added == len(r.ring_vertices) - 2
    assert euler_and_borders(m)[1] == 0
    assert component_euler(m) == [2]


def test_two_holes_fill_lowest_vertex_first():
    m, _ = generate(recipe_by_name("box-s3-two-patches"))
    holes, fills = detect_and_fill(m)
    firsts = [min(r.ring_vertices) for r in fills]
    assert len(firsts) == 2 and firsts == sorted(firsts)


def test_empty_hole_set_is_a_no_op():
    m = cube()
    assert fill_all(m, HoleSet(), CFG) == []
    assert len(m.faces) == 12


def test_bowtie_ring_is_a_projection_fold():
    m = SurfaceMesh([(0, 0, 0), (1, 1, 0), (1, 0, 0), (0, 1, 0)], [])
    ring = BorderRing([RingEdge(0, 1, None), RingEdge(1, 2, None), RingEdge(2, 3, None),
                       RingEdge(3, 0, None)], closed=True)
    r = fill_hole(m, ring, CFG)
    assert r.status == "unfillable" and r.reason == "projection-fold"
    assert m.faces == []


def test_collinear_ring_is_degenerate():
    m = SurfaceMesh([(0, 0, 0), (1, 0, 0), (2, 0, 0)], [])
    ring = BorderRing([RingEdge(0, 1, None), RingEdge(1, 2, None), RingEdge(2, 0, None)], True)
    assert fill_hole(m, ring, CFG).reason == "degenerate-plane"


def test_candidate_covering_a_face_is_rejected():
    # a closed ring whose patch would lie on top of the existing grid cell
    v, f = grid(1, 1)
    m = SurfaceMesh(v, f)
    ring = BorderRing([RingEdge(0, 1, None), RingEdge(1, 3, None), RingEdge(3, 2, None),
                       RingEdge(2, 0, None)], closed=True)
    r = fill_hole(m, ring, CFG)
    assert r.faces_added == 0 and r.rejected_intersecting == 2
    assert r.reason == "all-candidates-rejected"
    assert len(m.faces) == 2
