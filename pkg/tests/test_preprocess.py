import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holefill.config import RepairConfig
from holefill.geometry import triangle_area, triangle_plane, point_plane_distance
from holefill.mesh import OverlapClass, SurfaceMesh
from holefill.preprocess import (PreprocessReport, count_duplicate_groups, duplicate_groups,
                                 find_self_intersections, mark_duplicates,
                                 mark_overlapping_edges, preprocess,
                                 resolve_self_intersections, stitch_pseudo_holes)

from fixtures import cube, grid

CFG = RepairConfig()


def union_find_groups(pts, radius):
    """O(n^2) oracle: link every pair within radius, label by lowest member."""
    n = len(pts)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(pts[i] - pts[j]) <= radius:
                ri, rj = find(i), find(j)
                parent[max(ri, rj)] = min(ri, rj)
    roots = [find(i) for i in range(n)]
    lowest = {}
    for i, r in enumerate(roots):
        lowest.setdefault(r, i)
    return np.array([lowest[r] for r in roots])


# -- duplicates ------------------------------------------------------------------

def test_far_points_are_singletons():
    pts = np.eye(3)
    assert list(duplicate_groups(pts, 1e-3)) == [0, 1, 2]


def test_half_radius_pair_groups():
    pts = np.array([[0, 0, 0], [5e-4, 0, 0], [1, 0, 0]])
    assert list(duplicate_groups(pts, 1e-3)) == [0, 0, 2]
    assert count_duplicate_groups(duplicate_groups(pts, 1e-3)) == 1


def test_hundred_points_wide_radius_matches_oracle():
    rng = np.random.default_rng(5)
    pts = rng.random((100, 3)) * [2, 1, 1]
    radius = 0.3 * 2  # 0.3 of the longest bounding box side
    assert np.array_equal(duplicate_groups(pts, radius), union_find_groups(pts, radius))


@pytest.mark.parametrize("seed, radius", [(0, 0.02), (1, 0.05), (2, 0.08), (3, 0.12), (4, 0.3)])
def test_two_hundred_point_clouds_match_oracle(seed, radius):
    pts = np.random.default_rng(seed).random((200, 3))
    assert np.array_equal(duplicate_groups(pts, radius), union_find_groups(pts, radius))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(*[st.integers(0, 20)] * 3), min_size=1, max_size=40),
       st.sampled_from([0.5, 1.0, 1.5, 2.0]))
def test_lattice_clouds_match_oracle(pts, radius):
    # integer lattices probe ties at exactly the radius (sqrt(1), sqrt(4) ...)
    pts = np.asarray(pts, float)
    assert np.array_equal(duplicate_groups(pts, radius), union_find_groups(pts, radius))


# -- overlapping edges -------------------------------------------------------------

def test_clean_cube_has_no_marks():
    m = cube()
    marks = mark_overlapping_edges(m, CFG)
    assert set(marks.values()) == {OverlapClass.NONE}


def test_collinear_distinct_edges():
    v = [(0, 0, 0), (2, 0, 0), (1, 1, 0), (0.5, 0, 0), (1.5, 0, 0), (1, -1, 0)]
    m = SurfaceMesh(v, [(0, 1, 2), (4, 3, 5)])
    marks = mark_overlapping_edges(m, CFG)
    assert marks[(0, 1)] is OverlapClass.COLLINEAR_DISTINCT
    assert marks[(3, 4)] is OverlapClass.COLLINEAR_DISTINCT
    assert (3, 4) in m.overlap_partners[(0, 1)]


def test_same_endpoint_edges_through_duplicates():
    v = [(0, 0, 0), (1, 0, 0), (0.5, 1, 0), (2e-4, 0, 0), (1, 3e-4, 0), (0.5, -1, 0)]
    m = SurfaceMesh(v, [(0, 1, 2), (3, 4, 5)])
    marks = mark_overlapping_edges(m, CFG)
    assert marks[(0, 1)] is OverlapClass.SAME_ENDPOINTS
    assert marks[(3, 4)] is OverlapClass.SAME_ENDPOINTS


def test_degenerate_edge():
    v = [(0, 0, 0), (5e-4, 0, 0), (0, 1, 0)]
    m = SurfaceMesh(v, [(0, 1, 2)])
    assert mark_overlapping_edges(m, CFG)[(0, 1)] is OverlapClass.DEGENERATE


# -- stitching ------------------------------------------------------------------------

def two_squares(gap):
    """Unit squares side by side; the right one carries its own copies of the seam vertices."""
    v = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
         (1 + gap, 0, 0), (2, 0, 0), (2, 1, 0), (1 + gap, 1, 0)]
    f = [(0, 1, 2), (0, 2, 3), (4, 5, 6), (4, 6, 7)]
    return SurfaceMesh(v, f)


def test_seam_through_duplicates_is_stitched():
    m = two_squares(2e-4)
    before = m.n_halfedges - 3 * len(m.faces)
    rep = PreprocessReport()
    n = stitch_pseudo_holes(m, CFG, rep)
    assert n == 1 and rep.stitched_pairs == 1
    assert m.n_halfedges - 3 * len(m.faces) == before - 2
    assert len(m.faces) == 4
    assert all(v not in (4, 7) for f in m.faces for v in f)  # welded onto ids 1 and 2


def test_true_gap_is_not_stitched():
    m = two_squares(10 * CFG.eps_duplicate)
    assert stitch_pseudo_holes(m, CFG) == 0


def test_closed_cube_needs_no_stitch():
    assert stitch_pseudo_holes(cube(), CFG) == 0


def test_ambiguous_stitch_is_recorded():
    # three faces hang off the same duplicated edge: one matching pair plus a spare
    v = [(0, 0, 0), (1, 0, 0), (0.5, 1, 0), (1, 1e-4, 0), (1e-4, 0, 0), (0.5, -1, 0),
         (1, -1e-4, 0), (-1e-4, 0, 0), (0.5, -1, 0.5)]
    m = SurfaceMesh(v, [(0, 1, 2), (3, 4, 5), (6, 7, 8)])
    rep = PreprocessReport()
    stitch_pseudo_holes(m, CFG, rep)
    assert rep.stitched_pairs == 1
    assert rep.stitch_ambiguities >= 1


def test_no_matching_pairs_left_after_stitching():
    from holefill.synthkit import generate, recipe_by_name
    m, _ = generate(recipe_by_name("box-s4-mixed"))
    mark_duplicates(m, CFG)
    stitch_pseudo_holes(m, CFG)
    g = m.dup_group
    keys = {(int(g[m.he_origin[h]]), int(g[m.he_target[h]])) for h in m.border_halfedges()}
    assert not any((b, a) in keys for a, b in keys if a != b)


def test_stitching_keeps_faces_and_moves_little():
    from holefill.synthkit import generate, recipe_by_name
    m, _ = generate(recipe_by_name("box-s3-seam"))
    ref = m.copy()
    mark_duplicates(m, CFG)
    stitch_pseudo_holes(m, CFG)
    assert len(m.faces) == len(ref.faces)
    for f_old, f_new in zip(ref.faces, m.faces):
        for a, b in zip(f_old, f_new):
            assert np.linalg.norm(ref.vertices[a] - m.vertices[b]) <= CFG.eps_duplicate


# -- self-intersections -----------------------------------------------------------------

def crossing_pair():
    v = [(0, 0, 0), (2, 0, 0), (0, 2, 0), (0.5, 0.5, -1), (0.6, 0.6, 1), (0.4, 0.8, 1)]
    return SurfaceMesh(v, [(0, 1, 2), (3, 4, 5)])


def test_disjoint_triangles_untouched():
    v = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (0, 1, 1)]
    m = SurfaceMesh(v, [(0, 1, 2), (3, 4, 5)])
    rep = resolve_self_intersections(m, CFG)
    assert rep.self_intersection_pairs == 0 and m.faces == [(0, 1, 2), (3, 4, 5)]


def test_shared_edge_is_not_a_crossing():
    v = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0.5, 0, 1)]
    m = SurfaceMesh(v, [(0, 1, 2), (1, 0, 3)])
    assert find_self_intersections(m, CFG) == []


def test_crossing_faces_conserve_area_and_stay_in_plane():
    m = crossing_pair()
    originals = {f: triangle_area(*m.face_points(i)) for i, f in enumerate(m.faces)}
    planes = {f: triangle_plane(*m.face_points(i)) for i, f in enumerate(m.faces)}
    n_before = len(m.vertices)
    rep = resolve_self_intersections(m, CFG)
    assert rep.self_intersection_pairs == 1 and rep.self_intersection_resolved == 1
    assert set(rep.remeshed) == set(originals)
    for f, subs in rep.remeshed.items():
        area = sum(triangle_area(*m.vertices[list(t)]) for t in subs)
        assert area == pytest.approx(originals[f], abs=1e-9)
        for t in subs:
            for v in t:
                assert point_plane_distance(m.vertices[v], planes[f]) <= 1e-9
    # original coordinates untouched, new ones appended
    assert np.array_equal(m.vertices[:n_before], crossing_pair().vertices)
    m.check_invariants()
    assert find_self_intersections(m, CFG) == []


def test_preprocess_is_idempotent():
    from holefill.synthkit import generate, recipe_by_name
    m, _ = generate(recipe_by_name("box-self-intersect"))
    preprocess(m, CFG)
    once = (m.vertices.copy(), list(m.faces))
    rep2 = preprocess(m, CFG)
    assert np.array_equal(m.vertices, once[0]) and m.faces == once[1]
    assert rep2.self_intersection_pairs == 0 and rep2.stitched_pairs == 0


def test_fig4_style_seam_leaves_no_hole():
    v, f = grid(2, 1)
    # right cell re-uses copies of the shared column
    v += [[1 + 1e-4, 0, 0], [1, 1 - 2e-4, 0]]
    f = f[:2] + [tuple({1: 6, 4: 7}.get(x, x) for x in t) for t in f[2:]]
    m = SurfaceMesh(v, f)
    rep = preprocess(m, CFG)
    assert rep.stitched_pairs == 1
    assert rep.duplicate_groups == 2
