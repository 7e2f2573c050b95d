import numpy as np
import pytest

from holefill.config import RepairConfig
from holefill.holedetect import detect_holes
from holefill.mesh import euler_and_borders, save_obj
from holefill.preprocess import preprocess
from holefill.synthkit import (DefectRecipe, RecipeError, classification_matches, generate,
                               parse_recipe, recipe_by_name, ring_matches, shipped_recipes)

CFG = RepairConfig()


def test_suite_has_at_least_twenty_named_recipes():
    recipes = shipped_recipes()
    names = [r.name for r in recipes]
    assert len(recipes) >= 20 and len(set(names)) == len(names)


@pytest.mark.parametrize("recipe", shipped_recipes(), ids=lambda r: r.name)
def test_recipe_text_round_trips(recipe):
    back = parse_recipe(recipe.to_text())
    assert back == recipe
    assert back.to_text() == recipe.to_text()


@pytest.mark.parametrize("name", ["box-s4-mixed", "box-self-intersect", "torus-tunnel"])
def test_generate_is_pure(name):
    r = recipe_by_name(name)
    text = r.to_text()
    (m1, g1), (m2, g2) = generate(r), generate(r)
    assert save_obj(m1) == save_obj(m2) and g1 == g2
    assert r.to_text() == text


def test_box_ground_truth_is_the_removed_quad():
    m, gt = generate(recipe_by_name("box-s3-center"))
    assert len(gt.true_holes) == 1 and gt.sphere and gt.expected_exit == 0
    ring = gt.true_holes[0]
    assert ring_matches(ring, [(1, 1, 3), (2, 1, 3), (2, 2, 3), (1, 2, 3)])
    assert euler_and_borders(m)[1] == 4


def test_seam_ground_truth_has_no_true_hole():
    m, gt = generate(recipe_by_name("box-s3-seam"))
    assert gt.true_holes == [] and gt.pseudo_holes == ["duplicate-seam"]
    # the copies sit within the duplicate radius of the originals
    assert euler_and_borders(m)[1] > 0
    preprocess(m, CFG)
    assert euler_and_borders(m)[1] == 0


def test_torus_ground_truths():
    _, one = generate(recipe_by_name("torus-one-face"))
    assert len(one.true_holes) == 1 and len(one.true_holes[0]) == 3 and not one.sphere
    _, tunnel = generate(recipe_by_name("torus-tunnel"))
    assert len(tunnel.true_holes) == 2 and tunnel.genus and tunnel.limitation
    for ring in tunnel.true_holes:
        assert len(ring) == 16
        assert len({round(p[2], 9) for p in ring}) == 1  # each cut is a flat circle


def test_split_frame_is_flagged():
    _, gt = generate(recipe_by_name("split-frame"))
    assert gt.split_component and gt.expected_exit == 2


@pytest.mark.parametrize("text, match", [
    ("name x\n", "no base"),
    ("base sphere\n", "unknown base"),
    ("base box subdiv=2\nremove-faces 99\n", "out of range"),
    ("base box subdiv=2\nremove-faces 3\nremove-faces 3\n", "removed face"),
    ("base box subdiv=2\nremove-quads top 5 5\n", "outside"),
    ("base box subdiv=2\nremove-quads side 0 0\n", "unknown side"),
    ("base box subdiv=2\nexplode 1\n", "unknown defect"),
    ("base gabled-house\nremove-quads top 0 0\n", "box base"),
    ("base box subdiv=2\nremove-ring 0 1\n", "torus base"),
    ("base box subdiv=2\noverlap-edges @9,9,9 @0,0,0\n", "lattice point"),
])
def test_invalid_recipes_raise(text, match):
    with pytest.raises(RecipeError, match=match):
        generate(parse_recipe(text))


@pytest.mark.parametrize("recipe", [r for r in shipped_recipes()
                                    if not generate(r)[1].split_component],
                         ids=lambda r: r.name)
def test_detection_matches_ground_truth(recipe):
    m, gt = generate(recipe)
    preprocess(m, CFG)
    assert classification_matches(m, detect_holes(m, CFG), gt)


def test_custom_recipe_from_text():
    r = parse_recipe("name mine\nbase box size=2,1,1 subdiv=2\nseed 4\nremove-quads -x 0 0 1 1\n")
    assert isinstance(r, DefectRecipe) and r.seed == 4 and r.params["size"] == (2.0, 1.0, 1.0)
    m, gt = generate(r)
    # the whole -x side goes: its 2x2 lattice border has 8 vertices
    assert len(gt.true_holes) == 1 and len(gt.true_holes[0]) == 8
    assert np.isclose(max(abs(p[0]) for p in gt.true_holes[0]), 0.0)
