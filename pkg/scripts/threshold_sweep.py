"""Sensitivity of hole classification to the two intersection-test thresholds.

    python3 scripts/threshold_sweep.py

For each (eps_distance, eps_area_ratio) pair the whole fixture suite is run
through preprocess + detection and the fraction of recipes whose true holes
match the ground truth is printed as a grid. The default pair is marked.
"""

import itertools

import numpy as np

from holefill import RepairConfig, detect_holes, preprocess
from holefill.synthkit import classification_matches, generate, shipped_recipes

DISTANCES = [1e-4, 1e-3, 0.01, 0.1, 0.5, 2.0]
RATIOS = [1e-4, 0.01, 0.2, 0.6, 0.95]


def accuracy(cfg, recipes):
    hits = 0
    for r in recipes:
        mesh, gt = generate(r)
        preprocess(mesh, cfg)
        hits += classification_matches(mesh, detect_holes(mesh, cfg), gt)
    return hits / len(recipes)


def main():
    recipes = [r for r in shipped_recipes() if not generate(r)[1].split_component]
    default = RepairConfig()
    grid = np.zeros((len(DISTANCES), len(RATIOS)))
    for (i, d), (j, a) in itertools.product(enumerate(DISTANCES), enumerate(RATIOS)):
        cfg = RepairConfig(eps_distance=d, eps_area_ratio=a,
                           eps_duplicate=min(default.eps_duplicate, d / 10))
        grid[i, j] = accuracy(cfg, recipes)

    print(f"classification accuracy over {len(recipes)} recipes")
    print("eps_d \\ eps_t " + "".join(f"{a:>9g}" for a in RATIOS))
    for i, d in enumerate(DISTANCES):
        cells = []
        for j, a in enumerate(RATIOS):
            mark = "*" if (d, a) == (default.eps_distance, default.eps_area_ratio) else " "
            cells.append(f"{grid[i, j]:>8.2f}{mark}")
        print(f"{d:>13g} " + "".join(cells))


if __name__ == "__main__":
    main()
