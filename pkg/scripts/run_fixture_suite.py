"""Repair every shipped synthetic fixture and print a summary table.

    python3 scripts/run_fixture_suite.py [--out DIR] [--csv results.csv]

With --out, the repaired OBJ, JSON report and hole annotation of each
fixture are written to DIR (same layout as ``holefill repair --out-dir``).
"""

import argparse
import csv
import sys
import time
from pathlib import Path

from holefill import RepairConfig, repair
from holefill.cli import run_repair
from holefill.mesh import save_obj
from holefill.synthkit import classification_matches, generate, shipped_recipes

COLUMNS = ["recipe", "faces_in", "faces_out", "holes", "filled", "pseudo", "unfillable",
           "euler_after", "borders_after", "classified", "exit", "expected_exit", "ms"]


def run_suite(cfg):
    rows = []
    for r in shipped_recipes():
        mesh, gt = generate(r)
        t0 = time.perf_counter()
        rep = repair(mesh, cfg)
        ms = 1e3 * (time.perf_counter() - t0)
        d = rep.to_dict()
        ok = classification_matches(mesh, rep.holes, gt) or gt.split_component
        rows.append({
            "recipe": r.name,
            "faces_in": rep.faces_in,
            "faces_out": rep.faces_out,
            "holes": d["holes"]["detected"],
            "filled": d["holes"]["filled"],
            "pseudo": d["holes"]["pseudo_holes"],
            "unfillable": d["holes"]["unfillable"],
            "euler_after": ",".join(map(str, rep.topology_after["component_euler"])),
            "borders_after": rep.topology_after["border_halfedges"],
            "classified": "ok" if ok else "WRONG",
            "exit": rep.exit_status,
            "expected_exit": gt.expected_exit,
            "ms": round(ms, 1),
        })
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, help="write repaired fixtures here")
    ap.add_argument("--csv", type=Path, help="also save the table as CSV")
    args = ap.parse_args(argv)
    cfg = RepairConfig()

    rows = run_suite(cfg)
    widths = {c: max(len(c), *(len(str(row[c])) for row in rows)) for c in COLUMNS}
    print("  ".join(c.ljust(widths[c]) for c in COLUMNS))
    for row in rows:
        print("  ".join(str(row[c]).ljust(widths[c]) for c in COLUMNS))
    total_in = sum(r["faces_in"] for r in rows)
    total_out = sum(r["faces_out"] for r in rows)
    wrong = [r["recipe"] for r in rows if r["classified"] != "ok" or r["exit"] != r["expected_exit"]]
    print(f"\n{len(rows)} fixtures, faces {total_in} -> {total_out}, "
          f"{sum(r['ms'] for r in rows):.0f} ms total, mismatches: {wrong or 'none'}")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=COLUMNS)
            w.writeheader()
            w.writerows(rows)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        for r in shipped_recipes():
            src = args.out / f"{r.name}.input.obj"
            src.write_bytes(save_obj(generate(r)[0]))
            run_repair(src, args.out / f"{r.name}.obj", cfg, args.out / f"{r.name}.json",
                       args.out / f"{r.name}.holes.obj", False)
    return 1 if wrong else 0


if __name__ == "__main__":
    sys.exit(main())
