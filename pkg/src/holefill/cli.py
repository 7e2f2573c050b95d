"""Command line front end: ``holefill repair | validate | gen``."""

from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from .config import RepairConfig
from .holedetect import detect_holes
from .mesh import ObjParseError, SurfaceMesh, euler_and_borders, load_obj, save_obj
from .pipeline import repair
from .preprocess import count_duplicate_groups, count_marks, mark_duplicates, mark_overlapping_edges
from .synthkit import RecipeError, generate, parse_recipe, shipped_recipes

EXIT_OK, EXIT_INPUT, EXIT_PARTIAL = 0, 1, 2


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2) + "\n").encode("utf-8")


def _annotation(mesh: SurfaceMesh, rings: list[list[int]]) -> bytes:
    """Mesh vertices plus one closed OBJ polyline per ring."""
    out = [f"v {x:.9g} {y:.9g} {z:.9g}\n" for x, y, z in mesh.vertices.tolist()]
    for ring in rings:
        if ring:
            out.append("l " + " ".join(str(v + 1) for v in list(ring) + [ring[0]]) + "\n")
    return "".join(out).encode("ascii")


def _read_mesh(path) -> SurfaceMesh:
    with open(path, "rb") as fh:
        return load_obj(fh.read())


def run_repair(input_path, output_path, cfg: RepairConfig, report_path=None,
               annotate_path=None, timings: bool = False) -> int:
    """Repair one OBJ file; returns the process exit status."""
    try:
        mesh = _read_mesh(input_path)
    except (OSError, ObjParseError, ValueError) as exc:
        click.echo(f"error: {input_path}: {exc}", err=True)
        return EXIT_INPUT
    rep = repair(mesh, cfg)
    Path(output_path).write_bytes(save_obj(mesh))
    if report_path is not None:
        record = {"input": str(input_path), **rep.to_dict(timings=timings)}
        Path(report_path).write_bytes(_dump_json(record))
    if annotate_path is not None:
        rings = [r["vertex_ids"] for r in rep.holes.to_records()]
        Path(annotate_path).write_bytes(_annotation(mesh, rings))
    return rep.exit_status


def validate_mesh(mesh: SurfaceMesh, cfg: RepairConfig) -> dict:
    """Defect counts for an unrepaired mesh; the mesh gets marks but no edits."""
    chi, border, comps = euler_and_borders(mesh)
    groups = mark_duplicates(mesh, cfg)
    marks = count_marks(mark_overlapping_edges(mesh, cfg))
    return {
        "vertices": len(mesh.vertices),
        "faces": len(mesh.faces),
        "border_edges": border,
        "nonmanifold_edges": len(mesh.nonmanifold_edges),
        "duplicate_groups": count_duplicate_groups(groups),
        "overlap_edges": marks["same-endpoints"] + marks["collinear-distinct"],
        "degenerate_edges": marks["degenerate"],
        "components": comps,
        "euler": chi,
    }


def run_validate(input_path, cfg: RepairConfig, report_path=None, annotate_path=None):
    """Returns ``(exit status, diagnostics or None)``."""
    try:
        mesh = _read_mesh(input_path)
    except (OSError, ObjParseError, ValueError) as exc:
        click.echo(f"error: {input_path}: {exc}", err=True)
        return EXIT_INPUT, None
    diag = {"input": str(input_path), **validate_mesh(mesh, cfg)}
    if report_path is not None:
        Path(report_path).write_bytes(_dump_json(diag))
    if annotate_path is not None:
        holes = detect_holes(mesh, cfg)
        Path(annotate_path).write_bytes(_annotation(mesh, [r.vertex_ids() for r in holes.true_holes]))
    return EXIT_OK, diag


def _combine(statuses) -> int:
    statuses = list(statuses)
    if EXIT_INPUT in statuses:
        return EXIT_INPUT
    return EXIT_PARTIAL if EXIT_PARTIAL in statuses else EXIT_OK


def _config_options(f):
    f = click.option("--eps-duplicate", type=float, default=1e-3, show_default=True,
                     help="Radius (m) under which vertices count as duplicates.")(f)
    f = click.option("--eps-area-ratio", type=float, default=0.01, show_default=True,
                     help="Minimum overlap/face area ratio for a covered gap.")(f)
    f = click.option("--eps-distance", type=float, default=0.1, show_default=True,
                     help="Maximum vertex-to-plane distance (m) for a covered gap.")(f)
    return f


def _make_config(eps_distance, eps_area_ratio, eps_duplicate) -> RepairConfig:
    try:
        return RepairConfig(eps_distance=eps_distance, eps_area_ratio=eps_area_ratio,
                            eps_duplicate=eps_duplicate)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None


@click.group()
@click.option("-v", "--verbose", count=True, help="Log more (repeatable).")
def main(verbose):
    """Detect and fill holes in LoD2 building meshes."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _repair_job(args):
    return run_repair(*args)


@main.command("repair")
@click.argument("inputs", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.option("-o", "--output", type=click.Path(path_type=Path),
              help="Output OBJ (single input only).")
@click.option("--out-dir", type=click.Path(path_type=Path, file_okay=False),
              help="Directory for outputs when repairing several files.")
@click.option("--report", "report", type=click.Path(path_type=Path),
              help="JSON report path (single input); with --out-dir reports are <stem>.json.")
@click.option("--annotate", type=click.Path(path_type=Path),
              help="Sidecar OBJ with detected hole rings as line elements.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes.")
@click.option("--timings", is_flag=True, help="Include per-phase timings in the report.")
@_config_options
def repair_cmd(inputs, output, out_dir, report, annotate, jobs, timings,
               eps_distance, eps_area_ratio, eps_duplicate):
    """Repair OBJ meshes. Exit 0: all holes filled, 2: some remain, 1: bad input."""
    cfg = _make_config(eps_distance, eps_area_ratio, eps_duplicate)
    if len(inputs) == 1 and out_dir is None:
        if output is None:
            raise click.UsageError("give -o/--output or --out-dir")
        jobs_args = [(inputs[0], output, cfg, report, annotate, timings)]
    else:
        if out_dir is None:
            raise click.UsageError("several inputs need --out-dir")
        if output is not None or report is not None or annotate is not None:
            raise click.UsageError("-o, --report and --annotate apply to a single input; "
                                   "--out-dir writes <stem>.obj, <stem>.json, <stem>.holes.obj")
        out_dir.mkdir(parents=True, exist_ok=True)
        jobs_args = [(p, out_dir / f"{p.stem}.obj", cfg, out_dir / f"{p.stem}.json",
                      out_dir / f"{p.stem}.holes.obj", timings) for p in inputs]
    if jobs > 1 and len(jobs_args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            statuses = list(pool.map(_repair_job, jobs_args))
    else:
        statuses = [_repair_job(a) for a in jobs_args]
    sys.exit(_combine(statuses))


@main.command("validate")
@click.argument("input_path", type=click.Path(path_type=Path))
@click.option("--report", type=click.Path(path_type=Path), help="Also write diagnostics here.")
@click.option("--annotate", type=click.Path(path_type=Path),
              help="Sidecar OBJ with hole boundaries as line elements.")
@_config_options
def validate_cmd(input_path, report, annotate, eps_distance, eps_area_ratio, eps_duplicate):
    """Print defect counts of a mesh as JSON."""
    cfg = _make_config(eps_distance, eps_area_ratio, eps_duplicate)
    status, diag = run_validate(input_path, cfg, report, annotate)
    if diag is not None:
        click.echo(_dump_json(diag).decode("utf-8"), nl=False)
    sys.exit(status)


@main.command("gen")
@click.argument("recipe", required=False, type=click.Path(path_type=Path))
@click.option("--name", help="Use a shipped recipe instead of a file.")
@click.option("-o", "--output", type=click.Path(path_type=Path), help="Output OBJ.")
@click.option("--truth", type=click.Path(path_type=Path), help="Write ground truth JSON.")
@click.option("--all", "all_dir", type=click.Path(path_type=Path, file_okay=False),
              help="Write every shipped recipe (OBJ, recipe text, truth) into this directory.")
@click.option("--list", "list_only", is_flag=True, help="List shipped recipe names.")
def gen_cmd(recipe, name, output, truth, all_dir, list_only):
    """Generate defect fixtures from the recipe text format."""
    if list_only:
        for r in shipped_recipes():
            click.echo(r.name)
        return
    if all_dir is not None:
        all_dir.mkdir(parents=True, exist_ok=True)
        for r in shipped_recipes():
            mesh, gt = generate(r)
            (all_dir / f"{r.name}.obj").write_bytes(save_obj(mesh))
            (all_dir / f"{r.name}.recipe").write_text(r.to_text())
            (all_dir / f"{r.name}.truth.json").write_bytes(_dump_json(_truth_record(gt)))
        return
    try:
        if name is not None:
            r = next((x for x in shipped_recipes() if x.name == name), None)
            if r is None:
                raise RecipeError(f"no shipped recipe named {name!r}")
        elif recipe is not None:
            r = parse_recipe(recipe.read_text())
        else:
            raise click.UsageError("give a recipe file, --name, --all or --list")
        mesh, gt = generate(r)
    except (OSError, RecipeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    if output is None:
        raise click.UsageError("give -o/--output")
    output.write_bytes(save_obj(mesh))
    if truth is not None:
        truth.write_bytes(_dump_json(_truth_record(gt)))


def _truth_record(gt) -> dict:
    return {
        "true_holes": [[list(p) for p in ring] for ring in gt.true_holes],
        "pseudo_holes": list(gt.pseudo_holes),
        "genus": gt.genus,
        "split_component": gt.split_component,
        "sphere": gt.sphere,
        "expected_exit": gt.expected_exit,
    }


if __name__ == "__main__":
    main()
