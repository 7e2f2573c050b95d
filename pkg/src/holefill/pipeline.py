"""The three phases glued together, plus the run report."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .config import RepairConfig
from .holedetect import HoleSet, detect_holes
from .mesh import SurfaceMesh, component_euler, euler_and_borders
from .preprocess import PreprocessReport, preprocess
from .remesh import FillResult, fill_all

SCHEMA_VERSION = 1


def topology_summary(mesh: SurfaceMesh) -> dict:
    chi, border, comps = euler_and_borders(mesh)
    return {"euler": chi, "border_halfedges": border, "components": comps,
            "component_euler": component_euler(mesh)}


@dataclass
class RepairReport:
    faces_in: int
    vertices_in: int
    config: dict
    topology_before: dict
    faces_out: int = 0
    vertices_out: int = 0
    topology_after: dict = field(default_factory=dict)
    preprocess: PreprocessReport = field(default_factory=PreprocessReport)
    holes: HoleSet = field(default_factory=HoleSet)
    fills: list[FillResult] = field(default_factory=list)
    timings_ms: dict = field(default_factory=dict)

    @property
    def faces_added_by_fill(self) -> int:
        return sum(r.faces_added for r in self.fills)

    @property
    def holes_filled(self) -> int:
        return sum(r.status == "filled" for r in self.fills)

    @property
    def unfillable(self) -> list[dict]:
        """Holes left open: failed or partial fills and rings that never closed."""
        out = [{"ring": r.ring_vertices, "status": r.status, "reason": r.reason}
               for r in self.fills if r.status != "filled"]
        out += [{"ring": c.ring.vertex_ids(), "status": c.kind, "reason": c.reason}
                for c in self.holes.rejected if c.kind in ("unclosable", "ambiguous")]
        return out

    @property
    def exit_status(self) -> int:
        return 0 if not self.unfillable else 2

    def face_count_invariant_holds(self) -> bool:
        p = self.preprocess
        return self.faces_out == (self.faces_in + p.faces_added - p.faces_removed
                                  + self.faces_added_by_fill)

    def to_dict(self, timings: bool = False) -> dict:
        pseudo = [c for c in self.holes.rejected if c.kind not in ("unclosable", "ambiguous")]
        d = {
            "schema_version": SCHEMA_VERSION,
            "faces_in": self.faces_in,
            "faces_out": self.faces_out,
            "vertices_in": self.vertices_in,
            "vertices_out": self.vertices_out,
            "preprocess": self.preprocess.to_dict(),
            "holes": {
                "detected": len(self.holes.true_holes),
                "filled": self.holes_filled,
                "unfillable": len(self.unfillable),
                "pseudo_holes": len(pseudo),
                "faces_added": self.faces_added_by_fill,
                "unfillable_details": self.unfillable,
            },
            "rings": self.holes.to_records(),
            "fills": [r.to_dict() for r in self.fills],
            "topology_before": self.topology_before,
            "topology_after": self.topology_after,
            "face_count_invariant": self.face_count_invariant_holds(),
            "config": self.config,
        }
        if timings:
            d["timings_ms"] = dict(self.timings_ms)
        return d


def repair(mesh: SurfaceMesh, cfg: RepairConfig | None = None) -> RepairReport:
    """Run preprocess, detection and filling on ``mesh`` in place."""
    cfg = cfg or RepairConfig()
    rep = RepairReport(faces_in=len(mesh.faces), vertices_in=len(mesh.vertices),
                       config=cfg.to_dict(), topology_before=topology_summary(mesh))
    t0 = time.perf_counter()
    rep.preprocess = preprocess(mesh, cfg)
    t1 = time.perf_counter()
    rep.holes = detect_holes(mesh, cfg)
    t2 = time.perf_counter()
    rep.fills = fill_all(mesh, rep.holes, cfg)
    t3 = time.perf_counter()
    rep.timings_ms = {"preprocess": 1e3 * (t1 - t0), "detect": 1e3 * (t2 - t1),
                      "remesh": 1e3 * (t3 - t2), "total": 1e3 * (t3 - t0)}
    rep.faces_out = len(mesh.faces)
    rep.vertices_out = len(mesh.vertices)
    rep.topology_after = topology_summary(mesh)
    return rep
