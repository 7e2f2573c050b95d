"""Tolerances shared by every phase of the repair pipeline.

All lengths are in meters, matching the metric coordinates of LoD2 data.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class RepairConfig:
    eps_distance: float = 0.1  # max vertex-to-plane distance for a virtual triangle to count as covering a face
    eps_area_ratio: float = 0.01  # min overlap/face area ratio for the same test
    eps_duplicate: float = 1e-3  # radius under which two vertices are duplicates
    coplanar_tol: float | None = None  # non-manifold ring completion; defaults to eps_duplicate
    max_completion_iters: int = 64
    area_eps: float = 1e-12  # faces below this area (m^2) are degenerate
    plane_eps: float = 1e-9  # side-of-plane tolerance for triangle/triangle intersection

    def __post_init__(self):
        if self.coplanar_tol is None:
            object.__setattr__(self, "coplanar_tol", self.eps_duplicate)
        for name in ("eps_distance", "eps_area_ratio", "eps_duplicate", "coplanar_tol",
                     "area_eps", "plane_eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.max_completion_iters < 1:
            raise ValueError("max_completion_iters must be >= 1")
        if not self.eps_duplicate < self.eps_distance:
            raise ValueError("eps_duplicate must be smaller than eps_distance")

    def to_dict(self) -> dict:
        return asdict(self)
