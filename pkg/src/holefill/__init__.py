"""Hole detection and filling for defect-laden LoD2 building meshes."""

from .config import RepairConfig
from .holedetect import BorderRing, HoleSet, detect_holes, intersection_test
from .mesh import SurfaceMesh, euler_and_borders, load_obj, read_obj, save_obj, write_obj
from .pipeline import RepairReport, repair
from .preprocess import preprocess
from .remesh import FillResult, fill_all, fill_hole

__all__ = [
    "RepairConfig", "SurfaceMesh", "BorderRing", "HoleSet", "FillResult", "RepairReport",
    "load_obj", "save_obj", "read_obj", "write_obj", "euler_and_borders",
    "preprocess", "detect_holes", "intersection_test", "fill_hole", "fill_all", "repair",
]
