"""Deterministic simulators: box, two-man saw and smart-camera networks."""

from ..errors import UsageError
from .camera import (CameraConfig, CameraGeometry, CameraScenario, FieldOfView, Layout, Stream,
                     camera_fov, camera_space, dump_layout, load_layout, overlap_graph, scn_layout,
                     scn_step, SCENARIO_IDS)
from .robots import MODE, PULL, PUSH, RobotScenario, box_step, saw_step

__all__ = [
    "CameraConfig", "CameraGeometry", "CameraScenario", "FieldOfView", "Layout", "Stream",
    "camera_fov", "camera_space", "dump_layout", "load_layout", "overlap_graph", "scn_layout",
    "scn_step", "MODE", "PULL", "PUSH", "RobotScenario", "box_step", "saw_step", "make_scenario",
    "SCENARIO_IDS",
]


def make_scenario(scenario_id: str, mode: str = "continuous", seed: int = 0, layout=None):
    """Scenario instance for ``box``, ``saw`` or ``SCN1``..``SCN3``."""
    sid = str(scenario_id)
    if sid.lower() in ("box", "saw"):
        return RobotScenario(sid.lower(), seed)
    if sid.upper() in SCENARIO_IDS:
        return CameraScenario(layout if layout is not None else load_layout(sid.upper()), mode, seed)
    raise UsageError(f"unknown scenario {scenario_id!r}")
