"""Smart-camera networks: pan/tilt/zoom cameras observing moving targets.

The field of view is an annular wedge. Its half-angle is ``180 / zoom``
degrees around the pan direction (pan 0 points along +x, angles grow
counter-clockwise). Tilt selects a radial band of width ``R/3`` inside the
camera's range ``R``: tilt 180 gives ``[0, R/3]``, tilt 120 gives
``[2R/3, R]`` and intermediate tilts slide linearly between the two.
A target inside the wedge is visible unless the segment from the camera to
it touches a pillar.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import kernels
from ..config import ConfigurationSpace, discrete, interval
from ..errors import UsageError

PAN_RANGE = (0.0, 360.0)
TILT_RANGE = (120.0, 180.0)
ZOOM_RANGE = (12.0, 18.0)
PAN_LEVELS = tuple(float(p) for p in range(0, 360, 30))
TILT_LEVELS = (120.0, 150.0, 180.0)
ZOOM_LEVELS = (12.0, 18.0)
SCENARIO_IDS = ("SCN1", "SCN2", "SCN3")


@dataclass(frozen=True)
class CameraConfig:
    pan: float
    tilt: float
    zoom: float

    def validate(self) -> "CameraConfig":
        if not PAN_RANGE[0] <= self.pan < PAN_RANGE[1]:
            raise UsageError(f"pan {self.pan} outside [0, 360)")
        if not TILT_RANGE[0] <= self.tilt <= TILT_RANGE[1]:
            raise UsageError(f"tilt {self.tilt} outside [120, 180]")
        if not ZOOM_RANGE[0] <= self.zoom <= ZOOM_RANGE[1]:
            raise UsageError(f"zoom {self.zoom} outside [12, 18]")
        return self


@dataclass(frozen=True)
class CameraGeometry:
    camera_id: str
    x: float
    y: float
    range_radius: float


@dataclass(frozen=True)
class Stream:
    """Targets entering on the segment ``start``-``end`` and moving along ``direction``.

    Every ``spawn_interval`` steps (offset by ``phase``) ``per_spawn``
    targets appear at points ``start + (end - start) * k / grid`` with ``k``
    drawn uniformly from ``0..grid``. A target lives for at most ``lifetime``
    steps (0 = until it leaves the arena).
    """

    name: str
    start: tuple
    end: tuple
    direction: tuple
    spawn_interval: int = 10
    per_spawn: int = 1
    phase: int = 0
    grid: int = 8
    lifetime: int = 0


@dataclass(frozen=True)
class Layout:
    scenario_id: str
    cameras: tuple
    streams: tuple
    arena: tuple
    pillars: tuple = ()
    speed: float = 1.0
    description: str = ""

    def camera(self, camera_id: str) -> CameraGeometry:
        for c in self.cameras:
            if c.camera_id == camera_id:
                return c
        raise UsageError(f"unknown camera {camera_id!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cameras"] = [asdict(c) for c in self.cameras]
        d["streams"] = [asdict(s) for s in self.streams]
        return _lists(d)

    @classmethod
    def from_dict(cls, d: dict) -> "Layout":
        try:
            cams = tuple(CameraGeometry(**c) for c in d["cameras"])
            streams = tuple(Stream(**{**s, "start": tuple(s["start"]), "end": tuple(s["end"]),
                                      "direction": tuple(s["direction"])}) for s in d["streams"])
            return cls(str(d["scenario_id"]), cams, streams, tuple(d["arena"]),
                       tuple(tuple(p) for p in d.get("pillars", ())), float(d.get("speed", 1.0)),
                       str(d.get("description", "")))
        except (KeyError, TypeError) as exc:
            raise UsageError(f"malformed layout: {exc}") from exc


def _lists(obj):
    if isinstance(obj, dict):
        return {k: _lists(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_lists(v) for v in obj]
    return obj


def load_layout(name_or_path) -> Layout:
    """Canonical layout by scenario id (``SCN1``..``SCN3``) or a layout JSON file."""
    if str(name_or_path).upper() in SCENARIO_IDS:
        text = resources.files("mutinf.env").joinpath("layouts", f"{str(name_or_path).lower()}.json").read_text()
        return Layout.from_dict(json.loads(text))
    path = Path(name_or_path)
    if not path.is_file():
        raise UsageError(f"unknown scenario or layout file: {name_or_path}")
    try:
        return Layout.from_dict(json.loads(path.read_text()))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def dump_layout(layout: Layout) -> str:
    return json.dumps(layout.to_dict(), indent=2) + "\n"


@dataclass(frozen=True)
class FieldOfView:
    x: float
    y: float
    ux: float
    uy: float
    half_angle: float
    r_near: float
    r_far: float
    pillars: tuple = ()

    @property
    def cos_half(self) -> float:
        return math.cos(math.radians(self.half_angle))

    @property
    def area(self) -> float:
        """Area of the annular wedge, ignoring occlusion."""
        return math.radians(self.half_angle) * (self.r_far ** 2 - self.r_near ** 2)

    def visible(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        _, vis = kernels.scn_visibility(
            [self.x], [self.y], [self.ux], [self.uy], [self.cos_half], [self.r_near], [self.r_far],
            pts[:, 0], pts[:, 1], self.pillars,
        )
        return vis[0].astype(bool)


def band(tilt: float, range_radius: float):
    """Radial band ``(r_near, r_far)`` selected by ``tilt``."""
    r_near = (TILT_RANGE[1] - tilt) / (TILT_RANGE[1] - TILT_RANGE[0]) * (2.0 * range_radius / 3.0)
    return r_near, r_near + range_radius / 3.0


def camera_fov(config: CameraConfig, geom: CameraGeometry, pillars: Sequence = ()) -> FieldOfView:
    config.validate()
    rad = math.radians(config.pan)
    r_near, r_far = band(config.tilt, geom.range_radius)
    return FieldOfView(geom.x, geom.y, math.cos(rad), math.sin(rad), 180.0 / config.zoom,
                       r_near, r_far, tuple(tuple(p) for p in pillars))


def camera_space(mode: str) -> ConfigurationSpace:
    if mode == "discrete":
        return ConfigurationSpace((discrete("PAN", PAN_LEVELS), discrete("TILT", TILT_LEVELS),
                                   discrete("ZOOM", ZOOM_LEVELS)))
    if mode == "continuous":
        return ConfigurationSpace((interval("PAN", *PAN_RANGE, grid=PAN_LEVELS, wraps=True),
                                   interval("TILT", *TILT_RANGE, grid=TILT_LEVELS),
                                   interval("ZOOM", *ZOOM_RANGE, grid=ZOOM_LEVELS)))
    raise UsageError(f"camera mode must be 'discrete' or 'continuous', got {mode!r}")


def overlap_graph(layout: Layout, resolution: float = 0.25) -> set:
    """Camera pairs sharing a grid point that both can see from some configuration.

    A point counts for a camera when it lies within the range radius and the
    line of sight is free of pillars.
    """
    xmin, ymin, xmax, ymax = layout.arena
    xs = np.arange(xmin, xmax + resolution / 2, resolution)
    ys = np.arange(ymin, ymax + resolution / 2, resolution)
    gx, gy = np.meshgrid(xs, ys)
    gx = gx.ravel()
    gy = gy.ravel()
    n = len(layout.cameras)
    # full circle of view: cos(180 deg) = -1 accepts every direction
    _, vis = kernels.scn_visibility(
        [c.x for c in layout.cameras], [c.y for c in layout.cameras], np.ones(n), np.zeros(n),
        -np.ones(n), np.zeros(n), [c.range_radius for c in layout.cameras], gx, gy, layout.pillars,
    )
    vis = vis.astype(bool)
    out = set()
    for i in range(n):
        for j in range(i + 1, n):
            if np.any(vis[i] & vis[j]):
                out.add((layout.cameras[i].camera_id, layout.cameras[j].camera_id))
    return out


class CameraScenario:
    """Cameras of a layout observing targets; reward = targets also seen by another camera."""

    def __init__(self, layout, mode: str = "continuous", seed: int = 0):
        self.layout = layout if isinstance(layout, Layout) else load_layout(layout)
        self.scenario_id = self.layout.scenario_id
        self.mode = mode
        self._space = camera_space(mode)
        self.agent_ids = tuple(c.camera_id for c in self.layout.cameras)
        self._cam_x = np.array([c.x for c in self.layout.cameras])
        self._cam_y = np.array([c.y for c in self.layout.cameras])
        self._radius = np.array([c.range_radius for c in self.layout.cameras])
        self._pillars = np.asarray(self.layout.pillars, dtype=np.float64).reshape(-1, 4)
        self.reset(seed)

    def reset(self, seed: int = 0) -> None:
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.t = 0
        self.tx = np.zeros(0)
        self.ty = np.zeros(0)
        self.vx = np.zeros(0)
        self.vy = np.zeros(0)
        self.age = np.zeros(0, dtype=np.int64)
        self.life = np.zeros(0, dtype=np.int64)
        self.last_visibility = np.zeros((len(self.agent_ids), 0), dtype=np.uint8)

    def space(self, agent_id: str) -> ConfigurationSpace:
        if agent_id not in self.agent_ids:
            raise UsageError(f"unknown camera {agent_id!r}")
        return self._space

    def influences(self) -> set:
        pairs = overlap_graph(self.layout)
        return pairs | {(b, a) for a, b in pairs}

    @property
    def n_targets(self) -> int:
        return self.tx.shape[0]

    def advance_targets(self) -> None:
        """Move live targets, drop the ones that left or expired, then spawn new ones."""
        self.tx = self.tx + self.vx
        self.ty = self.ty + self.vy
        self.age = self.age + 1
        xmin, ymin, xmax, ymax = self.layout.arena
        keep = (self.tx >= xmin) & (self.tx <= xmax) & (self.ty >= ymin) & (self.ty <= ymax)
        keep &= (self.life == 0) | (self.age < self.life)
        self.tx, self.ty, self.vx, self.vy = self.tx[keep], self.ty[keep], self.vx[keep], self.vy[keep]
        self.age, self.life = self.age[keep], self.life[keep]
        new = []
        for s in self.layout.streams:
            if (self.t - s.phase) % s.spawn_interval != 0:
                continue
            ks = self.rng.integers(0, s.grid + 1, size=s.per_spawn)
            norm = math.hypot(*s.direction)
            vx = s.direction[0] / norm * self.layout.speed
            vy = s.direction[1] / norm * self.layout.speed
            for k in ks:
                frac = k / s.grid
                new.append((s.start[0] + (s.end[0] - s.start[0]) * frac,
                            s.start[1] + (s.end[1] - s.start[1]) * frac, vx, vy, s.lifetime))
        if new:
            arr = np.array(new, dtype=np.float64)
            self.tx = np.concatenate([self.tx, arr[:, 0]])
            self.ty = np.concatenate([self.ty, arr[:, 1]])
            self.vx = np.concatenate([self.vx, arr[:, 2]])
            self.vy = np.concatenate([self.vy, arr[:, 3]])
            self.age = np.concatenate([self.age, np.zeros(len(new), dtype=np.int64)])
            self.life = np.concatenate([self.life, arr[:, 4].astype(np.int64)])
        self.t += 1

    def rewards_for(self, configs: Sequence[CameraConfig]) -> np.ndarray:
        """Per-camera rewards for the current targets without advancing time."""
        if len(configs) != len(self.agent_ids):
            raise UsageError(f"expected {len(self.agent_ids)} camera configurations")
        pan = np.empty(len(configs))
        tilt = np.empty(len(configs))
        zoom = np.empty(len(configs))
        for i, c in enumerate(configs):
            c.validate()
            pan[i], tilt[i], zoom[i] = c.pan, c.tilt, c.zoom
        rad = np.radians(pan)
        r_near = (TILT_RANGE[1] - tilt) / (TILT_RANGE[1] - TILT_RANGE[0]) * (2.0 * self._radius / 3.0)
        rewards, vis = kernels.scn_visibility(
            self._cam_x, self._cam_y, np.cos(rad), np.sin(rad), np.cos(np.radians(180.0 / zoom)),
            r_near, r_near + self._radius / 3.0, self.tx, self.ty, self._pillars,
        )
        self.last_visibility = vis
        return rewards

    def step(self, joint) -> dict:
        """Advance the targets one step and reward the joint configuration ``joint[camera] = (pan, tilt, zoom)``."""
        configs = [CameraConfig(*map(float, joint[a])) for a in self.agent_ids]
        self.advance_targets()
        rewards = self.rewards_for(configs)
        return {a: int(r) for a, r in zip(self.agent_ids, rewards)}


def scn_step(scenario: CameraScenario, joint) -> dict:
    return scenario.step(joint)


def scn_layout(scenario_id: str) -> Layout:
    if str(scenario_id).upper() not in SCENARIO_IDS:
        raise UsageError(f"unknown scenario id {scenario_id!r}")
    return load_layout(scenario_id)
