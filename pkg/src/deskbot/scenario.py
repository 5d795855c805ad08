"""Scenario files: JSON scene + skill definitions, loading and validation.

A scenario file holds everything an episode needs that is data rather than
code: rooms, walls, objects, the semantic map text, optional camera/noise
overrides, a default start pose, and the manipulation skill definitions.
The canonical two-room office ships as package data (data/office.json).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import geometry as geo
from .errors import ScenarioError
from .skills import ManipulationSkillSpec
from .world import CameraModel, ObjectSpec, Room, SceneMap, Wall

DEFAULT_SCENARIO_NAME = "office"


@dataclass(frozen=True)
class Scenario:
    """A loaded, validated scenario."""

    name: str
    scene: SceneMap
    camera: CameraModel
    sigma_pos: float
    sigma_heading: float
    start_pose: tuple[float, float, float]
    skills: tuple[ManipulationSkillSpec, ...]


def _build_objects(raw: list[dict]) -> tuple[ObjectSpec, ...]:
    objects = []
    for item in raw:
        objects.append(ObjectSpec(
            name=item["name"],
            position=tuple(item["position"]),
            footprint_radius=float(item["footprint_radius"]),
            surface_height=float(item.get("surface_height", 0.0)),
            alignment_direction=tuple(item.get("alignment_direction", (1.0, 0.0))),
            navigable=bool(item.get("navigable", False)),
        ))
    return tuple(objects)


def _build_skills(raw: list[dict]) -> tuple[ManipulationSkillSpec, ...]:
    skills = []
    for item in raw:
        kwargs = dict(item)
        if "pitch_range" in kwargs:
            kwargs["pitch_range"] = tuple(kwargs["pitch_range"])
        skills.append(ManipulationSkillSpec(**kwargs))
    return tuple(skills)


def _mention_count(text: str, name: str) -> int:
    return len(re.findall(rf"(?<![0-9A-Za-z_]){re.escape(name)}(?![0-9A-Za-z_])", text))


def validate_scenario_data(data: dict) -> list[str]:
    """All validation problems with a scenario dict; empty means valid."""
    problems: list[str] = []

    bounds = tuple(data.get("bounds", (20.0, 20.0)))
    if len(bounds) != 2 or bounds[0] <= 0 or bounds[1] <= 0:
        problems.append(f"bad bounds {bounds}")
        return problems

    rooms: list[Room] = []
    for raw in data.get("rooms", []):
        try:
            rooms.append(Room(name=raw["name"], vertices=tuple(tuple(v) for v in raw["vertices"])))
        except (ValueError, KeyError, TypeError) as exc:
            problems.append(f"room {raw.get('name', '?')!r}: {exc}")
    if not rooms:
        problems.append("scenario needs at least one room")

    try:
        objects = _build_objects(data.get("objects", []))
    except (ValueError, KeyError, TypeError) as exc:
        problems.append(f"object: {exc}")
        objects = ()

    walls = []
    for raw in data.get("walls", []):
        try:
            walls.append(Wall(start=tuple(raw[0]), end=tuple(raw[1])))
        except (IndexError, TypeError) as exc:
            problems.append(f"wall {raw!r}: {exc}")

    def in_bounds(p: geo.Point) -> bool:
        return 0.0 <= p[0] <= bounds[0] and 0.0 <= p[1] <= bounds[1]

    for room in rooms:
        if not all(in_bounds(v) for v in room.vertices):
            problems.append(f"room {room.name!r} leaves the scene bounds")
    for wall in walls:
        if not (in_bounds(wall.start) and in_bounds(wall.end)):
            problems.append(f"wall {wall.start}-{wall.end} leaves the scene bounds")

    seen_names: set[str] = set()
    for obj in objects:
        if obj.name in seen_names:
            problems.append(f"duplicate object name {obj.name!r}")
        seen_names.add(obj.name)
        containing = [r for r in rooms if r.contains(obj.position)]
        if len(containing) != 1:
            problems.append(
                f"object {obj.name!r} center lies in {len(containing)} rooms (need exactly 1)")
        elif not geo.circle_in_convex_polygon(obj.position, obj.footprint_radius,
                                              containing[0].vertices):
            problems.append(f"object {obj.name!r} footprint leaves room {containing[0].name!r}")
        if not in_bounds(obj.position):
            problems.append(f"object {obj.name!r} leaves the scene bounds")

    semantic_map = data.get("semantic_map", "")
    if not semantic_map.strip():
        problems.append("semantic_map must be non-empty")
    else:
        for name in [r.name for r in rooms] + [o.name for o in objects]:
            n = _mention_count(semantic_map, name)
            if n != 1:
                problems.append(f"semantic_map mentions {name!r} {n} times (need exactly 1)")

    try:
        skills = _build_skills(data.get("skills", []))
    except (ValueError, KeyError, TypeError) as exc:
        problems.append(f"skill: {exc}")
        skills = ()
    for spec in skills:
        if spec.target not in seen_names:
            problems.append(f"skill {spec.name!r} targets unknown object {spec.target!r}")

    start = data.get("start_pose")
    if start is not None:
        if len(start) != 3:
            problems.append(f"start_pose must be [x, y, heading], got {start!r}")
        elif not any(r.contains((start[0], start[1])) for r in rooms):
            problems.append("start_pose lies outside every room")

    return problems


def scenario_from_data(data: dict, name: str | None = None) -> Scenario:
    problems = validate_scenario_data(data)
    if problems:
        raise ScenarioError("; ".join(problems))
    rooms = tuple(Room(name=r["name"], vertices=tuple(tuple(v) for v in r["vertices"]))
                  for r in data["rooms"])
    walls = tuple(Wall(start=tuple(w[0]), end=tuple(w[1])) for w in data.get("walls", []))
    scene = SceneMap(
        rooms=rooms,
        walls=walls,
        objects=_build_objects(data.get("objects", [])),
        semantic_map=data["semantic_map"],
        bounds=tuple(data.get("bounds", (20.0, 20.0))),
    )
    cam_raw = data.get("camera", {})
    camera = CameraModel(
        hfov=float(cam_raw.get("hfov", math.pi / 2.0)),
        vfov=float(cam_raw.get("vfov", math.pi / 3.0)),
        eye_height=float(cam_raw.get("eye_height", 1.5)),
        max_range=float(cam_raw.get("max_range", 12.0)),
    )
    noise_raw = data.get("noise", {})
    start = data.get("start_pose", (1.0, 1.0, 0.0))
    return Scenario(
        name=name or data.get("name", "unnamed"),
        scene=scene,
        camera=camera,
        sigma_pos=float(noise_raw.get("sigma_pos", 0.02)),
        sigma_heading=float(noise_raw.get("sigma_heading", 0.01)),
        start_pose=(float(start[0]), float(start[1]), float(start[2])),
        skills=_build_skills(data.get("skills", [])),
    )


def load_scenario(path: str | Path | None = None) -> Scenario:
    """Load a scenario file; None loads the packaged office scene."""
    if path is None:
        text = resources.files("deskbot").joinpath("data/office.json").read_text("utf-8")
        data = json.loads(text)
        return scenario_from_data(data, name=DEFAULT_SCENARIO_NAME)
    p = Path(path)
    try:
        data = json.loads(p.read_text("utf-8"))
    except OSError as exc:
        raise ScenarioError(f"cannot read {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{p} is not valid JSON: {exc}") from exc
    return scenario_from_data(data, name=data.get("name", p.stem))


def add_obstacles(scenario: Scenario, count: int, rng, region: tuple[float, float, float, float],
                  radius: float = 0.35, clearance: float = 1.1) -> Scenario:
    """A copy of the scenario with `count` extra obstacle objects.

    Obstacles are sampled uniformly in `region` (x0, y0, x1, y1), rejecting
    spots closer than `clearance` to any existing object or the start pose.
    The semantic map gains one mention per obstacle to keep it complete.
    """
    from dataclasses import replace as dc_replace

    x0, y0, x1, y1 = region
    existing = [o.position for o in scenario.scene.objects]
    existing.append((scenario.start_pose[0], scenario.start_pose[1]))
    new_objects = list(scenario.scene.objects)
    mentions = []
    for i in range(count):
        for _ in range(200):
            p = (rng.uniform(x0, x1), rng.uniform(y0, y1))
            if all(geo.distance(p, q) >= clearance for q in existing):
                break
        else:
            raise ScenarioError("could not place obstacles with required clearance")
        name = f"obstacle_{i + 1}"
        new_objects.append(ObjectSpec(
            name=name, position=p, footprint_radius=radius,
            surface_height=0.0, alignment_direction=(1.0, 0.0), navigable=False,
        ))
        existing.append(p)
        mentions.append(f"A movable {name} stands in the walkway.")
    scene = dc_replace(
        scenario.scene,
        objects=tuple(new_objects),
        semantic_map=scenario.scene.semantic_map + " " + " ".join(mentions),
    )
    return dc_replace(scenario, scene=scene)
