"""Shared builders for the test suite: bare scenes, worlds, event capture."""

from __future__ import annotations

import math

from deskbot.world import (
    CameraModel,
    NoiseModel,
    ObjectSpec,
    RobotState,
    Room,
    SceneMap,
    SimWorld,
    Wall,
)

DEFAULT_CAMERA = CameraModel(math.pi / 2, math.pi / 3, 1.5, 12.0)


def square_room(x0: float, y0: float, x1: float, y1: float, name: str = "room") -> Room:
    return Room(name=name, vertices=((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def obj(name, x, y, r=0.3, sh=0.0, align=(1.0, 0.0), navigable=False) -> ObjectSpec:
    return ObjectSpec(
        name=name,
        position=(x, y),
        footprint_radius=r,
        surface_height=sh,
        alignment_direction=align,
        navigable=navigable,
    )


def make_scene(objects=(), walls=(), rooms=None, bounds=(20.0, 20.0),
               semantic="A test scene.") -> SceneMap:
    if rooms is None:
        rooms = (square_room(0.0, 0.0, bounds[0], bounds[1]),)
    return SceneMap(
        rooms=tuple(rooms),
        walls=tuple(Wall(start=w[0], end=w[1]) if not isinstance(w, Wall) else w
                    for w in walls),
        objects=tuple(objects),
        semantic_map=semantic,
        bounds=bounds,
    )


class EventLog:
    """Callable sink that records every emitted event in order."""

    def __init__(self):
        self.rows = []

    def __call__(self, sim_time, kind, duration_s, payload):
        self.rows.append((sim_time, kind, duration_s, payload))

    def of(self, kind):
        return [row for row in self.rows if row[1] == kind]

    def kinds(self):
        return [row[1] for row in self.rows]

    def skills(self):
        return [row[3]["skill"] for row in self.of("skill")]


def make_world(scene=None, x=5.0, y=5.0, heading=0.0, head_yaw=0.0, head_pitch=0.0,
               held=None, sigma_pos=0.0, sigma_heading=0.0, noise_seed=0,
               camera_mode="active", fixed_pitch=None, sink=None) -> SimWorld:
    if scene is None:
        scene = make_scene()
    state = RobotState(x=x, y=y, heading=heading, head_yaw=head_yaw,
                       head_pitch=head_pitch, held_item=held)
    noise = NoiseModel(sigma_pos=sigma_pos, sigma_heading=sigma_heading,
                       seed=noise_seed)
    return SimWorld(scene, state, noise, DEFAULT_CAMERA,
                    camera_mode=camera_mode, fixed_pitch=fixed_pitch, sink=sink)
