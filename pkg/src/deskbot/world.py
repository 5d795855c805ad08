"""Scene model, robot state, and the deterministic world step.

Conventions used throughout the package:

* world frame: x right, y up, angles CCW-positive in (-pi, pi];
* head yaw is CCW-positive relative to the body heading;
* head pitch is downward-positive (0 = level, 1.2 = steep down);
* image coordinates are normalized [0, 1], u grows to the right,
  v grows downward, so an object left of the optical axis lands at u < 0.5.

The simulation advances in fixed 0.2 s ticks. One locomotion tick applies
one joystick command integration plus one noise draw.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

from . import geometry as geo
from .errors import InvalidCommand, UnknownObject

SIM_TICK_S = 0.2

# Joystick envelope. Skills operate well below these caps.
MAX_FORWARD_MPS = 0.5
MAX_LATERAL_MPS = 0.3
MAX_TURN_RPS = 0.6

HEAD_PITCH_MIN = 0.0
HEAD_PITCH_MAX = 1.2
HEAD_YAW_LIMIT = 1.2

# Nominal vertical extent of every object above its resting surface.
OBJECT_HEIGHT_M = 0.3

# How far short of a wall a clamped move stops.
WALL_PULLBACK_M = 0.001

MODE_STANDING = "standing"
MODE_WALKING = "walking"


@dataclass(frozen=True)
class ObjectSpec:
    """A named physical object or landmark.

    surface_height is the height of the object's own base above the floor:
    0 for floor-standing landmarks, >0 for items resting on furniture.
    alignment_direction is the unit heading the robot should face when
    manipulating the object.
    """

    name: str
    position: geo.Point
    footprint_radius: float
    surface_height: float = 0.0
    alignment_direction: geo.Point = (1.0, 0.0)
    navigable: bool = False

    def __post_init__(self):
        if not self.name:
            raise ValueError("object needs a non-empty name")
        if self.footprint_radius <= 0.0:
            raise ValueError(f"{self.name}: footprint_radius must be > 0")
        if self.surface_height < 0.0:
            raise ValueError(f"{self.name}: surface_height must be >= 0")
        n = geo.norm(self.alignment_direction)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"{self.name}: alignment_direction must be unit length")

    @property
    def alignment_heading(self) -> float:
        return math.atan2(self.alignment_direction[1], self.alignment_direction[0])


@dataclass(frozen=True)
class Room:
    """Named convex region, vertices in CCW order."""

    name: str
    vertices: tuple[geo.Point, ...]

    def __post_init__(self):
        if not geo.is_convex_ccw(self.vertices):
            raise ValueError(f"room {self.name!r}: vertices must be convex and CCW")

    def contains(self, p: geo.Point) -> bool:
        return geo.point_in_convex_polygon(p, self.vertices)


@dataclass(frozen=True)
class Wall:
    """An opaque, impassable line segment."""

    start: geo.Point
    end: geo.Point


@dataclass(frozen=True)
class SceneMap:
    """Immutable scene: rooms, walls, objects, and a semantic summary."""

    rooms: tuple[Room, ...]
    walls: tuple[Wall, ...]
    objects: tuple[ObjectSpec, ...]
    semantic_map: str
    bounds: tuple[float, float] = (20.0, 20.0)

    def object(self, name: str) -> ObjectSpec:
        for obj in self.objects:
            if obj.name == name:
                return obj
        raise UnknownObject(name)

    def has_object(self, name: str) -> bool:
        return any(o.name == name for o in self.objects)

    def room_of(self, p: geo.Point) -> Room | None:
        for room in self.rooms:
            if room.contains(p):
                return room
        return None

    def boundary_walls(self) -> tuple[Wall, ...]:
        w, h = self.bounds
        return (
            Wall((0.0, 0.0), (w, 0.0)),
            Wall((w, 0.0), (w, h)),
            Wall((w, h), (0.0, h)),
            Wall((0.0, h), (0.0, 0.0)),
        )


@dataclass(frozen=True)
class RobotState:
    """Robot pose and discrete status. Value-semantic: every step returns a new one."""

    x: float
    y: float
    heading: float
    head_yaw: float = 0.0
    head_pitch: float = 0.0
    held_item: str | None = None
    mode: str = MODE_STANDING

    def __post_init__(self):
        if not (HEAD_PITCH_MIN <= self.head_pitch <= HEAD_PITCH_MAX):
            raise ValueError(f"head_pitch {self.head_pitch} outside [{HEAD_PITCH_MIN}, {HEAD_PITCH_MAX}]")
        if abs(self.head_yaw) > HEAD_YAW_LIMIT:
            raise ValueError(f"head_yaw {self.head_yaw} outside +/-{HEAD_YAW_LIMIT}")

    @property
    def position(self) -> geo.Point:
        return (self.x, self.y)

    @property
    def camera_axis_yaw(self) -> float:
        return geo.wrap_angle(self.heading + self.head_yaw)


@dataclass(frozen=True)
class JoystickCommand:
    """Body-frame velocity command held for a fixed duration.

    v_lateral is leftward-positive, omega is CCW-positive.
    """

    v_forward: float = 0.0
    v_lateral: float = 0.0
    omega: float = 0.0
    duration_s: float = SIM_TICK_S

    def __post_init__(self):
        if abs(self.v_forward) > MAX_FORWARD_MPS + 1e-9:
            raise InvalidCommand(f"|v_forward| {abs(self.v_forward):.3f} exceeds {MAX_FORWARD_MPS}")
        if abs(self.v_lateral) > MAX_LATERAL_MPS + 1e-9:
            raise InvalidCommand(f"|v_lateral| {abs(self.v_lateral):.3f} exceeds {MAX_LATERAL_MPS}")
        if abs(self.omega) > MAX_TURN_RPS + 1e-9:
            raise InvalidCommand(f"|omega| {abs(self.omega):.3f} exceeds {MAX_TURN_RPS}")
        if self.duration_s <= 0.0:
            raise InvalidCommand("duration_s must be > 0")

    @property
    def is_moving(self) -> bool:
        return self.v_forward != 0.0 or self.v_lateral != 0.0 or self.omega != 0.0


@dataclass
class NoiseModel:
    """Gaussian per-tick actuation noise, deterministic per seed.

    Sigmas are per 0.2 s tick. A zero sigma consumes no randomness for that
    component, so disabling noise never perturbs the stream layout of the rest.
    """

    sigma_pos: float = 0.02
    sigma_heading: float = 0.01
    seed: int = 0
    _rng: random.Random = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._rng = random.Random(self.seed)

    def draw(self) -> tuple[float, float, float]:
        dx = self._rng.gauss(0.0, self.sigma_pos) if self.sigma_pos > 0.0 else 0.0
        dy = self._rng.gauss(0.0, self.sigma_pos) if self.sigma_pos > 0.0 else 0.0
        dh = self._rng.gauss(0.0, self.sigma_heading) if self.sigma_heading > 0.0 else 0.0
        return dx, dy, dh

    @staticmethod
    def silent() -> "NoiseModel":
        return NoiseModel(sigma_pos=0.0, sigma_heading=0.0, seed=0)


@dataclass(frozen=True)
class CameraModel:
    """Head-mounted pinhole camera approximation."""

    hfov: float = math.pi / 2.0
    vfov: float = math.pi / 3.0
    eye_height: float = 1.5
    max_range: float = 12.0


@dataclass(frozen=True)
class Detection:
    """One detected object: normalized bbox plus ground-plane distance."""

    label: str
    bbox: tuple[float, float, float, float]  # u_min, v_min, u_max, v_max
    depth: float

    def __post_init__(self):
        u_min, v_min, u_max, v_max = self.bbox
        if not (0.0 <= u_min < u_max <= 1.0 and 0.0 <= v_min < v_max <= 1.0):
            raise ValueError(f"degenerate bbox {self.bbox}")
        if self.depth <= 0.0:
            raise ValueError("depth must be > 0")

    @property
    def u_center(self) -> float:
        return 0.5 * (self.bbox[0] + self.bbox[2])

    @property
    def v_center(self) -> float:
        return 0.5 * (self.bbox[1] + self.bbox[3])


@dataclass(frozen=True)
class CollisionEvent:
    """A clamped move: where the robot stopped and what it ran into."""

    position: geo.Point
    blocker: str  # wall description or "bounds"


@dataclass(frozen=True)
class ObstacleInfo:
    """Nearest blocking geometry on the forward ray."""

    kind: str  # "wall" | "object"
    label: str
    distance: float
    side: str  # "left" | "right": which side of the ray its bulk lies on


def _clamp_against_walls(
    scene: SceneMap, start: geo.Point, end: geo.Point
) -> tuple[geo.Point, str | None]:
    """Clamp the move start->end at the first wall or bounds crossing."""
    if start == end:
        return end, None
    best_t: float | None = None
    blocker = None
    for wall, name in [(w, "wall") for w in scene.walls] + [
        (w, "bounds") for w in scene.boundary_walls()
    ]:
        t = geo.segment_intersection_param(start, end, wall.start, wall.end)
        if t is not None and (best_t is None or t < best_t):
            best_t = t
            blocker = name
    if best_t is None:
        return end, None
    move_len = geo.distance(start, end)
    stop = max(best_t * move_len - WALL_PULLBACK_M, 0.0)
    direction = geo.scale(geo.sub(end, start), 1.0 / move_len)
    return geo.add(start, geo.scale(direction, stop)), blocker


def step_locomotion(
    state: RobotState,
    cmd: JoystickCommand,
    noise: NoiseModel,
    scene: SceneMap | None = None,
) -> tuple[RobotState, CollisionEvent | None]:
    """Integrate one joystick command and apply one noise draw.

    The body-frame displacement uses the heading at the start of the command
    (single Euler step over the full duration); the heading then advances by
    omega * duration. When a scene is given, both the commanded displacement
    and the noise displacement are clamped at the first wall crossing and the
    clamp is reported as a CollisionEvent.
    """
    t = cmd.duration_s
    c, s = math.cos(state.heading), math.sin(state.heading)
    dx_b, dy_b = cmd.v_forward * t, cmd.v_lateral * t
    target = (state.x + dx_b * c - dy_b * s, state.y + dx_b * s + dy_b * c)
    collision = None
    if scene is not None:
        target, blocker = _clamp_against_walls(scene, state.position, target)
        if blocker is not None:
            collision = CollisionEvent(position=target, blocker=blocker)
    heading = geo.wrap_angle(state.heading + cmd.omega * t)

    nx, ny, nh = noise.draw()
    if nx != 0.0 or ny != 0.0:
        noisy = (target[0] + nx, target[1] + ny)
        if scene is not None:
            noisy, blocker = _clamp_against_walls(scene, target, noisy)
            if blocker is not None and collision is None:
                collision = CollisionEvent(position=noisy, blocker=blocker)
        target = noisy
    heading = geo.wrap_angle(heading + nh)

    new_state = replace(
        state,
        x=target[0],
        y=target[1],
        heading=heading,
        mode=MODE_WALKING if cmd.is_moving else MODE_STANDING,
    )
    return new_state, collision


def relative_angle_and_distance(state: RobotState, obj: ObjectSpec) -> tuple[float, float]:
    """CCW-positive bearing from the body heading, and planar distance."""
    dx = obj.position[0] - state.x
    dy = obj.position[1] - state.y
    angle = geo.wrap_angle(math.atan2(dy, dx) - state.heading)
    return angle, math.hypot(dx, dy)


def _line_of_sight_clear(scene: SceneMap, a: geo.Point, b: geo.Point) -> bool:
    for wall in scene.walls:
        if geo.segment_intersection_param(a, b, wall.start, wall.end) is not None:
            return False
    return True


def project_detections(
    state: RobotState, scene: SceneMap, cam: CameraModel
) -> list[Detection]:
    """Geometric detection oracle.

    An object is detected when its center direction falls within the camera
    frustum, it is within range, and no wall blocks the line of sight
    (objects never occlude each other). Returned bboxes are clamped to the
    image; depth is the planar distance to the object center.
    """
    axis_yaw = state.heading + state.head_yaw
    out: list[Detection] = []
    for obj in scene.objects:
        dx = obj.position[0] - state.x
        dy = obj.position[1] - state.y
        dist = math.hypot(dx, dy)
        if dist < 1e-9 or dist > cam.max_range:
            continue
        h_off = geo.wrap_angle(math.atan2(dy, dx) - axis_yaw)
        if abs(h_off) > cam.hfov / 2.0 + 1e-12:
            continue
        center_z = obj.surface_height + OBJECT_HEIGHT_M / 2.0
        elev = math.atan2(center_z - cam.eye_height, dist)
        v_off = elev + state.head_pitch  # camera axis sits at elevation -pitch
        if abs(v_off) > cam.vfov / 2.0 + 1e-12:
            continue
        if not _line_of_sight_clear(scene, state.position, obj.position):
            continue

        half_w = math.asin(min(obj.footprint_radius / dist, 1.0))
        u_c = 0.5 - h_off / cam.hfov
        u_min = max(u_c - half_w / cam.hfov, 0.0)
        u_max = min(u_c + half_w / cam.hfov, 1.0)
        elev_top = math.atan2(obj.surface_height + OBJECT_HEIGHT_M - cam.eye_height, dist)
        elev_bot = math.atan2(obj.surface_height - cam.eye_height, dist)
        v_min = max(0.5 - (elev_top + state.head_pitch) / cam.vfov, 0.0)
        v_max = min(0.5 - (elev_bot + state.head_pitch) / cam.vfov, 1.0)
        if u_min >= u_max or v_min >= v_max:
            continue  # extent entirely clipped despite center in frustum
        out.append(Detection(label=obj.name, bbox=(u_min, v_min, u_max, v_max), depth=dist))
    return out


def check_obstacle(
    state: RobotState,
    scene: SceneMap,
    lookahead: float,
    ignore: frozenset[str] | set[str] = frozenset(),
) -> ObstacleInfo | None:
    """Nearest wall or object footprint crossing the forward ray.

    `ignore` lists object names that never count (typically the current
    navigation target). Side reports where the obstacle's bulk lies
    relative to the heading, for choosing a sidestep direction.
    """
    origin = state.position
    direction = geo.heading_vector(state.heading)
    hits: list[ObstacleInfo] = []
    for obj in scene.objects:
        if obj.name in ignore:
            continue
        d = geo.ray_circle_distance(origin, direction, obj.position, obj.footprint_radius, lookahead)
        if d is None:
            continue
        side = "left" if geo.cross(direction, geo.sub(obj.position, origin)) >= 0.0 else "right"
        hits.append(ObstacleInfo(kind="object", label=obj.name, distance=d, side=side))
    for wall in scene.walls:
        d = geo.ray_segment_distance(origin, direction, wall.start, wall.end, lookahead)
        if d is None:
            continue
        mid = geo.scale(geo.add(wall.start, wall.end), 0.5)
        side = "left" if geo.cross(direction, geo.sub(mid, origin)) >= 0.0 else "right"
        hits.append(ObstacleInfo(kind="wall", label="wall", distance=d, side=side))
    if not hits:
        return None
    hits.sort(key=lambda h: (h.distance, h.kind, h.label))
    return hits[0]


class SimWorld:
    """Mutable episode world: scene + robot + clock + event sink.

    All simulated time flows through `advance`, which emits exactly one
    event per charge; the episode ledger closes by construction. Object
    mutations (grasp/place) rebuild the immutable SceneMap so the pure ops
    above always see a consistent scene.
    """

    def __init__(
        self,
        scene: SceneMap,
        state: RobotState,
        noise: NoiseModel,
        camera: CameraModel,
        camera_mode: str = "active",
        fixed_pitch: float | None = None,
        sink=None,
    ):
        if camera_mode not in ("active", "fixed"):
            raise ValueError(f"camera_mode {camera_mode!r}")
        if camera_mode == "fixed":
            if fixed_pitch is None:
                raise ValueError("fixed camera mode needs a pitch")
            state = replace(state, head_yaw=0.0, head_pitch=fixed_pitch)
        self.scene = scene
        self.state = state
        self.noise = noise
        self.camera = camera
        self.camera_mode = camera_mode
        self.fixed_pitch = fixed_pitch
        self.sim_time = 0.0
        self.facts: set[str] = set()
        self._held_spec: ObjectSpec | None = None
        self._sink = sink

    # -- time & events -------------------------------------------------

    def advance(self, kind: str, duration_s: float, payload: dict) -> None:
        self.sim_time += duration_s
        self.emit(kind, duration_s, payload)

    def emit(self, kind: str, duration_s: float, payload: dict) -> None:
        if self._sink is not None:
            self._sink(self.sim_time, kind, duration_s, payload)

    # -- motion --------------------------------------------------------

    def step_tick(self, cmd: JoystickCommand) -> CollisionEvent | None:
        """Apply one command tick. Advances no time; callers charge skills whole."""
        self.state, collision = step_locomotion(self.state, cmd, self.noise, self.scene)
        if collision is not None:
            self.emit("collision", 0.0, {"blocker": collision.blocker,
                                         "x": collision.position[0],
                                         "y": collision.position[1]})
        return collision

    def set_head(self, yaw: float | None = None, pitch: float | None = None) -> None:
        """Move the head. Silently ignored when the camera is fixed."""
        if self.camera_mode == "fixed":
            return
        new_yaw = self.state.head_yaw if yaw is None else max(-HEAD_YAW_LIMIT, min(HEAD_YAW_LIMIT, yaw))
        new_pitch = self.state.head_pitch if pitch is None else max(HEAD_PITCH_MIN, min(HEAD_PITCH_MAX, pitch))
        self.state = replace(self.state, head_yaw=new_yaw, head_pitch=new_pitch)

    # -- sensing -------------------------------------------------------

    def detect(self, quiet: bool = False) -> list[Detection]:
        dets = project_detections(self.state, self.scene, self.camera)
        if not quiet:
            self.emit("detection", 0.0, {"labels": [d.label for d in dets]})
        return dets

    # -- object bookkeeping ---------------------------------------------

    def object(self, name: str) -> ObjectSpec:
        return self.scene.object(name)

    def has_object(self, name: str) -> bool:
        return self.scene.has_object(name)

    def move_object(self, name: str, position: geo.Point, surface_height: float | None = None) -> None:
        obj = self.scene.object(name)
        updated = replace(
            obj,
            position=position,
            surface_height=obj.surface_height if surface_height is None else surface_height,
        )
        self._replace_objects(tuple(updated if o.name == name else o for o in self.scene.objects))

    def remove_object(self, name: str) -> ObjectSpec:
        obj = self.scene.object(name)
        self._replace_objects(tuple(o for o in self.scene.objects if o.name != name))
        return obj

    def add_object(self, obj: ObjectSpec) -> None:
        self._replace_objects(self.scene.objects + (obj,))

    def grasp(self, name: str) -> None:
        self._held_spec = self.remove_object(name)
        self.state = replace(self.state, held_item=name)

    def place_held(self, position: geo.Point, surface_height: float, alignment: geo.Point) -> str:
        held = self.state.held_item
        if held is None:
            raise UnknownObject("nothing held")
        spec = self._held_spec
        radius = spec.footprint_radius if spec is not None and spec.name == held else 0.06
        self.add_object(ObjectSpec(
            name=held, position=position, footprint_radius=radius,
            surface_height=surface_height, alignment_direction=alignment, navigable=False,
        ))
        self.state = replace(self.state, held_item=None)
        self._held_spec = None
        return held

    def _replace_objects(self, objects: tuple[ObjectSpec, ...]) -> None:
        self.scene = replace(self.scene, objects=objects)
