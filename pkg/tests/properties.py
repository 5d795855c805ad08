"""Randomized property drivers shared by module tests and the acceptance gate.

Each driver takes (n, seed) so module tests can smoke it cheaply while the
acceptance suite runs it at full width. All randomness flows through
random.Random instances seeded from the arguments; nothing here is flaky.
"""

from __future__ import annotations

import keyword
import math
import random

from deskbot import connector as con
from deskbot import geometry as geo
from deskbot.agent.parsing import SkillCall, format_skill_call, parse_action_call
from deskbot.skills import (
    ManipulationSkillSpec,
    execute_manipulation_skill,
    unmet_preconditions,
)
from deskbot.world import NoiseModel, RobotState, SimWorld, project_detections

from support import DEFAULT_CAMERA, make_scene, obj, square_room

# --------------------------------------------------------------------------
# scene fuzzing


def _trial_seed(seed: int, index: int) -> int:
    return seed * 1_000_003 + index


def _random_scene(rng: random.Random):
    """A random convex room with a target, clutter, and stray walls."""
    w = rng.uniform(6.0, 14.0)
    h = rng.uniform(6.0, 14.0)
    x0 = rng.uniform(0.5, 19.0 - w)
    y0 = rng.uniform(0.5, 19.0 - h)
    room = square_room(x0, y0, x0 + w, y0 + h)

    objects = []
    target = None
    if rng.random() < 0.8:
        target = "target"
        objects.append(obj(
            "target",
            rng.uniform(x0 + 1.0, x0 + w - 1.0),
            rng.uniform(y0 + 1.0, y0 + h - 1.0),
            r=rng.uniform(0.05, 0.5),
            sh=rng.choice((0.0, 0.45, 0.9, 1.2)),
            align=geo.heading_vector(rng.uniform(-math.pi, math.pi)),
        ))
    for i in range(rng.randrange(0, 5)):
        objects.append(obj(
            f"clutter_{i}",
            rng.uniform(x0 + 0.8, x0 + w - 0.8),
            rng.uniform(y0 + 0.8, y0 + h - 0.8),
            r=rng.uniform(0.2, 0.6),
            sh=rng.choice((0.0, 0.45, 0.9)),
        ))

    walls = []
    for _ in range(rng.randrange(0, 3)):
        ax = rng.uniform(x0, x0 + w)
        ay = rng.uniform(y0, y0 + h)
        ang = rng.uniform(-math.pi, math.pi)
        length = rng.uniform(1.0, 0.5 * min(w, h))
        walls.append(((ax, ay),
                      (ax + length * math.cos(ang), ay + length * math.sin(ang))))

    scene = make_scene(objects=objects, walls=walls, rooms=(room,))

    for _ in range(200):
        sx = rng.uniform(x0 + 0.8, x0 + w - 0.8)
        sy = rng.uniform(y0 + 0.8, y0 + h - 0.8)
        if all(geo.distance((sx, sy), o.position) > o.footprint_radius + 0.4
               for o in objects):
            break
    # Bias some starts to face the target so the success paths get exercised,
    # not just the lost/timeout ones.
    heading = rng.uniform(-math.pi, math.pi)
    if target is not None and rng.random() < 0.6:
        tx, ty = objects[0].position
        heading = geo.wrap_angle(math.atan2(ty - sy, tx - sx)
                                 + rng.uniform(-0.6, 0.6))
    start = RobotState(x=sx, y=sy, heading=heading)
    return scene, target, start


def _fuzz_world(rng: random.Random):
    scene, target, start = _random_scene(rng)
    noise = NoiseModel(sigma_pos=0.02, sigma_heading=0.01,
                       seed=rng.randrange(2**32))
    world = SimWorld(scene, start, noise, DEFAULT_CAMERA)
    return world, target


_PROBE = dict(effect_kind="press", base_success=1.0, fact="probed")


def fuzz_termination(n: int, seed: int) -> dict:
    """Drive the three connector behaviours over n random scenes.

    Every run must stop within its iteration cap. On success the behaviour's
    contract must hold: move leaves the robot within the stop distance,
    adjust leaves the default manipulation gates satisfied.
    """
    params = con.NavigationParams()
    stats = {"move": 0, "move_success": 0, "search": 0, "search_success": 0,
             "adjust": 0, "adjust_success": 0}
    for i in range(n):
        rng = random.Random(_trial_seed(seed, i))
        world, target = _fuzz_world(rng)
        op = i % 3
        label = target or "ghost"

        if op == 0:
            stats["move"] += 1
            res = con.move_towards(world, label, params)
            assert res.iterations <= params.max_move_iterations
            assert res.status in (con.STATUS_SUCCESS, con.STATUS_TARGET_LOST,
                                  con.STATUS_TIMEOUT)
            if res.status == con.STATUS_SUCCESS:
                stats["move_success"] += 1
                d = geo.distance(res.final_state.position,
                                 world.scene.object(label).position)
                assert d <= params.distance_threshold + 1e-9
        elif op == 1:
            stats["search"] += 1
            res = con.search_for(world, label, rng.choice(("left", "right")), params)
            assert res.iterations <= params.max_search_iterations
            assert res.status in (con.STATUS_SUCCESS, con.STATUS_TIMEOUT)
            if res.status == con.STATUS_SUCCESS:
                stats["search_success"] += 1
        else:
            stats["adjust"] += 1
            if target is None:
                direction = "left"
            else:
                direction = con.choose_adjust_direction(world, target)
            res = con.adjust_approach(world, label, direction, params)
            assert res.iterations <= params.max_move_iterations
            assert res.status in (con.STATUS_SUCCESS, con.STATUS_TARGET_LOST,
                                  con.STATUS_TIMEOUT)
            if res.status == con.STATUS_SUCCESS:
                stats["adjust_success"] += 1
                spec = ManipulationSkillSpec(
                    name="probe", description="fuzz probe", target=label, **_PROBE)
                assert unmet_preconditions(spec, world) == []
    return stats


# --------------------------------------------------------------------------
# detection oracle vs brute force


def _segments_cross(a0, a1, b0, b1) -> bool:
    def orient(p, q, r):
        v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        if v > 1e-12:
            return 1
        if v < -1e-12:
            return -1
        return 0

    def on_segment(p, q, r):
        return (min(p[0], r[0]) - 1e-12 <= q[0] <= max(p[0], r[0]) + 1e-12
                and min(p[1], r[1]) - 1e-12 <= q[1] <= max(p[1], r[1]) + 1e-12)

    o1 = orient(a0, a1, b0)
    o2 = orient(a0, a1, b1)
    o3 = orient(b0, b1, a0)
    o4 = orient(b0, b1, a1)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(a0, b0, a1):
        return True
    if o2 == 0 and on_segment(a0, b1, a1):
        return True
    if o3 == 0 and on_segment(b0, a0, b1):
        return True
    if o4 == 0 and on_segment(b0, a1, b1):
        return True
    return False


def _brute_force_detections(state, scene, cam) -> dict:
    """Straight re-derivation of the frustum/LOS/clip rules, kept separate
    from the production geometry helpers on purpose."""
    axis = state.heading + state.head_yaw
    found = {}
    for o in scene.objects:
        dx = o.position[0] - state.x
        dy = o.position[1] - state.y
        dist = math.hypot(dx, dy)
        if dist < 1e-9 or dist > cam.max_range:
            continue
        h_off = math.atan2(dy, dx) - axis
        while h_off > math.pi:
            h_off -= 2 * math.pi
        while h_off <= -math.pi:
            h_off += 2 * math.pi
        if abs(h_off) > cam.hfov / 2 + 1e-12:
            continue
        elev = math.atan2(o.surface_height + 0.15 - cam.eye_height, dist)
        if abs(elev + state.head_pitch) > cam.vfov / 2 + 1e-12:
            continue
        blocked = any(
            _segments_cross(state.position, o.position, w.start, w.end)
            for w in scene.walls)
        if blocked:
            continue
        half_w = math.asin(min(o.footprint_radius / dist, 1.0))
        u_c = 0.5 - h_off / cam.hfov
        u_min = max(u_c - half_w / cam.hfov, 0.0)
        u_max = min(u_c + half_w / cam.hfov, 1.0)
        top = math.atan2(o.surface_height + 0.3 - cam.eye_height, dist)
        bot = math.atan2(o.surface_height - cam.eye_height, dist)
        v_min = max(0.5 - (top + state.head_pitch) / cam.vfov, 0.0)
        v_max = min(0.5 - (bot + state.head_pitch) / cam.vfov, 1.0)
        if u_min >= u_max or v_min >= v_max:
            continue
        found[o.name] = (dist, (u_min, v_min, u_max, v_max))
    return found


def compare_detection_oracle(n: int, seed: int) -> int:
    """project_detections must agree with the brute-force reimplementation."""
    nonempty = 0
    for i in range(n):
        rng = random.Random(_trial_seed(seed, i))
        scene, _, _ = _random_scene(rng)
        state = RobotState(
            x=rng.uniform(0.5, 19.5), y=rng.uniform(0.5, 19.5),
            heading=rng.uniform(-math.pi, math.pi),
            head_yaw=rng.uniform(-1.2, 1.2),
            head_pitch=rng.uniform(0.0, 1.2),
        )
        got = {d.label: (d.depth, d.bbox)
               for d in project_detections(state, scene, DEFAULT_CAMERA)}
        want = _brute_force_detections(state, scene, DEFAULT_CAMERA)
        assert sorted(got) == sorted(want), (i, sorted(got), sorted(want))
        for label, (depth, bbox) in want.items():
            gd, gb = got[label]
            assert abs(gd - depth) <= 1e-9
            assert all(abs(a - b) <= 1e-9 for a, b in zip(gb, bbox))
        if got:
            nonempty += 1
    return nonempty


# --------------------------------------------------------------------------
# skill-call round trip


_NAME_FIRST = "abcdefghijklmnopqrstuvwxyz_"
_NAME_REST = _NAME_FIRST + "0123456789"
_STRING_CHARS = [chr(c) for c in range(32, 127)]  # printable ASCII, incl quotes


def _rand_identifier(rng: random.Random) -> str:
    while True:
        name = (rng.choice(_NAME_FIRST)
                + "".join(rng.choice(_NAME_REST) for _ in range(rng.randrange(0, 10))))
        if not keyword.iskeyword(name):
            return name


def _rand_value(rng: random.Random):
    pick = rng.randrange(3)
    if pick == 0:
        return "".join(rng.choice(_STRING_CHARS)
                       for _ in range(rng.randrange(0, 14)))
    if pick == 1:
        return rng.randrange(-10**9, 10**9)
    return rng.uniform(-1e6, 1e6)


def roundtrip_skill_calls(n: int, seed: int) -> None:
    """format_skill_call and parse_action_call must invert each other."""
    rng = random.Random(seed)
    for _ in range(n):
        n_pos = rng.randrange(0, 4)
        n_kw = rng.randrange(0, 3)
        kw_names = []
        while len(kw_names) < n_kw:
            name = _rand_identifier(rng)
            if name not in kw_names:
                kw_names.append(name)
        call = SkillCall(
            name=_rand_identifier(rng),
            args=tuple(_rand_value(rng) for _ in range(n_pos + n_kw)),
            kwarg_names=(None,) * n_pos + tuple(kw_names),
        )
        text = format_skill_call(call)
        back = parse_action_call(text)
        assert back == call, (text, back, call)
        assert format_skill_call(back) == text


# --------------------------------------------------------------------------
# manipulation Monte Carlo


def manip_success_rate(trials: int, seed: int, base_success: float = 0.86,
                       facing_error: float = 0.0) -> float:
    """Observed success rate of a press skill executed `trials` times.

    The robot stands square in front of the panel, so the geometric gates
    all pass and the only stochastic part is the success draw.
    """
    panel = obj("panel", 5.0, 5.6, r=0.3, sh=0.9, align=(0.0, 1.0))
    scene = make_scene(objects=(panel,))
    state = RobotState(x=5.0, y=5.0, heading=math.pi / 2 + facing_error,
                       head_pitch=0.9)
    world = SimWorld(scene, state, NoiseModel.silent(), DEFAULT_CAMERA)
    spec = ManipulationSkillSpec(
        name="press_panel", description="press the panel", target="panel",
        effect_kind="press", base_success=base_success, fact="panel_pressed")
    assert unmet_preconditions(spec, world) == []

    rng = random.Random(seed)
    hits = 0
    for _ in range(trials):
        outcome = execute_manipulation_skill(spec, world, rng)
        assert outcome.status in ("success", "failure")
        hits += outcome.status == "success"
    return hits / trials
