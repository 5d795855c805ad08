"""Locomotion primitives, manipulation gates, and the skill registry."""

import math
import random

import pytest

from deskbot.errors import DuplicateSkill, UnknownObject, UnknownSkill
from deskbot.skills import (
    GO_STRAIGHT,
    HEAD_KINDS,
    LOCOMOTION_KINDS,
    MOTION_KINDS,
    NO_ACTION,
    REASON_BAD_PITCH,
    REASON_MISALIGNED,
    REASON_NOT_VISIBLE,
    REASON_OUT_OF_RANGE,
    REASON_WRONG_HELD,
    SIDESTEP_LEFT,
    SIDESTEP_RIGHT,
    TILT_HEAD,
    TURN_HEAD,
    TURN_LEFT,
    TURN_RIGHT,
    WALK_BACKWARDS,
    LocomotionSkill,
    ManipulationSkillSpec,
    SkillRegistry,
    execute_locomotion_skill,
    execute_manipulation_skill,
    nearest_navigable_landmark,
    unmet_preconditions,
)

from support import EventLog, make_scene, make_world, obj


# -- locomotion primitives ----------------------------------------------------


def test_kind_groups():
    assert len(LOCOMOTION_KINDS) == 9
    assert MOTION_KINDS <= LOCOMOTION_KINDS
    assert HEAD_KINDS == {TILT_HEAD, TURN_HEAD}
    assert NO_ACTION in LOCOMOTION_KINDS
    assert NO_ACTION not in MOTION_KINDS


@pytest.mark.parametrize("kind,magnitude,duration,ticks", [
    (GO_STRAIGHT, "small", 2.4, 12),      # 0.3 m at 0.125 m/s
    (GO_STRAIGHT, "large", 7.2, 36),
    (WALK_BACKWARDS, "small", 2.4, 12),
    (SIDESTEP_LEFT, "small", 2.0, 10),    # 0.3 m at 0.15 m/s
    (SIDESTEP_RIGHT, "large", 6.0, 30),
    (TURN_LEFT, "small", 0.4, 2),         # 0.15 rad at 0.375 rad/s
    (TURN_RIGHT, "large", 1.2, 6),
])
def test_motion_durations_and_ticks(kind, magnitude, duration, ticks):
    skill = LocomotionSkill(kind=kind, magnitude=magnitude)
    assert skill.duration_s() == pytest.approx(duration)
    cmds = skill.tick_commands()
    assert len(cmds) == ticks
    assert all(c.duration_s == pytest.approx(0.2) for c in cmds)


def test_tick_command_signs():
    (cmd, *_) = LocomotionSkill(kind=SIDESTEP_LEFT, magnitude="small").tick_commands()
    assert cmd.v_lateral == pytest.approx(0.15)
    (cmd, *_) = LocomotionSkill(kind=SIDESTEP_RIGHT, magnitude="small").tick_commands()
    assert cmd.v_lateral == pytest.approx(-0.15)
    (cmd, *_) = LocomotionSkill(kind=TURN_LEFT, magnitude="small").tick_commands()
    assert cmd.omega == pytest.approx(0.375)
    (cmd, *_) = LocomotionSkill(kind=TURN_RIGHT, magnitude="small").tick_commands()
    assert cmd.omega == pytest.approx(-0.375)
    (cmd, *_) = LocomotionSkill(kind=WALK_BACKWARDS, magnitude="small").tick_commands()
    assert cmd.v_forward == pytest.approx(-0.125)


def test_head_and_no_action_shapes():
    head = LocomotionSkill(kind=TILT_HEAD, head_target=(None, 0.8))
    assert head.duration_s() == pytest.approx(0.2)
    assert head.tick_commands() == []
    idle = LocomotionSkill(kind=NO_ACTION)
    assert idle.duration_s() == pytest.approx(0.2)
    cmds = idle.tick_commands()
    assert len(cmds) == 1
    assert not cmds[0].is_moving


def test_locomotion_skill_validation():
    with pytest.raises(UnknownSkill):
        LocomotionSkill(kind="moonwalk", magnitude="small")
    with pytest.raises(ValueError):
        LocomotionSkill(kind=GO_STRAIGHT)                      # needs magnitude
    with pytest.raises(ValueError):
        LocomotionSkill(kind=GO_STRAIGHT, magnitude="jumbo")
    with pytest.raises(ValueError):
        LocomotionSkill(kind=GO_STRAIGHT, magnitude="small", head_target=0.5)
    with pytest.raises(ValueError):
        LocomotionSkill(kind=TILT_HEAD)                        # needs target
    with pytest.raises(ValueError):
        LocomotionSkill(kind=TILT_HEAD, head_target=(None, 0.5), magnitude="small")
    with pytest.raises(ValueError):
        LocomotionSkill(kind=NO_ACTION, magnitude="small")


def test_execute_locomotion_moves_and_logs():
    log = EventLog()
    world = make_world(x=5, y=5, heading=0, sink=log)
    out = execute_locomotion_skill(world, LocomotionSkill(kind=GO_STRAIGHT,
                                                          magnitude="small"))
    assert out.ok
    assert world.state.x == pytest.approx(5.3)
    (row,) = log.of("skill")
    t, kind, duration, payload = row
    assert duration == pytest.approx(2.4)
    assert payload["skill"] == GO_STRAIGHT
    assert payload["magnitude"] == "small"
    assert payload["outcome"] == "success"
    assert payload["collided"] is False
    assert payload["x"] == pytest.approx(5.3)
    assert payload["mode"] == "walking"


def test_execute_locomotion_head_skill():
    log = EventLog()
    world = make_world(sink=log)
    out = execute_locomotion_skill(world, LocomotionSkill(kind=TILT_HEAD,
                                                          head_target=(None, 0.8)))
    assert out.ok
    assert world.state.head_pitch == pytest.approx(0.8)
    (row,) = log.of("skill")
    assert row[2] == pytest.approx(0.2)
    assert row[3]["magnitude"] is None


def test_execute_locomotion_reports_wall_clamp():
    log = EventLog()
    scene = make_scene(walls=(((5.4, 0.0), (5.4, 10.0)),))
    world = make_world(scene=scene, x=5, y=5, heading=0, sink=log)
    out = execute_locomotion_skill(world, LocomotionSkill(kind=GO_STRAIGHT,
                                                          magnitude="large"))
    assert out.ok                      # clamping is not a skill failure
    assert out.reason == "clamped at wall"
    assert world.state.x == pytest.approx(5.399)
    (row,) = log.of("skill")
    assert row[3]["collided"] is True


# -- manipulation gates --------------------------------------------------------


def _panel_scene():
    return make_scene(objects=(obj("panel", 5, 6, r=0.3, sh=0.9, align=(0.0, 1.0)),))


def _press_spec(**overrides):
    base = dict(name="press_panel", description="press the panel button",
                target="panel", effect_kind="press", base_success=0.86,
                fact="panel_pressed")
    base.update(overrides)
    return ManipulationSkillSpec(**base)


def test_spec_validation():
    with pytest.raises(ValueError):
        _press_spec(effect_kind="tickle")
    with pytest.raises(ValueError):
        _press_spec(base_success=1.2)
    with pytest.raises(ValueError):
        ManipulationSkillSpec(name="p", description="p", target="panel",
                              effect_kind="place", base_success=0.9)  # no rest_height
    with pytest.raises(ValueError):
        ManipulationSkillSpec(name="p", description="p", target="panel",
                              effect_kind="press", base_success=0.9)  # no fact


def test_preconditions_pass_when_square_in_front():
    world = make_world(scene=_panel_scene(), x=5, y=5.4, heading=math.pi / 2,
                       head_pitch=0.9)
    assert unmet_preconditions(_press_spec(), world) == []


def test_preconditions_report_in_fixed_order():
    # far away, level head: both range and pitch gates fail
    world = make_world(scene=_panel_scene(), x=5, y=2, heading=math.pi / 2)
    assert unmet_preconditions(_press_spec(), world) == [
        REASON_OUT_OF_RANGE, REASON_BAD_PITCH]

    # close but twisted: only the facing gate fails
    world = make_world(scene=_panel_scene(), x=5, y=5.4,
                       heading=math.pi / 2 + 0.5, head_pitch=0.9)
    assert unmet_preconditions(_press_spec(), world) == [REASON_MISALIGNED]

    # everything wrong at once, holding a surprise item
    world = make_world(scene=_panel_scene(), x=5, y=1, heading=-math.pi / 2,
                       held="thing")
    assert unmet_preconditions(_press_spec(), world) == [
        REASON_OUT_OF_RANGE, REASON_MISALIGNED, REASON_BAD_PITCH,
        REASON_NOT_VISIBLE, REASON_WRONG_HELD]


def test_preconditions_held_item_gate():
    spec = _press_spec(requires_held="cup")
    scene = make_scene(objects=(
        obj("panel", 5, 6, r=0.3, sh=0.9, align=(0.0, 1.0)),
        obj("cup", 5.2, 5.2, r=0.06, sh=0.45),
    ))
    world = make_world(scene=scene, x=5, y=5.4, heading=math.pi / 2, head_pitch=0.9)
    assert unmet_preconditions(spec, world) == [REASON_WRONG_HELD]
    world.grasp("cup")
    assert unmet_preconditions(spec, world) == []


def test_preconditions_unknown_target():
    world = make_world()
    with pytest.raises(UnknownObject):
        unmet_preconditions(_press_spec(target="ghost"), world)


def test_unmet_execute_emits_zero_duration_and_skips_rng():
    log = EventLog()
    world = make_world(scene=_panel_scene(), x=5, y=2, heading=math.pi / 2, sink=log)
    rng = random.Random(0)
    out = execute_manipulation_skill(_press_spec(), world, rng)
    assert out.status == "precondition_unmet"
    assert out.reason == REASON_OUT_OF_RANGE      # first unmet gate
    (row,) = log.of("skill")
    assert row[2] == 0.0
    assert rng.random() == random.Random(0).random()   # no draw consumed


def test_execute_on_missing_target_emits_nothing():
    log = EventLog()
    world = make_world(sink=log)
    out = execute_manipulation_skill(_press_spec(target="ghost"), world,
                                     random.Random(0))
    assert out.status == "precondition_unmet"
    assert out.reason == REASON_NOT_VISIBLE
    assert log.rows == []


def test_success_threshold_brackets_the_draw():
    first_draw = random.Random(0).random()
    world = make_world(scene=_panel_scene(), x=5, y=5.4, heading=math.pi / 2,
                       head_pitch=0.9)
    out = execute_manipulation_skill(_press_spec(base_success=first_draw + 0.01),
                                     world, random.Random(0))
    assert out.status == "success"
    assert "panel_pressed" in world.facts

    world = make_world(scene=_panel_scene(), x=5, y=5.4, heading=math.pi / 2,
                       head_pitch=0.9)
    out = execute_manipulation_skill(_press_spec(base_success=first_draw - 0.01),
                                     world, random.Random(0))
    assert out.status == "failure"
    assert out.reason == "SkillExecutionFailed"
    assert "panel_pressed" not in world.facts


def test_grasp_execution():
    log = EventLog()
    scene = make_scene(objects=(obj("cup", 5, 5.5, r=0.06, sh=0.45,
                                    align=(0.0, 1.0)),))
    world = make_world(scene=scene, x=5, y=5, heading=math.pi / 2,
                       head_pitch=0.9, sink=log)
    spec = ManipulationSkillSpec(name="grasp_cup", description="pick up the cup",
                                 target="cup", effect_kind="grasp", base_success=1.0)
    out = execute_manipulation_skill(spec, world, random.Random(1))
    assert out.status == "success"
    assert world.state.held_item == "cup"
    assert not world.scene.has_object("cup")
    (row,) = log.of("skill")
    assert row[2] == pytest.approx(8.0)
    assert row[3]["outcome"] == "success"


def test_place_nudges_item_towards_the_robot():
    scene = make_scene(objects=(
        obj("table", 6, 15, r=0.6, sh=0.45, align=(0.0, 1.0)),
        obj("cup", 6, 14.5, r=0.06, sh=0.45),
    ))
    world = make_world(scene=scene, x=6, y=14.35, heading=math.pi / 2,
                       head_pitch=0.9)
    world.grasp("cup")
    spec = ManipulationSkillSpec(
        name="place_cup", description="set the cup on the table", target="table",
        effect_kind="place", base_success=1.0, max_distance=0.9,
        requires_held="cup", rest_height=0.75)
    out = execute_manipulation_skill(spec, world, random.Random(2))
    assert out.status == "success"
    assert world.state.held_item is None
    cup = world.scene.object("cup")
    # offset from the table center towards the robot, capped at min(0.3, radius)
    assert cup.position[0] == pytest.approx(6.0)
    assert cup.position[1] == pytest.approx(14.7)
    assert cup.surface_height == pytest.approx(0.75)
    assert cup.footprint_radius == pytest.approx(0.06)
    assert cup.alignment_direction == (0.0, 1.0)


def test_facing_error_shrinks_success_rate():
    from properties import manip_success_rate
    rates = [manip_success_rate(3000, 11, facing_error=e) for e in (0.0, 0.2, 0.3)]
    expected = [0.86 * math.exp(-2.0 * e * e) for e in (0.0, 0.2, 0.3)]
    for got, want in zip(rates, expected):
        assert got == pytest.approx(want, abs=0.03)
    assert rates[0] > rates[1] > rates[2]


# -- registry -------------------------------------------------------------------


def _registry():
    reg = SkillRegistry()
    reg.register(_press_spec())
    reg.register(ManipulationSkillSpec(
        name="grasp_cup", description="pick up the cup", target="cup",
        effect_kind="grasp", base_success=0.9))
    return reg


def test_registry_rejects_duplicates_and_kind_collisions():
    reg = _registry()
    with pytest.raises(DuplicateSkill):
        reg.register(_press_spec())
    with pytest.raises(DuplicateSkill):
        reg.register(_press_spec(name=GO_STRAIGHT))


def test_registry_lookup_exact_and_fuzzy():
    reg = _registry()
    assert reg.lookup("press_panel").name == "press_panel"
    # description containment in either direction
    assert reg.lookup("press the panel button now please").name == "press_panel"
    assert reg.lookup("pick up").name == "grasp_cup"
    with pytest.raises(UnknownSkill):
        reg.lookup("dance")
    with pytest.raises(UnknownSkill):
        reg.lookup("p")     # matches both descriptions, ambiguous


def test_registry_render_and_names():
    reg = _registry()
    text = reg.render_action_set()
    lines = text.splitlines()
    assert all(line.startswith("- ") for line in lines)
    assert lines == sorted(lines)
    assert "- go_straight(magnitude)" in text
    assert "- tilt_head(pitch)" in text
    assert "- turn_head(yaw)" in text
    assert "- no_action()" in text
    assert "- grasp_cup(): pick up the cup" in text
    assert reg.manipulation_names == ["grasp_cup", "press_panel"]
    assert reg.chunk_train == 30
    assert reg.chunk_deploy == 10


def test_registry_execute_routes_to_spec():
    reg = _registry()
    world = make_world(scene=_panel_scene(), x=5, y=5.4, heading=math.pi / 2,
                       head_pitch=0.9)
    out = reg.execute("press_panel", world, random.Random(0))
    assert out.status in ("success", "failure")
    with pytest.raises(UnknownSkill):
        reg.execute("dance", world, random.Random(0))


def test_nearest_navigable_landmark():
    scene = make_scene(objects=(
        obj("cup", 6, 15.2, r=0.06, sh=0.45),
        obj("table", 6, 15, r=0.6, sh=0.45, navigable=True),
        obj("desk", 17, 3, r=0.8, sh=0.75, navigable=True),
    ))
    world = make_world(scene=scene)
    assert nearest_navigable_landmark(world, "table") == "table"
    assert nearest_navigable_landmark(world, "cup") == "table"
    bare = make_world(scene=make_scene(objects=(obj("cup", 6, 15.2, r=0.06,
                                                    sh=0.45),)))
    with pytest.raises(UnknownObject):
        nearest_navigable_landmark(bare, "cup")
