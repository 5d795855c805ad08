"""Scenario loading and validation, plus the obstacle injector."""

import copy
import json
import math
import random
from importlib import resources

import pytest

from deskbot.errors import ScenarioError
from deskbot.scenario import (
    add_obstacles,
    load_scenario,
    scenario_from_data,
    validate_scenario_data,
)


def office_data() -> dict:
    raw = resources.files("deskbot").joinpath("data/office.json").read_text("utf-8")
    return json.loads(raw)


def test_packaged_office_scenario():
    scenario = load_scenario(None)
    assert scenario.name == "office"
    names = {o.name for o in scenario.scene.objects}
    assert names == {
        "wooden_table", "cup", "bottle", "coffee_machine", "basket",
        "office_hallway", "reception_hallway", "reception_desk",
    }
    assert {s.name for s in scenario.skills} == {
        "grasp_bottle", "grasp_cup", "place_basket_on_table",
        "place_cup_on_table", "place_cup_on_machine",
        "press_coffee_button", "press_confirm_button",
    }
    assert scenario.camera.max_range == pytest.approx(12.0)
    assert scenario.camera.hfov == pytest.approx(math.pi / 2)
    assert scenario.sigma_pos == pytest.approx(0.02)
    assert scenario.sigma_heading == pytest.approx(0.01)
    assert scenario.start_pose == pytest.approx((6.0, 6.5, math.pi / 2))
    assert len(scenario.scene.rooms) == 2
    # every object and room name appears exactly once in the semantic map
    assert validate_scenario_data(office_data()) == []


def test_load_scenario_file_errors(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(str(tmp_path / "missing.json"))
    bad = tmp_path / "broken.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ScenarioError):
        load_scenario(str(bad))


def test_load_scenario_roundtrip_through_file(tmp_path):
    path = tmp_path / "copy.json"
    path.write_text(json.dumps(office_data()), encoding="utf-8")
    scenario = load_scenario(str(path))
    assert scenario.scene.has_object("wooden_table")


def _problems(mutate) -> list[str]:
    data = copy.deepcopy(office_data())
    mutate(data)
    return validate_scenario_data(data)


def _assert_problem(mutate, fragment):
    problems = _problems(mutate)
    assert any(fragment in p for p in problems), (fragment, problems)


def test_validate_bad_bounds():
    _assert_problem(lambda d: d.__setitem__("bounds", [0, -5]), "bad bounds")


def test_validate_requires_a_room():
    _assert_problem(lambda d: d.__setitem__("rooms", []),
                    "scenario needs at least one room")


def test_validate_room_winding():
    def flip(d):
        d["rooms"][0]["vertices"] = list(reversed(d["rooms"][0]["vertices"]))
    _assert_problem(flip, "convex and CCW")


def test_validate_room_inside_bounds():
    def push(d):
        d["rooms"][0]["vertices"] = [[0, 0], [25, 0], [25, 20], [0, 20]]
    _assert_problem(push, "leaves the scene bounds")


def test_validate_wall_inside_bounds():
    _assert_problem(lambda d: d["walls"].append([[1, 1], [1, 30]]),
                    "leaves the scene bounds")


def test_validate_duplicate_object_name():
    _assert_problem(lambda d: d["objects"].append(dict(d["objects"][0])),
                    "duplicate object name")


def test_validate_object_must_sit_in_one_room():
    # outside both rooms entirely
    def out(d):
        d["objects"][0]["position"] = [25.0, 25.0]
    problems = _problems(out)
    assert any("center lies in 0 rooms" in p for p in problems)

    # straddling: footprint pokes out of its room through the doorway wall line
    def straddle(d):
        d["objects"][0]["position"] = [11.9, 15.0]
        d["objects"][0]["footprint_radius"] = 0.5
    _assert_problem(straddle, "footprint leaves room")


def test_validate_semantic_map_mentions():
    _assert_problem(lambda d: d.__setitem__("semantic_map", ""),
                    "semantic_map must be non-empty")
    _assert_problem(lambda d: d.__setitem__("semantic_map", "nothing here"),
                    "(need exactly 1)")
    # a second mention of an existing name also trips the check
    def twice(d):
        d["semantic_map"] += " Also the cup. And the cup again."
    _assert_problem(twice, "mentions 'cup'")


def test_validate_skill_target_exists():
    def ghost(d):
        d["skills"][0]["target"] = "ghost"
    _assert_problem(ghost, "targets unknown object 'ghost'")


def test_validate_start_pose():
    _assert_problem(lambda d: d.__setitem__("start_pose", [1.0, 2.0]),
                    "start_pose must be [x, y, heading]")
    _assert_problem(lambda d: d.__setitem__("start_pose", [25.0, 25.0, 0.0]),
                    "start_pose lies outside every room")


def test_scenario_from_data_raises_joined_problems():
    data = copy.deepcopy(office_data())
    data["semantic_map"] = "nothing"
    data["start_pose"] = [1.0]
    with pytest.raises(ScenarioError) as err:
        scenario_from_data(data)
    assert "; " in str(err.value)


def test_add_obstacles_basic():
    scenario = load_scenario(None)
    out = add_obstacles(scenario, 3, random.Random(9), (3.0, 8.0, 9.0, 13.0))
    added = [o for o in out.scene.objects if o.name.startswith("obstacle_")]
    assert [o.name for o in added] == ["obstacle_1", "obstacle_2", "obstacle_3"]
    for o in added:
        assert o.footprint_radius == pytest.approx(0.35)
        assert not o.navigable
        assert 3.0 <= o.position[0] <= 9.0
        assert 8.0 <= o.position[1] <= 13.0
        assert o.name in out.scene.semantic_map
    # clearance against everything that was already there, and each other
    placed = [o.position for o in added]
    others = [o.position for o in scenario.scene.objects]
    others.append(scenario.start_pose[:2])
    for i, p in enumerate(placed):
        for q in others + placed[:i]:
            dx = p[0] - q[0]
            dy = p[1] - q[1]
            assert (dx * dx + dy * dy) ** 0.5 >= 1.1
    # the original scenario is untouched
    assert not any(o.name.startswith("obstacle_") for o in scenario.scene.objects)


def test_add_obstacles_deterministic_per_seed():
    scenario = load_scenario(None)
    a = add_obstacles(scenario, 2, random.Random(4), (3.0, 8.0, 9.0, 13.0))
    b = add_obstacles(scenario, 2, random.Random(4), (3.0, 8.0, 9.0, 13.0))
    c = add_obstacles(scenario, 2, random.Random(5), (3.0, 8.0, 9.0, 13.0))
    pos = lambda s: [o.position for o in s.scene.objects if "obstacle" in o.name]
    assert pos(a) == pos(b)
    assert pos(a) != pos(c)


def test_add_obstacles_gives_up_when_region_is_too_tight():
    scenario = load_scenario(None)
    with pytest.raises(ScenarioError, match="could not place obstacles"):
        add_obstacles(scenario, 4, random.Random(0), (5.0, 9.0, 6.0, 10.0))
