"""Built-in long-horizon tasks as ordered goal predicates.

Each task is a list of subprocesses that must become true in order; a
subprocess latches the first time its predicate holds while everything
before it has already latched. Completion rates are reported per
subprocess and overall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .. import geometry as geo
from ..errors import UnknownTask
from ..world import SimWorld

KIND_NAVIGATE = "navigate"
KIND_HOLDING = "holding"
KIND_PLACED = "placed"
KIND_FACT = "fact"

NAVIGATE_THRESHOLD_M = 0.8   # same arrival radius the connector uses
PLACED_THRESHOLD_M = 0.7

HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class Subprocess:
    """One ordered goal: a pure predicate over world state."""

    kind: str
    description: str
    target: str | None = None    # navigate: place label; holding/placed: the item
    skill: str | None = None     # the manipulation skill that serves this step
    dest: str | None = None      # placed: label the item must rest at
    fact: str | None = None
    threshold_m: float = NAVIGATE_THRESHOLD_M

    def satisfied(self, world: SimWorld) -> bool:
        state = world.state
        if self.kind == KIND_NAVIGATE:
            obj = world.scene.object(self.target)
            return geo.distance(state.position, obj.position) <= self.threshold_m
        if self.kind == KIND_HOLDING:
            return state.held_item == self.target
        if self.kind == KIND_PLACED:
            if state.held_item == self.target or not world.scene.has_object(self.target):
                return False
            item = world.scene.object(self.target)
            dest = world.scene.object(self.dest)
            return geo.distance(item.position, dest.position) <= PLACED_THRESHOLD_M
        if self.kind == KIND_FACT:
            return self.fact in world.facts
        raise ValueError(f"unknown subprocess kind {self.kind!r}")


@dataclass(frozen=True)
class ObjectPlacement:
    """Scene override applied at episode start (rebuilds the object)."""

    name: str
    position: tuple[float, float]
    surface_height: float | None = None
    alignment_direction: tuple[float, float] | None = None


@dataclass(frozen=True)
class TaskSpec:
    name: str
    instruction: str
    subprocesses: tuple[Subprocess, ...]
    start_pose: tuple[float, float, float] | None = None  # None: scenario default
    held_item: str | None = None
    object_moves: tuple[ObjectPlacement, ...] = ()

    def __post_init__(self):
        if not self.subprocesses:
            raise ValueError(f"task {self.name!r} needs at least one subprocess")


class ProgressTracker:
    """Ordered latching of a task's subprocess predicates.

    evaluate() is called after every skill event; a subprocess can latch
    only once everything before it has latched, so revisiting an earlier
    goal state never counts twice.
    """

    def __init__(self, world: SimWorld, task: TaskSpec):
        self.world = world
        self.task = task
        self._done = [False] * len(task.subprocesses)

    def statuses(self) -> list[bool]:
        return list(self._done)

    def done_count(self) -> int:
        return sum(self._done)

    def all_done(self) -> bool:
        return all(self._done)

    def first_unmet(self) -> Subprocess | None:
        for sp, done in zip(self.task.subprocesses, self._done):
            if not done:
                return sp
        return None

    def evaluate(self) -> list[int]:
        """Latch every newly satisfied prefix subprocess; returns new indices."""
        newly: list[int] = []
        for i, sp in enumerate(self.task.subprocesses):
            if self._done[i]:
                continue
            if sp.satisfied(self.world):
                self._done[i] = True
                newly.append(i)
            else:
                break
        return newly


def _navigate(label: str, description: str) -> Subprocess:
    return Subprocess(kind=KIND_NAVIGATE, description=description, target=label)


def _holding(item: str, skill: str, description: str) -> Subprocess:
    return Subprocess(kind=KIND_HOLDING, description=description, target=item, skill=skill)


def _placed(item: str, dest: str, skill: str, description: str) -> Subprocess:
    return Subprocess(kind=KIND_PLACED, description=description,
                      target=item, dest=dest, skill=skill)


def _fact(fact: str, skill: str, description: str) -> Subprocess:
    return Subprocess(kind=KIND_FACT, description=description, fact=fact, skill=skill)


TASKS: dict[str, TaskSpec] = {}


def _register(task: TaskSpec) -> TaskSpec:
    TASKS[task.name] = task
    return task


_register(TaskSpec(
    name="fetch_bottle",
    instruction="Fetch the bottle from the wooden table.",
    start_pose=(6.0, 6.5, HALF_PI),
    subprocesses=(
        _navigate("wooden_table", "Navigate to the wooden table"),
        _holding("bottle", "grasp_bottle", "Grasp the bottle"),
    ),
))

_register(TaskSpec(
    name="deliver_basket",
    instruction="Deliver the basket to the wooden table in the office.",
    start_pose=(15.5, 7.5, math.pi),
    held_item="basket",
    subprocesses=(
        _navigate("wooden_table", "Navigate to the wooden table"),
        _placed("basket", "wooden_table", "place_basket_on_table",
                "Place the basket on the table"),
    ),
))

_register(TaskSpec(
    name="prepare_coffee",
    instruction="Prepare coffee: bring the cup from the table to the coffee machine.",
    start_pose=(6.0, 6.5, HALF_PI),
    subprocesses=(
        _navigate("wooden_table", "Navigate to the wooden table"),
        _holding("cup", "grasp_cup", "Grasp the cup"),
        _navigate("coffee_machine", "Navigate to the coffee machine"),
        _placed("cup", "coffee_machine", "place_cup_on_machine",
                "Place the cup on the machine"),
    ),
))

_register(TaskSpec(
    name="make_coffee",
    instruction="Make coffee at the machine with the cup in hand.",
    start_pose=(2.0, 17.65, HALF_PI),
    held_item="cup",
    subprocesses=(
        _placed("cup", "coffee_machine", "place_cup_on_machine",
                "Place the cup on the machine"),
        _fact("coffee_selected", "press_coffee_button", "Select the coffee"),
        _fact("coffee_confirmed", "press_confirm_button", "Confirm the brew"),
        _holding("cup", "grasp_cup", "Grasp the filled cup"),
    ),
))

_register(TaskSpec(
    name="deliver_coffee",
    instruction="Deliver a cup of coffee from the machine to the wooden table.",
    start_pose=(2.0, 17.65, HALF_PI),
    object_moves=(
        ObjectPlacement("cup", (2.0, 17.85), surface_height=1.0,
                        alignment_direction=(0.0, 1.0)),
    ),
    subprocesses=(
        _holding("cup", "grasp_cup", "Grasp the cup from the machine"),
        _navigate("wooden_table", "Navigate to the wooden table"),
        _placed("cup", "wooden_table", "place_cup_on_table",
                "Place the cup on the table"),
    ),
))

_register(TaskSpec(
    name="navigate_to_table",
    instruction="Navigate to the wooden table.",
    start_pose=(6.0, 6.5, HALF_PI),
    subprocesses=(_navigate("wooden_table", "Navigate to the wooden table"),),
))

_register(TaskSpec(
    name="navigate_to_machine",
    instruction="Navigate to the coffee machine.",
    start_pose=(6.0, 6.5, HALF_PI),
    subprocesses=(_navigate("coffee_machine", "Navigate to the coffee machine"),),
))

_register(TaskSpec(
    name="navigate_to_reception_desk",
    instruction="Navigate to the desk in the reception.",
    start_pose=(6.0, 6.5, HALF_PI),
    subprocesses=(_navigate("reception_desk", "Navigate to the reception desk"),),
))

_register(TaskSpec(
    name="grasp_cup_near",
    instruction="Pick up the cup from the table edge.",
    start_pose=(6.0, 15.75, -HALF_PI),
    subprocesses=(_holding("cup", "grasp_cup", "Grasp the cup"),),
))

_register(TaskSpec(
    name="place_machine_near",
    instruction="Set the held cup onto the coffee machine.",
    start_pose=(2.85, 17.5, 2.453),
    held_item="cup",
    subprocesses=(
        _placed("cup", "coffee_machine", "place_cup_on_machine",
                "Place the cup on the machine"),
    ),
))

_register(TaskSpec(
    name="grasp_coffee",
    instruction="Walk to the table and pick up the coffee cup.",
    start_pose=(6.0, 6.5, HALF_PI),
    subprocesses=(
        _navigate("wooden_table", "Navigate to the wooden table"),
        _holding("cup", "grasp_cup", "Grasp the cup"),
    ),
))

_register(TaskSpec(
    name="place_coffee_table",
    instruction="Carry the held cup to the wooden table and set it down.",
    start_pose=(2.0, 17.0, -0.6),
    held_item="cup",
    subprocesses=(
        _navigate("wooden_table", "Navigate to the wooden table"),
        _placed("cup", "wooden_table", "place_cup_on_table",
                "Place the cup on the table"),
    ),
))

_register(TaskSpec(
    name="place_coffee_machine",
    instruction="Carry the held cup to the coffee machine and set it on the tray.",
    start_pose=(6.0, 15.7, 2.583),
    held_item="cup",
    subprocesses=(
        _navigate("coffee_machine", "Navigate to the coffee machine"),
        _placed("cup", "coffee_machine", "place_cup_on_machine",
                "Place the cup on the machine"),
    ),
))


def get_task(name: str) -> TaskSpec:
    try:
        return TASKS[name]
    except KeyError:
        raise UnknownTask(f"no task named {name!r}; known: {', '.join(sorted(TASKS))}") from None


def task_names() -> list[str]:
    return sorted(TASKS)
