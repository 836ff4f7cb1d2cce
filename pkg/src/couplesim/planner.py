"""Reconfiguration planning: primitive actions, plan validation, best-first search.

Actions are the five primitives an assembler can ask of the engine: slide a
free module one cell, couple two mated faces, decouple a joint from either
side, and switch a module's supply.  Plans replay through the real protocol
and world code, never a simplified model, so a plan that validates here is
a plan the simulator will execute.  Search is A* over immutable world
snapshots with an admissible mismatch-count heuristic and lexicographic
action tie-breaking, which makes results deterministic and, within the
explored arena, optimal in action count.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import product

from .geometry import DIRECTIONS, FACE_NAMES, Vec, add, opposite
from .protocol import FaceKind, Misalignment
from .world import FloatingModules, ModuleJointed, SlideBlocked, World

PLAN_VERSION = 1


@dataclass(frozen=True)
class Slide:
    module: str
    direction: str

    def __str__(self) -> str:
        return f"slide {self.module} {self.direction}"

    def to_dict(self) -> dict:
        return {"op": "slide", "module": self.module, "direction": self.direction}

    def apply(self, world: World) -> "Outcome":
        try:
            world.slide_module(self.module, self.direction)
        except KeyError as e:
            return Outcome(False, f"unknown entity: {e}")
        except (ModuleJointed, SlideBlocked) as e:
            return Outcome(False, str(e))
        return Outcome(True)


@dataclass(frozen=True)
class Couple:
    initiator: str
    target: str

    def __str__(self) -> str:
        return f"couple {self.initiator} {self.target}"

    def to_dict(self) -> dict:
        return {"op": "couple", "initiator": self.initiator, "target": self.target}

    def apply(self, world: World, mis: Misalignment | None = None) -> "Outcome":
        try:
            result = world.couple_faces(self.initiator, self.target, mis)
        except KeyError as e:
            return Outcome(False, f"unknown entity: {e}")
        if not result.ok:
            return Outcome(False, result.failure.value)
        return Outcome(True)


@dataclass(frozen=True)
class DecoupleMale:
    male: str
    female: str

    def __str__(self) -> str:
        return f"decouple-male {self.male} {self.female}"

    def to_dict(self) -> dict:
        return {"op": "decouple-male", "male": self.male, "female": self.female}

    def apply(self, world: World) -> "Outcome":
        try:
            joint = world.find_joint(self.male, self.female)
        except KeyError as e:
            return Outcome(False, f"unknown entity: {e}")
        if joint is None:
            return Outcome(False, f"no joint {self.male} -> {self.female}")
        result = world.decouple_male(joint)
        return Outcome(result.ok, None if result.ok else result.failure.value)


@dataclass(frozen=True)
class DecoupleFemale:
    male: str
    female: str

    def __str__(self) -> str:
        return f"decouple-female {self.male} {self.female}"

    def to_dict(self) -> dict:
        return {"op": "decouple-female", "male": self.male, "female": self.female}

    def apply(self, world: World) -> "Outcome":
        try:
            joint = world.find_joint(self.male, self.female)
        except KeyError as e:
            return Outcome(False, f"unknown entity: {e}")
        if joint is None:
            return Outcome(False, f"no joint {self.male} -> {self.female}")
        result = world.decouple_female(joint)
        return Outcome(result.ok, None if result.ok else result.failure.value)


@dataclass(frozen=True)
class SetPower:
    module: str
    powered: bool

    def __str__(self) -> str:
        return f"set-power {self.module} {'on' if self.powered else 'off'}"

    def to_dict(self) -> dict:
        return {"op": "set-power", "module": self.module, "powered": self.powered}

    def apply(self, world: World) -> "Outcome":
        try:
            world.set_power(self.module, self.powered)
        except KeyError as e:
            return Outcome(False, f"unknown entity: {e}")
        return Outcome(True)


Action = Slide | Couple | DecoupleMale | DecoupleFemale | SetPower


@dataclass(frozen=True)
class Outcome:
    ok: bool
    reason: str | None = None


def action_from_dict(data: dict) -> Action:
    ops = {
        "slide": lambda d: Slide(d["module"], d["direction"]),
        "couple": lambda d: Couple(d["initiator"], d["target"]),
        "decouple-male": lambda d: DecoupleMale(d["male"], d["female"]),
        "decouple-female": lambda d: DecoupleFemale(d["male"], d["female"]),
        "set-power": lambda d: SetPower(d["module"], bool(d["powered"])),
    }
    op = data.get("op")
    if op not in ops:
        raise ValueError(f"unknown action op: {op!r}")
    try:
        return ops[op](data)
    except KeyError as e:
        raise ValueError(f"action {op!r} missing field {e}") from None


@dataclass(frozen=True)
class Plan:
    """Ordered actions plus the expected world hash after each one."""

    actions: tuple[Action, ...]
    step_hashes: tuple[str, ...] = ()

    @property
    def cost(self) -> int:
        return len(self.actions)

    def to_dict(self) -> dict:
        return {
            "version": PLAN_VERSION,
            "actions": [a.to_dict() for a in self.actions],
            "step_hashes": list(self.step_hashes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Plan":
        version = data.get("version", PLAN_VERSION)
        if version != PLAN_VERSION:
            raise ValueError(f"unsupported plan version: {version}")
        actions = tuple(action_from_dict(a) for a in data.get("actions", []))
        return cls(actions=actions, step_hashes=tuple(data.get("step_hashes", ())))


def materialize_plan(start: World, actions: tuple[Action, ...]) -> Plan:
    """Replay actions on a copy of the start world, recording per-step hashes."""
    world = start.clone()
    hashes = []
    for action in actions:
        outcome = action.apply(world)
        if not outcome.ok:
            raise ValueError(f"plan does not execute: {action}: {outcome.reason}")
        hashes.append(world.state_hash())
    return Plan(actions=tuple(actions), step_hashes=tuple(hashes))


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    failed_step: int | None = None  # index of failing action; len(actions) = goal mismatch
    reason: str | None = None

    def __str__(self) -> str:
        if self.valid:
            return "valid"
        return f"invalid at step {self.failed_step}: {self.reason}"


def _goal_key(world: World, exact_ids: bool) -> tuple:
    return world.shape_key(include_ids=exact_ids)


def validate_plan(start: World, plan: Plan, goal: World, *,
                  exact_ids: bool = False) -> ValidationReport:
    """Replay the plan through the real engines against the goal.

    Every action must succeed, the anchor gate must hold after each one,
    recorded step hashes (when present) must reproduce, and the final world
    must match the goal (shape-only by default, exact module ids on
    request).
    """
    world = start.clone()
    bad = world.unanchored_jointed()
    if bad:
        return ValidationReport(False, None, f"start violates anchor gate: {', '.join(bad)}")
    check_hashes = len(plan.step_hashes) == len(plan.actions)
    for i, action in enumerate(plan.actions):
        outcome = action.apply(world)
        if not outcome.ok:
            return ValidationReport(False, i, f"{action}: {outcome.reason}")
        try:
            world.assert_structure()
        except FloatingModules as e:
            return ValidationReport(False, i, str(e))
        if check_hashes and plan.step_hashes[i] != world.state_hash():
            return ValidationReport(False, i, f"{action}: world hash mismatch")
    if _goal_key(world, exact_ids) != _goal_key(goal, exact_ids):
        return ValidationReport(False, len(plan.actions), "final world does not match goal")
    return ValidationReport(True)


# -- search -----------------------------------------------------------------


def build_arena(start: World, goal: World, padding: int = 1) -> frozenset[Vec]:
    """Cells the search may occupy: the joint bounding box, padded.

    The paper-level problem is unbounded; a finite arena keeps exhaustive
    search meaningful.  Padding 1 gives modules room to route around the
    structure.
    """
    cells = set(start.occupancy) | set(goal.occupancy)
    if not cells:
        return frozenset()
    los = [min(c[i] for c in cells) - padding for i in range(3)]
    his = [max(c[i] for c in cells) + padding for i in range(3)]
    return frozenset(product(*(range(lo, hi + 1) for lo, hi in zip(los, his))))


def _mismatch(world: World, goal: World, exact_ids: bool) -> int:
    """Admissible distance: each action fixes at most one unit of mismatch."""
    if exact_ids:
        mine = {m.id: m.cell for m in world.modules.values()}
        theirs = {m.id: m.cell for m in goal.modules.values()}
        cell_diff = sum(1 for k in mine.keys() | theirs.keys() if mine.get(k) != theirs.get(k))
    else:
        cell_diff = len(set(world.occupancy) ^ set(goal.occupancy))
    joint_diff = len(set(_joint_pairs(world)) ^ set(_joint_pairs(goal)))
    return (cell_diff + 1) // 2 + joint_diff


def _joint_pairs(world: World) -> list[tuple[Vec, Vec]]:
    pairs = []
    for joint in world.joints():
        a = world.modules[joint.male.addr.partition(":")[0]].cell
        b = world.modules[joint.female.addr.partition(":")[0]].cell
        pairs.append(tuple(sorted((a, b))))
    return pairs


def legal_actions(world: World, arena: frozenset[Vec]) -> list[Action]:
    """Every primitive whose guards pass right now, in deterministic order.

    Structural consequences (the anchor gate) are not judged here; the
    search applies each action to a snapshot and discards violating
    results.
    """
    actions: list[Action] = []
    for mid in sorted(world.modules):
        module = world.modules[mid]
        actions.append(SetPower(mid, not module.powered))
        if module.anchored or module.joints():
            continue
        for d in FACE_NAMES:
            if add(module.cell, DIRECTIONS[d]) in arena and world.can_slide(mid, d):
                actions.append(Slide(mid, d))
    for mid in sorted(world.modules):
        module = world.modules[mid]
        for d in FACE_NAMES:
            neighbor = world.module_at(add(module.cell, DIRECTIONS[d]))
            if neighbor is None:
                continue
            mine = module.face_toward(d)
            theirs = neighbor.face_toward(opposite(d))
            if (mine.kind is FaceKind.ACTIVE and mine.can_actuate()
                    and mine.open_female and mine.joint is None
                    and theirs.open_female):
                actions.append(Couple(mine.addr, theirs.addr))
    for joint in world.joints():
        male, female = joint.male, joint.female
        if male.can_actuate():
            actions.append(DecoupleMale(male.addr, female.addr))
        if female.kind is FaceKind.ACTIVE and female.can_actuate():
            peer_holds = male.connector is not None and male.connector.servo.holding
            if not peer_holds or joint.electrical:
                actions.append(DecoupleFemale(male.addr, female.addr))
    actions.sort(key=str)
    return actions


def successors(world: World, arena: frozenset[Vec]):
    """Yield (action, resulting world) for every legal, gate-respecting action."""
    for action in legal_actions(world, arena):
        nxt = world.clone()
        outcome = action.apply(nxt)
        if not outcome.ok:
            continue
        if nxt.unanchored_jointed():
            continue
        yield action, nxt


@dataclass(frozen=True)
class SearchResult:
    plan: Plan | None
    nodes_expanded: int
    exhausted: bool  # True: the whole arena-bounded space was enumerated

    @property
    def solved(self) -> bool:
        return self.plan is not None


def plan_reconfiguration(start: World, goal: World, budget: int = 50_000, *,
                         exact_ids: bool = False,
                         arena_padding: int = 1) -> SearchResult:
    """A* over world snapshots; optimal in action count within the arena.

    ``budget`` caps expanded nodes.  A ``SearchResult`` with no plan and
    ``exhausted`` set means the bounded problem is genuinely unsolvable;
    without ``exhausted`` the budget simply ran out.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    arena = build_arena(start, goal, arena_padding)
    root = start.clone()

    def dedup_key(w: World) -> tuple:
        return w.state_key(include_ids=exact_ids)

    best_g: dict[tuple, int] = {dedup_key(root): 0}
    counter = 0  # insertion order; generation is already lexicographic per node
    h0 = _mismatch(root, goal, exact_ids)
    frontier: list[tuple[int, int, int, World, tuple[Action, ...]]] = [
        (h0, 0, counter, root, ())]
    expanded = 0
    goal_target = _goal_key(goal, exact_ids)
    while frontier:
        f, g, _, world, actions = heapq.heappop(frontier)
        key = dedup_key(world)
        if g > best_g.get(key, g):
            continue  # stale entry
        if _goal_key(world, exact_ids) == goal_target:
            return SearchResult(materialize_plan(start, actions), expanded, False)
        if expanded >= budget:
            return SearchResult(None, expanded, False)
        expanded += 1
        for action, nxt in successors(world, arena):
            key_n = dedup_key(nxt)
            g_n = g + 1
            if g_n >= best_g.get(key_n, g_n + 1):
                continue
            best_g[key_n] = g_n
            counter += 1
            h_n = _mismatch(nxt, goal, exact_ids)
            heapq.heappush(frontier, (g_n + h_n, g_n, counter, nxt, actions + (action,)))
    return SearchResult(None, expanded, True)
