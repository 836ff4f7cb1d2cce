"""Shared fixtures and independent oracles used across the suite.

The oracles here deliberately re-derive expected behavior by a different
route than the engine: flood fill for power and connectivity, direct
set arithmetic for the flat-surface slide rule, and plain breadth-first
enumeration for plan solvability.
"""

from __future__ import annotations

from collections import deque

import pytest

from couplesim import (
    DEFAULT_CONFIG,
    Connector,
    ConnectorState,
    Face,
    FaceKind,
    Module,
    World,
)
from couplesim.geometry import DIRECTIONS, FACE_NAMES, add, opposite
from couplesim.planner import legal_actions
from couplesim.trace import EventTrace, SimClock


@pytest.fixture
def clock():
    return SimClock(DEFAULT_CONFIG.dt_s)


@pytest.fixture
def trace():
    return EventTrace()


def make_face(addr: str, kind: FaceKind = FaceKind.ACTIVE, *,
              powered: bool = True, config=DEFAULT_CONFIG) -> Face:
    conn = Connector.new(addr, config, powered=powered) if kind is FaceKind.ACTIVE else None
    return Face(addr=addr, kind=kind, connector=conn)


def make_pair(*, initiator_powered: bool = True, target_kind: FaceKind = FaceKind.ACTIVE,
              target_powered: bool = False, config=DEFAULT_CONFIG):
    """A mated face pair outside any world, for pure protocol tests."""
    a = make_face("A:+x", powered=initiator_powered, config=config)
    b = make_face("B:-x", target_kind, powered=target_powered, config=config)
    return a, b


def build_world(modules, config=DEFAULT_CONFIG) -> World:
    """modules: iterable of (id, cell, face_kinds, kwargs)."""
    world = World(config)
    for mid, cell, kinds, kwargs in modules:
        world.place_module(Module.create(mid, cell, kinds, config=config, **kwargs))
    return world


# -- independent oracles ------------------------------------------------------


def flood_fill_power(world: World) -> set[str]:
    """Power reachability recomputed as a plain flood fill over joint edges."""
    edges: dict[str, set[str]] = {mid: set() for mid in world.modules}
    for joint in world.joints():
        if joint.electrical:
            a = joint.male.addr.split(":")[0]
            b = joint.female.addr.split(":")[0]
            edges[a].add(b)
            edges[b].add(a)
    seen = set()
    queue = deque(mid for mid, m in world.modules.items() if m.powered)
    seen.update(queue)
    while queue:
        for nxt in edges[queue.popleft()]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def flood_fill_anchored(world: World) -> set[str]:
    """Modules structurally reachable from an anchor over locked joints."""
    edges: dict[str, set[str]] = {mid: set() for mid in world.modules}
    for joint in world.joints():
        a = joint.male.addr.split(":")[0]
        b = joint.female.addr.split(":")[0]
        edges[a].add(b)
        edges[b].add(a)
    seen = set()
    queue = deque(mid for mid, m in world.modules.items() if m.anchored)
    seen.update(queue)
    while queue:
        for nxt in edges[queue.popleft()]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def slide_rule_oracle(world: World, module_id: str, direction: str) -> bool:
    """The flat-surface slide rule restated as set arithmetic.

    Permitted iff: not anchored, destination empty, no face of the mover
    protrudes, and no face looking into either swept cell from a third
    module protrudes (active faces in a male state are the only
    protrusions).
    """
    module = world.modules[module_id]
    if module.anchored:
        return False
    dest = add(module.cell, DIRECTIONS[direction])
    if dest in world.occupancy:
        return False

    def protrudes(face) -> bool:
        return face.kind is FaceKind.ACTIVE and face.connector.state in (
            ConnectorState.MALE_UNLOCK, ConnectorState.MALE_LOCK)

    if any(protrudes(module.faces[n]) for n in FACE_NAMES):
        return False
    for cell in (module.cell, dest):
        for d in FACE_NAMES:
            other = world.module_at(add(cell, DIRECTIONS[d]))
            if other is None or other is module:
                continue
            if protrudes(other.face_toward(opposite(d))):
                return False
    return True


def bfs_solvable(start: World, goal: World, arena, *, exact_ids: bool = False,
                 max_states: int = 500_000) -> bool:
    """Breadth-first enumeration of the entire arena-bounded state space.

    Shares the action semantics with the planner (the real engine) but none
    of its search machinery: no heuristic, no priority queue, no budget
    races.  Raises if the space exceeds ``max_states`` so a bad fixture
    fails loudly instead of hanging.
    """
    def key_of(w):
        return w.state_key(include_ids=exact_ids)

    def goal_key(w):
        return w.shape_key(include_ids=exact_ids)

    target = goal_key(goal)
    root = start.clone()
    seen = {key_of(root)}
    queue = deque([root])
    while queue:
        world = queue.popleft()
        if goal_key(world) == target:
            return True
        for action in legal_actions(world, arena):
            nxt = world.clone()
            if not action.apply(nxt).ok:
                continue
            if nxt.unanchored_jointed():
                continue
            k = key_of(nxt)
            if k in seen:
                continue
            seen.add(k)
            if len(seen) > max_states:
                raise RuntimeError("oracle state space exceeded the sanity bound")
            queue.append(nxt)
    return False
