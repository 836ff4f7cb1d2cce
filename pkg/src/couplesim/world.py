"""Cubic-lattice world: module poses, adjacency, joints, sliding, power, loads.

Modules occupy integer cells (one per cell) in one of the 24 cube
orientations.  Placement never forms joints; joints only come from the
pairwise protocols, invoked here through wrappers that add the geometric
checks (adjacent cells, opposing faces, quarter-turn yaw from the two
orientations).  Sliding is the assembler primitive and obeys the
flat-surface rule: the mover and every neighbor face looking into the swept
cells must be flush.  Power flows from self-powered modules across
electrical joints; structure flows from anchors across any locked joint.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

from .config import DEFAULT_CONFIG, SimConfig
from .connector import Connector, ConnectorState
from .geometry import (
    DIRECTIONS,
    FACE_NAMES,
    ROTATIONS,
    Vec,
    add,
    face_world_normal,
    neg,
    opposite,
    relative_yaw,
    world_face_map,
)
from .protocol import (
    Face,
    FaceKind,
    Failure,
    Joint,
    Misalignment,
    ProtocolResult,
    couple,
    decouple_from_female,
    decouple_from_male,
)
from .trace import KIND_ACTION, KIND_ERROR, EventTrace, SimClock


class WorldError(Exception):
    """Base for lattice bookkeeping failures."""


class CellOccupied(WorldError):
    pass


class ModuleJointed(WorldError):
    pass


class SlideBlocked(WorldError):
    pass


class FloatingModules(WorldError):
    """A jointed cluster lost its anchor."""

    def __init__(self, module_ids: tuple[str, ...]):
        self.module_ids = module_ids
        super().__init__(f"jointed modules without an anchor: {', '.join(module_ids)}")


@dataclass
class Module:
    """One cube at a lattice cell, six faces indexed by local name.

    ``orientation`` is an index into the fixed 24-rotation table (0 is the
    identity); scenario files use the same indexing.
    """

    id: str
    cell: Vec
    orientation: int = 0
    faces: dict[str, Face] = field(default_factory=dict)
    powered: bool = False
    anchored: bool = False
    mass_g: float = 840.0

    @classmethod
    def create(cls, module_id: str, cell: Vec, face_kinds: dict[str, FaceKind | str] | None = None,
               *, orientation: int = 0, powered: bool = False, anchored: bool = False,
               config: SimConfig = DEFAULT_CONFIG) -> "Module":
        """Build a module with fresh connectors on its active faces.

        ``face_kinds`` maps local face names to kinds; unnamed faces are
        blank.
        """
        if not 0 <= orientation < len(ROTATIONS):
            raise ValueError(f"{module_id}: orientation index out of range: {orientation}")
        kinds = dict(face_kinds or {})
        faces: dict[str, Face] = {}
        for name in FACE_NAMES:
            raw = kinds.pop(name, FaceKind.BLANK)
            kind = raw if isinstance(raw, FaceKind) else FaceKind.from_wire(raw)
            conn = None
            if kind is FaceKind.ACTIVE:
                conn = Connector.new(f"{module_id}:{name}", config, powered=powered)
            faces[name] = Face(addr=f"{module_id}:{name}", kind=kind, connector=conn)
        if kinds:
            raise ValueError(f"{module_id}: unknown face names: {sorted(kinds)}")
        return cls(id=module_id, cell=cell, orientation=orientation, faces=faces,
                   powered=powered, anchored=anchored, mass_g=float(config.module_mass_g))

    def face(self, local_name: str) -> Face:
        return self.faces[local_name]

    def face_toward(self, world_dir: str) -> Face:
        """The face whose outward normal points along a world axis direction."""
        return self.faces[world_face_map(self.orientation)[world_dir]]

    def world_normal(self, local_name: str) -> Vec:
        return face_world_normal(self.orientation, local_name)

    def joints(self) -> list[Joint]:
        seen: list[Joint] = []
        for name in FACE_NAMES:
            j = self.faces[name].joint
            if j is not None and j not in seen:
                seen.append(j)
        return seen


@dataclass(frozen=True)
class LoadVector:
    """Static load on one joint, in the joint's face frame (newtons).

    Positive ``axial_z`` pulls the faces apart; compression is taken by the
    mating surfaces and is not capacity-limited here.
    """

    shear_x: float = 0.0
    shear_y: float = 0.0
    axial_z: float = 0.0

    def __post_init__(self) -> None:
        for v in (self.shear_x, self.shear_y, self.axial_z):
            if not math.isfinite(v):
                raise ValueError("load components must be finite")


@dataclass(frozen=True)
class LoadCheck:
    holds: bool
    failed_axes: tuple[str, ...] = ()


def check_load(joint: Joint, load: LoadVector, config: SimConfig = DEFAULT_CONFIG) -> LoadCheck:
    """Per-axis capacity check; power state on either side is irrelevant.

    Capacities are closed bounds: a load exactly at capacity holds.  Axes
    are judged independently (no interaction model).
    """
    if not joint.locked:
        raise ValueError("load check applies to locked joints only")
    failed = []
    if abs(load.shear_x) > config.shear_capacity_n:
        failed.append("x")
    if abs(load.shear_y) > config.shear_capacity_n:
        failed.append("y")
    if load.axial_z > config.axial_capacity_n:
        failed.append("z")
    return LoadCheck(holds=not failed, failed_axes=tuple(failed))


@dataclass(frozen=True)
class ConnectivityReport:
    ok: bool
    floating: tuple[str, ...] = ()


class World:
    """Module registry, occupancy map, and the shared clock/trace."""

    def __init__(self, config: SimConfig = DEFAULT_CONFIG, *, trace: EventTrace | None = None):
        self.config = config
        self.modules: dict[str, Module] = {}
        self.occupancy: dict[Vec, str] = {}
        self.clock = SimClock(config.dt_s)
        self.trace = trace if trace is not None else EventTrace()

    # -- registry ---------------------------------------------------------

    def place_module(self, module: Module) -> None:
        """Register a module at its cell.  Placement never forms joints."""
        if module.id in self.modules:
            raise WorldError(f"duplicate module id: {module.id}")
        if module.cell in self.occupancy:
            raise CellOccupied(f"cell {module.cell} already holds {self.occupancy[module.cell]}")
        self.modules[module.id] = module
        self.occupancy[module.cell] = module.id
        self.trace.emit(self.clock.now, module.id, KIND_ACTION, {
            "op": "place", "cell": list(module.cell), "anchored": module.anchored,
            "powered": module.powered,
        })
        self.refresh_power()

    def module_at(self, cell: Vec) -> Module | None:
        mid = self.occupancy.get(cell)
        return self.modules[mid] if mid is not None else None

    def face(self, addr: str) -> Face:
        module_id, _, local = addr.partition(":")
        if not local:
            raise KeyError(f"face address must be '<module>:<face>': {addr!r}")
        return self.modules[module_id].faces[local]

    def joints(self) -> list[Joint]:
        out: list[Joint] = []
        for mid in sorted(self.modules):
            for j in self.modules[mid].joints():
                if j not in out:
                    out.append(j)
        return out

    def find_joint(self, male_addr: str, female_addr: str) -> Joint | None:
        j = self.face(male_addr).joint
        if j is not None and j.key == (male_addr, female_addr):
            return j
        return None

    # -- sliding ----------------------------------------------------------

    def can_slide(self, module_id: str, direction: str) -> bool:
        """Flat-surface rule over the two swept cells, plus empty destination."""
        module = self.modules[module_id]
        if direction not in DIRECTIONS:
            raise KeyError(f"unknown direction: {direction!r}")
        if module.joints():
            raise ModuleJointed(f"{module_id} is jointed and cannot slide")
        if module.anchored:
            return False
        dest = add(module.cell, DIRECTIONS[direction])
        if dest in self.occupancy:
            return False
        if not all(module.faces[name].flat for name in FACE_NAMES):
            return False
        for cell in (module.cell, dest):
            for d in FACE_NAMES:
                neighbor = self.module_at(add(cell, DIRECTIONS[d]))
                if neighbor is None or neighbor is module:
                    continue
                if not neighbor.face_toward(opposite(d)).flat:
                    return False
        return True

    def slide_module(self, module_id: str, direction: str) -> None:
        if not self.can_slide(module_id, direction):
            raise SlideBlocked(f"{module_id} cannot slide {direction}")
        module = self.modules[module_id]
        origin = module.cell
        dest = add(origin, DIRECTIONS[direction])
        del self.occupancy[origin]
        self.occupancy[dest] = module_id
        module.cell = dest
        self.trace.emit(self.clock.now, module_id, KIND_ACTION, {
            "op": "slide", "direction": direction, "from": list(origin), "to": list(dest),
        })

    # -- coupling wrappers (geometry + protocol + power refresh) -----------

    def _adjacency(self, initiator: Face, target: Face) -> tuple[Module, Module, Vec] | None:
        """Modules and world normal if the faces oppose across one cell pitch."""
        mod_a = self.modules[initiator.addr.partition(":")[0]]
        mod_b = self.modules[target.addr.partition(":")[0]]
        local_a = initiator.addr.partition(":")[2]
        local_b = target.addr.partition(":")[2]
        n_a = mod_a.world_normal(local_a)
        n_b = mod_b.world_normal(local_b)
        if n_b != neg(n_a) or add(mod_a.cell, n_a) != mod_b.cell:
            return None
        return mod_a, mod_b, n_a

    def couple_faces(self, initiator_addr: str, target_addr: str,
                     mis: Misalignment | None = None) -> ProtocolResult:
        initiator = self.face(initiator_addr)
        target = self.face(target_addr)
        geo = self._adjacency(initiator, target)
        if geo is None:
            self.trace.emit(self.clock.now, initiator_addr, KIND_ERROR, {
                "op": "couple", "reason": Failure.NOT_ADJACENT.value, "target": target_addr,
            })
            return ProtocolResult(False, Failure.NOT_ADJACENT)
        mod_a, mod_b, _ = geo
        yaw = relative_yaw(mod_a.orientation, initiator_addr.partition(":")[2],
                           mod_b.orientation, target_addr.partition(":")[2])
        result = couple(initiator, target, mis, self.config,
                        trace=self.trace, clock=self.clock, relative_yaw=yaw)
        if result.ok:
            self.refresh_power()
        return result

    def decouple_male(self, joint: Joint) -> ProtocolResult:
        result = decouple_from_male(joint, self.config, trace=self.trace, clock=self.clock)
        if result.ok:
            self.refresh_power()
        return result

    def decouple_female(self, joint: Joint) -> ProtocolResult:
        result = decouple_from_female(joint, self.config, trace=self.trace, clock=self.clock)
        if result.ok:
            self.refresh_power()
        return result

    # -- power ------------------------------------------------------------

    def set_power(self, module_id: str, powered: bool) -> None:
        module = self.modules[module_id]
        if module.powered != powered:
            module.powered = powered
            self.trace.emit(self.clock.now, module_id, KIND_ACTION, {
                "op": "set-power", "powered": powered,
            })
        self.refresh_power()

    def propagate_power(self) -> set[str]:
        """Modules reachable from any self-powered module over electrical joints."""
        energized = {mid for mid, m in self.modules.items() if m.powered}
        frontier = list(energized)
        while frontier:
            module = self.modules[frontier.pop()]
            for joint in module.joints():
                if not joint.electrical:
                    continue
                for face in joint.faces():
                    other = face.addr.partition(":")[0]
                    if other not in energized:
                        energized.add(other)
                        frontier.append(other)
        return energized

    def refresh_power(self) -> set[str]:
        """Re-derive every servo's supply from module power and the bus."""
        energized = self.propagate_power()
        for module in self.modules.values():
            live = module.powered or (
                module.id in energized and self.config.energized_can_actuate)
            for face in module.faces.values():
                if face.connector is not None:
                    face.connector.servo.powered = live
                    if not live:
                        face.connector.servo.measured_current_ma = 0.0
        return energized

    # -- structure ----------------------------------------------------------

    def _joint_components(self) -> list[set[str]]:
        seen: set[str] = set()
        components = []
        for mid in sorted(self.modules):
            if mid in seen:
                continue
            comp = {mid}
            frontier = [mid]
            while frontier:
                module = self.modules[frontier.pop()]
                for joint in module.joints():
                    for face in joint.faces():
                        other = face.addr.partition(":")[0]
                        if other not in comp:
                            comp.add(other)
                            frontier.append(other)
            seen |= comp
            components.append(comp)
        return components

    def connectivity_check(self) -> ConnectivityReport:
        """Strict audit: every non-anchored module must reach an anchor.

        Stock modules that were never coupled are reported floating too;
        with no anchors at all, everything is floating by convention.
        """
        floating: list[str] = []
        for comp in self._joint_components():
            if not any(self.modules[mid].anchored for mid in comp):
                floating.extend(mid for mid in comp if not self.modules[mid].anchored)
        return ConnectivityReport(ok=not floating, floating=tuple(sorted(floating)))

    def unanchored_jointed(self) -> tuple[str, ...]:
        """Jointed clusters with no anchor: the hard structural violation.

        A lone jointless module is stock awaiting assembly, not a violation;
        this is the gate plan execution enforces after every action.
        """
        bad: list[str] = []
        for comp in self._joint_components():
            if len(comp) == 1 and not self.modules[next(iter(comp))].joints():
                continue
            if not any(self.modules[mid].anchored for mid in comp):
                bad.extend(comp)
        return tuple(sorted(bad))

    def assert_structure(self) -> None:
        bad = self.unanchored_jointed()
        if bad:
            raise FloatingModules(bad)

    # -- canonical state ----------------------------------------------------

    def _cell_entry(self, module: Module) -> tuple:
        per_dir = []
        for d in FACE_NAMES:
            face = module.face_toward(d)
            state = int(face.connector.state) if face.connector is not None else -1
            per_dir.append((face.kind.value, state))
        return (module.cell, module.anchored, module.powered, tuple(per_dir))

    def _joint_entries(self, include_ids: bool) -> tuple:
        entries = []
        for joint in self.joints():
            male_mod = self.modules[joint.male.addr.partition(":")[0]]
            female_mod = self.modules[joint.female.addr.partition(":")[0]]
            entry = (male_mod.cell, female_mod.cell, joint.electrical, joint.relative_yaw)
            if include_ids:
                entry = (male_mod.id, female_mod.id) + entry
            entries.append(entry)
        return tuple(sorted(entries))

    def state_key(self, *, include_ids: bool = False) -> tuple:
        """Full behavioral state for search dedup.

        Free of module identity by default, since interchangeable modules
        make shape-equal worlds behave identically; include ids when goals
        are id-exact, so id permutations stay distinct.
        """
        if include_ids:
            cells = tuple(sorted((m.id, self._cell_entry(m)) for m in self.modules.values()))
        else:
            cells = tuple(sorted(self._cell_entry(m) for m in self.modules.values()))
        return (cells, self._joint_entries(include_ids))

    def shape_key(self, *, include_ids: bool = False) -> tuple:
        """Occupied cells, world-frame face kinds, unordered joint pairs.

        This is the goal-matching view: connector states, power, and which
        side happens to be male are not part of a shape.
        """
        cells = []
        for module in self.modules.values():
            kinds = tuple(module.face_toward(d).kind.value for d in FACE_NAMES)
            entry = (module.cell, module.anchored, kinds)
            if include_ids:
                entry = (module.id,) + entry
            cells.append(entry)
        pairs = []
        for joint in self.joints():
            a = self.modules[joint.male.addr.partition(":")[0]].cell
            b = self.modules[joint.female.addr.partition(":")[0]].cell
            pairs.append(tuple(sorted((a, b))))
        return (tuple(sorted(cells)), tuple(sorted(pairs)))

    def state_hash(self) -> str:
        return hashlib.sha256(repr(self.state_key()).encode()).hexdigest()[:16]

    # -- cloning ------------------------------------------------------------

    def clone(self, *, with_trace: bool = False) -> "World":
        """Deep copy of all mutable state; the trace is dropped by default."""
        other = World(self.config,
                      trace=None if with_trace else EventTrace())
        if with_trace:
            other.trace.events = list(self.trace.events)
        other.clock.ticks = self.clock.ticks
        for mid in sorted(self.modules):
            m = self.modules[mid]
            faces = {}
            for name in FACE_NAMES:
                f = m.faces[name]
                conn = None
                if f.connector is not None:
                    src = f.connector.servo
                    conn = Connector.new(f.addr, self.config, powered=src.powered)
                    conn.state = f.connector.state
                    conn.engaged_with = f.connector.engaged_with
                    conn.servo.angle_deg = src.angle_deg
                    conn.servo.goal_angle_deg = src.goal_angle_deg
                    conn.servo.measured_current_ma = src.measured_current_ma
                    conn.servo.torque_released = src.torque_released
                    conn.servo.stall_elapsed_s = src.stall_elapsed_s
                faces[name] = Face(addr=f.addr, kind=f.kind, connector=conn)
            other.modules[mid] = Module(id=m.id, cell=m.cell, orientation=m.orientation,
                                        faces=faces, powered=m.powered, anchored=m.anchored,
                                        mass_g=m.mass_g)
            other.occupancy[m.cell] = mid
        for joint in self.joints():
            male = other.face(joint.male.addr)
            female = other.face(joint.female.addr)
            copy = Joint(male=male, female=female, locked=joint.locked,
                         electrical=joint.electrical, relative_yaw=joint.relative_yaw)
            male.joint = copy
            female.joint = copy
        return other
