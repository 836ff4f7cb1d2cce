"""Versioned scenario files: world descriptions, scripts, misalignment policy.

A scenario is a JSON document (schema below) holding a world snapshot, an
optional action script, optional config overrides, and a misalignment
policy for couple actions.  Loading is strict: documents are validated
against the schema, then against lattice geometry (pre-existing joints must
mate adjacent opposing faces).  Serialization is deterministic, so a
scenario round-trips parse -> serialize -> parse to the same object and a
scripted run with a fixed seed reproduces its trace byte for byte.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .config import DEFAULT_CONFIG, SimConfig
from .connector import ConnectorState, state_angle
from .geometry import FACE_NAMES, ROTATIONS
from .planner import Action, Couple, Plan, action_from_dict
from .protocol import FaceKind, Misalignment
from .trace import KIND_ERROR, EventTrace
from .world import FloatingModules, Module, World

SCENARIO_VERSION = 1


class ScenarioError(ValueError):
    """Input rejected: bad document, bad geometry, or bad references."""


_CELL = {"type": "array", "items": {"type": "integer"}, "minItems": 3, "maxItems": 3}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["version", "world"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCENARIO_VERSION},
        "name": {"type": "string"},
        "config": {"type": "object"},
        "world": {
            "type": "object",
            "required": ["modules"],
            "additionalProperties": False,
            "properties": {
                "modules": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["id", "cell"],
                        "additionalProperties": False,
                        "properties": {
                            "id": {"type": "string", "minLength": 1},
                            "cell": _CELL,
                            "orientation": {
                                "type": "integer", "minimum": 0,
                                "maximum": len(ROTATIONS) - 1,
                            },
                            "faces": {
                                "type": "object",
                                "additionalProperties": {
                                    "enum": ["active", "passive", "blank"],
                                },
                            },
                            "states": {
                                "type": "object",
                                "additionalProperties": {"type": "string"},
                            },
                            "powered": {"type": "boolean"},
                            "anchored": {"type": "boolean"},
                        },
                    },
                },
                "joints": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["male", "female"],
                        "additionalProperties": False,
                        "properties": {
                            "male": {"type": "string"},
                            "female": {"type": "string"},
                            "electrical": {"type": "boolean"},
                        },
                    },
                },
            },
        },
        "script": {"type": "array", "items": {"type": "object"}},
        "misalignment": {
            "type": "object",
            "required": ["mode"],
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["fixed", "random"]},
                "dx_mm": {"type": "number"},
                "dy_mm": {"type": "number"},
                "dyaw_deg": {"type": "number"},
                "seed": {"type": "integer"},
                "max_xy_mm": {"type": "number", "minimum": 0},
                "max_yaw_deg": {"type": "number", "minimum": 0},
            },
        },
    },
}


@dataclass(frozen=True)
class MisalignmentPolicy:
    """Residual error applied to each scripted couple action.

    ``fixed`` applies the same offsets every time; ``random`` draws each
    component uniformly from the given envelope with a deterministic seed.
    An explicit per-action misalignment in the script wins over the policy.
    """

    mode: str = "fixed"
    dx_mm: float = 0.0
    dy_mm: float = 0.0
    dyaw_deg: float = 0.0
    seed: int = 0
    max_xy_mm: float = 2.5
    max_yaw_deg: float = 2.5

    def sampler(self):
        if self.mode == "fixed":
            fixed = Misalignment(self.dx_mm, self.dy_mm, self.dyaw_deg)
            return lambda: fixed
        rng = random.Random(self.seed)
        return lambda: Misalignment(
            rng.uniform(-self.max_xy_mm, self.max_xy_mm),
            rng.uniform(-self.max_xy_mm, self.max_xy_mm),
            rng.uniform(-self.max_yaw_deg, self.max_yaw_deg),
        )

    def to_dict(self) -> dict:
        if self.mode == "fixed":
            return {"mode": "fixed", "dx_mm": self.dx_mm, "dy_mm": self.dy_mm,
                    "dyaw_deg": self.dyaw_deg}
        return {"mode": "random", "seed": self.seed, "max_xy_mm": self.max_xy_mm,
                "max_yaw_deg": self.max_yaw_deg}

    @classmethod
    def from_dict(cls, data: dict) -> "MisalignmentPolicy":
        return cls(**data)


@dataclass(frozen=True)
class ScriptStep:
    action: Action
    misalignment: Misalignment | None = None  # couple actions only


@dataclass
class Scenario:
    name: str = ""
    config: SimConfig = DEFAULT_CONFIG
    modules: list[dict] = field(default_factory=list)
    joints: list[dict] = field(default_factory=list)
    script: list[ScriptStep] = field(default_factory=list)
    misalignment: MisalignmentPolicy = MisalignmentPolicy()

    # -- parsing ----------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            jsonschema.validate(data, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as e:
            raise ScenarioError(f"scenario does not match schema: {e.message}") from None
        overrides = {
            key: tuple(value) if isinstance(value, list) else value
            for key, value in data.get("config", {}).items()
        }
        try:
            config = replace(DEFAULT_CONFIG, **overrides)
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"bad config override: {e}") from None
        script = []
        for raw in data.get("script", []):
            raw = dict(raw)
            mis_raw = raw.pop("misalignment", None)
            try:
                action = action_from_dict(raw)
            except ValueError as e:
                raise ScenarioError(str(e)) from None
            mis = None
            if mis_raw is not None:
                if not isinstance(action, Couple):
                    raise ScenarioError("misalignment only applies to couple actions")
                mis = Misalignment(*[float(v) for v in mis_raw])
            script.append(ScriptStep(action, mis))
        return cls(
            name=data.get("name", ""),
            config=config,
            modules=[dict(m) for m in data["world"]["modules"]],
            joints=[dict(j) for j in data["world"].get("joints", [])],
            script=script,
            misalignment=MisalignmentPolicy.from_dict(data.get("misalignment", {"mode": "fixed"})),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as e:
            raise ScenarioError(f"cannot read scenario: {e}") from None
        except json.JSONDecodeError as e:
            raise ScenarioError(f"scenario is not valid JSON: {e}") from None
        if not isinstance(data, dict):
            raise ScenarioError("scenario root must be an object")
        return cls.from_dict(data)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        overrides = {
            k: v for k, v in self.config.to_dict().items()
            if v != getattr(DEFAULT_CONFIG, k)
        }
        script = []
        for step in self.script:
            entry = step.action.to_dict()
            if step.misalignment is not None:
                entry["misalignment"] = list(step.misalignment.as_tuple())
            script.append(entry)
        data: dict = {"version": SCENARIO_VERSION}
        if self.name:
            data["name"] = self.name
        if overrides:
            data["config"] = overrides
        data["world"] = {"modules": self.modules}
        if self.joints:
            data["world"]["joints"] = self.joints
        if script:
            data["script"] = script
        data["misalignment"] = self.misalignment.to_dict()
        return data

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    # -- world construction -------------------------------------------------

    def build_world(self) -> World:
        world = World(self.config)
        for spec in self.modules:
            kinds = {name: FaceKind.from_wire(k) for name, k in spec.get("faces", {}).items()}
            unknown = set(kinds) - set(FACE_NAMES)
            if unknown:
                raise ScenarioError(f"{spec['id']}: unknown face names: {sorted(unknown)}")
            module = Module.create(
                spec["id"], tuple(spec["cell"]), kinds,
                orientation=spec.get("orientation", 0),
                powered=spec.get("powered", False),
                anchored=spec.get("anchored", False),
                config=self.config,
            )
            for face_name, state_name in spec.get("states", {}).items():
                face = module.faces.get(face_name)
                if face is None or face.connector is None:
                    raise ScenarioError(f"{spec['id']}:{face_name}: state on a non-active face")
                state = ConnectorState.from_wire(state_name)
                face.connector.state = state
                face.connector.servo.angle_deg = state_angle(state, self.config)
                face.connector.servo.goal_angle_deg = face.connector.servo.angle_deg
            try:
                world.place_module(module)
            except Exception as e:
                raise ScenarioError(str(e)) from None
        for spec in self.joints:
            self._restore_joint(world, spec)
        world.refresh_power()
        return world

    def _restore_joint(self, world: World, spec: dict) -> None:
        """Recreate a pre-existing locked joint, checking geometry and states."""
        from .geometry import relative_yaw
        from .protocol import Joint

        try:
            male = world.face(spec["male"])
            female = world.face(spec["female"])
        except KeyError as e:
            raise ScenarioError(f"joint references unknown face: {e}") from None
        if male.connector is None:
            raise ScenarioError(f"{male.addr}: male side of a joint must be active")
        if male.joint is not None or female.joint is not None:
            raise ScenarioError(f"{male.addr}/{female.addr}: face already jointed")
        geo = world._adjacency(male, female)
        if geo is None:
            raise ScenarioError(f"joint faces not adjacent/opposed: {male.addr} {female.addr}")
        if not female.open_female:
            raise ScenarioError(f"{female.addr}: female side is not a flush recess")
        mod_a, mod_b, _ = geo
        yaw = relative_yaw(mod_a.orientation, male.addr.partition(":")[2],
                           mod_b.orientation, female.addr.partition(":")[2])
        male.connector.state = ConnectorState.MALE_LOCK
        male.connector.servo.angle_deg = state_angle(ConnectorState.MALE_LOCK, self.config)
        male.connector.servo.goal_angle_deg = male.connector.servo.angle_deg
        male.connector.engaged_with = female.addr
        if female.connector is not None:
            female.connector.engaged_with = male.addr
        electrical = spec.get(
            "electrical",
            female.kind is FaceKind.ACTIVE or self.config.passive_electrical_contact)
        joint = Joint(male=male, female=female, locked=True,
                      electrical=electrical, relative_yaw=yaw)
        male.joint = joint
        female.joint = joint


def world_to_dict(world: World) -> dict:
    """Snapshot a live world in scenario form (modules + joints, no script)."""
    modules = []
    for mid in sorted(world.modules):
        m = world.modules[mid]
        faces = {
            name: m.faces[name].kind.value for name in FACE_NAMES
            if m.faces[name].kind is not FaceKind.BLANK
        }
        states = {
            name: m.faces[name].connector.state.wire_name for name in FACE_NAMES
            if m.faces[name].connector is not None
        }
        entry: dict = {"id": mid, "cell": list(m.cell), "orientation": m.orientation}
        if faces:
            entry["faces"] = faces
        if states:
            entry["states"] = states
        if m.powered:
            entry["powered"] = True
        if m.anchored:
            entry["anchored"] = True
        modules.append(entry)
    joints = [
        {"male": j.male.addr, "female": j.female.addr, "electrical": j.electrical}
        for j in world.joints()
    ]
    out: dict = {"version": SCENARIO_VERSION, "world": {"modules": modules}}
    if joints:
        out["world"]["joints"] = joints
    return out


def scenario_for_world(world: World, name: str = "") -> Scenario:
    data = world_to_dict(world)
    if name:
        data["name"] = name
    return Scenario.from_dict(data)


@dataclass
class RunResult:
    ok: bool
    world: World
    trace: EventTrace
    failed_step: int | None = None
    reason: str | None = None

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1


def run_scenario(scenario: Scenario, *, seed: int | None = None) -> RunResult:
    """Execute the script through the engine; first failure stops the run.

    ``seed`` overrides the scenario's random-misalignment seed, letting the
    CLI re-roll a stochastic scenario without editing the file.
    """
    policy = scenario.misalignment
    if seed is not None:
        policy = replace(policy, seed=seed)
    sample = policy.sampler()
    world = scenario.build_world()
    for i, step in enumerate(scenario.script):
        if isinstance(step.action, Couple):
            mis = step.misalignment if step.misalignment is not None else sample()
            outcome = step.action.apply(world, mis)
        else:
            outcome = step.action.apply(world)
        if not outcome.ok:
            return RunResult(False, world, world.trace, failed_step=i,
                             reason=f"{step.action}: {outcome.reason}")
        try:
            world.assert_structure()
        except FloatingModules as e:
            world.trace.emit(world.clock.now, "world", KIND_ERROR, {
                "op": "structure-check", "reason": str(e),
            })
            return RunResult(False, world, world.trace, failed_step=i, reason=str(e))
    return RunResult(True, world, world.trace)


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package (no .json suffix needed)."""
    path = Path(__file__).parent / "scenarios" / f"{name}.json"
    if not path.is_file():
        available = sorted(p.stem for p in path.parent.glob("*.json"))
        raise ScenarioError(f"no bundled scenario {name!r}; available: {', '.join(available)}")
    return path


def load_plan(path: str | Path) -> Plan:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as e:
        raise ScenarioError(f"cannot read plan: {e}") from None
    except json.JSONDecodeError as e:
        raise ScenarioError(f"plan is not valid JSON: {e}") from None
    try:
        return Plan.from_dict(data)
    except ValueError as e:
        raise ScenarioError(str(e)) from None


def save_plan(plan: Plan, path: str | Path) -> None:
    Path(path).write_text(json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n")
