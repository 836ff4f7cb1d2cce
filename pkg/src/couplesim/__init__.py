"""Deterministic simulator and planner for role-switching lattice connectors.

Modules couple through faces that switch between female (flush) and male
(protruding) states over time.  The package models the four-state connector
and its servo, the three single-sided protocols (couple, decouple from
either side), the cubic-lattice world with flat-surface sliding, load and
power rules, and a best-first reconfiguration planner, all driven through
scenario files and a CLI with reproducible event traces.
"""

from .config import DEFAULT_CONFIG, SimConfig
from .connector import (
    BackDriveResisted,
    Connector,
    ConnectorError,
    ConnectorState,
    ServoModel,
    TransitionOutcome,
    TransitionResult,
    back_drive,
    command_transition,
    detect_blockage,
    state_angle,
)
from .geometry import DIRECTIONS, FACE_NAMES, ROTATIONS, relative_yaw
from .planner import (
    Action,
    Couple,
    DecoupleFemale,
    DecoupleMale,
    Plan,
    SearchResult,
    SetPower,
    Slide,
    ValidationReport,
    action_from_dict,
    build_arena,
    legal_actions,
    materialize_plan,
    plan_reconfiguration,
    successors,
    validate_plan,
)
from .protocol import (
    Face,
    FaceKind,
    Failure,
    Joint,
    Misalignment,
    ProtocolResult,
    check_alignment,
    couple,
    decouple_from_female,
    decouple_from_male,
    holds_when_unpowered,
)
from .scenario import (
    MisalignmentPolicy,
    RunResult,
    Scenario,
    ScenarioError,
    bundled_scenario_path,
    load_plan,
    run_scenario,
    save_plan,
    scenario_for_world,
    world_to_dict,
)
from .trace import (
    KIND_ACTION,
    KIND_ERROR,
    KIND_JOINT,
    KIND_SAMPLE,
    KIND_STATE,
    EventTrace,
    SimClock,
    TraceEvent,
)
from .world import (
    CellOccupied,
    ConnectivityReport,
    FloatingModules,
    LoadCheck,
    LoadVector,
    Module,
    ModuleJointed,
    SlideBlocked,
    World,
    WorldError,
    check_load,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CONFIG", "SimConfig",
    "ConnectorState", "ServoModel", "Connector", "TransitionOutcome",
    "TransitionResult", "ConnectorError", "BackDriveResisted",
    "state_angle", "command_transition", "detect_blockage", "back_drive",
    "FACE_NAMES", "DIRECTIONS", "ROTATIONS", "relative_yaw",
    "Face", "FaceKind", "Failure", "Joint", "Misalignment", "ProtocolResult",
    "check_alignment", "couple", "decouple_from_male", "decouple_from_female",
    "holds_when_unpowered",
    "Module", "LoadVector", "LoadCheck", "World", "WorldError",
    "CellOccupied", "ModuleJointed", "SlideBlocked", "FloatingModules",
    "ConnectivityReport", "check_load",
    "Action", "Slide", "Couple", "DecoupleMale", "DecoupleFemale", "SetPower",
    "Plan", "SearchResult", "ValidationReport", "action_from_dict",
    "build_arena", "legal_actions", "materialize_plan", "plan_reconfiguration",
    "successors", "validate_plan",
    "Scenario", "ScenarioError", "MisalignmentPolicy", "RunResult",
    "run_scenario", "world_to_dict", "scenario_for_world", "load_plan", "save_plan",
    "bundled_scenario_path",
    "EventTrace", "TraceEvent", "SimClock",
    "KIND_STATE", "KIND_SAMPLE", "KIND_JOINT", "KIND_ACTION", "KIND_ERROR",
    "__version__",
]
