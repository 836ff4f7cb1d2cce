"""Simulation configuration: servo table, current model, tolerances, capacities."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class SimConfig:
    """Tunable constants shared by the connector, protocol, and world engines.

    Defaults model one 120 mm cube module face: a four-position servo latch
    with a 150 mA current ceiling on the protrusion stage, +/-2.5 mm / +/-2.5 deg
    capture tolerance, and 300 N shear / 129 N axial-tension joint capacity.
    Capacities apply to every locked joint, including ones whose female side
    is a passive interface.
    """

    # Nominal servo angle per connector state, ordered along the actuation
    # path female-lock -> female-unlock -> male-unlock -> male-lock.
    # Must be strictly increasing.
    state_angles_deg: tuple[float, float, float, float] = (0.0, 45.0, 90.0, 135.0)

    servo_speed_dps: float = 90.0
    dt_s: float = 0.010

    # Current model: idle draw while powered, ceiling during the guarded
    # protrusion stage, and how long progress must stall before the
    # monitor declares a blockage.
    idle_current_ma: float = 20.0
    goal_current_limit_ma: float = 150.0
    stall_window_s: float = 0.200

    angle_tolerance_deg: float = 1.0

    # Capture envelope for one coupling attempt (closed boundary).
    xy_tolerance_mm: float = 2.5
    yaw_tolerance_deg: float = 2.5

    # Per-axis static load capacities of a locked joint.
    shear_capacity_n: float = 300.0
    axial_capacity_n: float = 129.0

    # Whether a passive interface carries mating pads (electrical contact on
    # active-passive joints) and whether a module energized only through the
    # network may drive its own connectors.
    passive_electrical_contact: bool = True
    energized_can_actuate: bool = True

    # Dwell between protocol stages; zero runs the stages back to back.
    inter_stage_delay_s: float = 0.0

    cell_pitch_mm: float = 120.0
    module_mass_g: float = 840.0

    def __post_init__(self) -> None:
        angles = self.state_angles_deg
        if len(angles) != 4 or any(b <= a for a, b in zip(angles, angles[1:])):
            raise ValueError(f"state angle table must be 4 strictly increasing values, got {angles}")
        if self.servo_speed_dps <= 0 or self.dt_s <= 0:
            raise ValueError("servo_speed_dps and dt_s must be positive")
        if self.goal_current_limit_ma < self.idle_current_ma:
            raise ValueError("goal current ceiling below idle current")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["state_angles_deg"] = list(self.state_angles_deg)
        return d

    @classmethod
    def from_dict(cls, overrides: dict) -> "SimConfig":
        """Build a config from a (possibly partial) mapping of field overrides."""
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in overrides.items():
            if key not in known:
                raise KeyError(f"unknown config key: {key!r}")
            if key == "state_angles_deg":
                value = tuple(float(v) for v in value)
            kwargs[key] = value
        return cls(**kwargs)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


DEFAULT_CONFIG = SimConfig()
