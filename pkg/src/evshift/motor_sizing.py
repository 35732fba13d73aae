"""Motor selection against steady-state vehicle requirements.

Given constant-speed design points (speed + grade), each candidate overall
ratio maps the wheel-side requirement to the motor side: torque divides by
the ratio, speed multiplies, power is ratio-invariant. A motor passes a
design point when some ratio satisfies torque, power and speed limits
simultaneously; a larger ratio spread buys peak-torque headroom without
giving up top speed, which is the whole case for a two-speed gearbox.

Requirements here are steady-state road load only (the design points are
constant-speed); acceleration reserve and thermal derating are out of
scope. ``efficiency`` scales the demand the motor actually sees.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .feasibility import RPM_TO_RAD_S, MotorLimits
from .vehicle_load import RoadCondition, VehicleParams, road_load_torque

__all__ = [
    "DesignSpec",
    "WheelRequirement",
    "MotorRequirement",
    "SizingReport",
    "wheel_requirements",
    "motor_requirements",
    "check_motor",
    "capacity_envelope",
    "EnvelopePoint",
]

_DURATIONS = ("continuous", "short")


@dataclass(frozen=True)
class DesignSpec:
    """One constant-speed design point.

    Parameters
    ----------
    name : str
    speed : float
        Vehicle speed to sustain [m/s].
    grade : float
        Road grade rise/run [-], e.g. 0.20 for 20 %.
    duration : str
        ``"continuous"`` or ``"short"``; carried as a label only (no
        thermal model), so short-duration points may use peak ratings.
    """

    name: str
    speed: float
    grade: float = 0.0
    duration: str = "short"

    def __post_init__(self) -> None:
        if self.speed < 0.0:
            raise ValueError("design speed must be >= 0")
        if self.duration not in _DURATIONS:
            raise ValueError(f"duration must be one of {_DURATIONS}")


class WheelRequirement(NamedTuple):
    torque: float  # N*m at the wheels
    power: float  # W
    speed: float  # rad/s at the wheels


class MotorRequirement(NamedTuple):
    ratio: float
    torque: float  # N*m at the motor shaft
    power: float  # W
    speed: float  # rad/s at the motor shaft


def wheel_requirements(p: VehicleParams, spec: DesignSpec) -> WheelRequirement:
    """Steady-state wheel-side requirement for one design point.

    Zero-acceleration road load at ``spec.speed`` on ``spec.grade``;
    power is torque times wheel speed.
    """
    torque = road_load_torque(p, spec.speed, RoadCondition(grade=spec.grade))
    speed = spec.speed / p.wheel_radius
    return WheelRequirement(torque=torque, power=torque * speed, speed=speed)


def motor_requirements(
    wheel: WheelRequirement, ratios, efficiency: float = 1.0
) -> list[MotorRequirement]:
    """Motor-side requirement for each candidate overall ratio."""
    if efficiency <= 0.0 or efficiency > 1.0:
        raise ValueError("efficiency must be in (0, 1]")
    out = []
    for r in sorted(ratios, reverse=True):
        if r <= 0.0:
            raise ValueError("ratios must be positive")
        out.append(
            MotorRequirement(
                ratio=r,
                torque=wheel.torque / (r * efficiency),
                power=wheel.power / efficiency,
                speed=wheel.speed * r,
            )
        )
    return out


@dataclass(frozen=True)
class SizingReport:
    """Motor-vs-requirements evaluation over all design points."""

    motor: MotorLimits
    ratios: tuple
    specs: tuple
    wheel: dict  # name -> WheelRequirement
    motor_side: dict  # name -> list[MotorRequirement]
    passes: dict  # name -> {ratio: bool}
    spec_pass: dict  # name -> bool

    @property
    def overall_pass(self) -> bool:
        return all(self.spec_pass.values())

    @property
    def required_torque(self) -> float:
        """Peak motor torque the ratio set demands [N*m]: worst design
        point referred through the largest (most torque-favorable) ratio."""
        top = max(self.ratios)
        return max(
            next(m.torque for m in reqs if m.ratio == top)
            for reqs in self.motor_side.values()
        )

    @property
    def required_power(self) -> float:
        return max(w.power for w in self.wheel.values())

    @property
    def power_margin(self) -> float:
        """Slack between the rating and the worst power demand [W]."""
        return self.motor.max_power - self.required_power

    def to_dict(self) -> dict:
        return {
            "ratios": list(self.ratios),
            "overall_pass": self.overall_pass,
            "required_torque": self.required_torque,
            "required_power": self.required_power,
            "power_margin": self.power_margin,
            "specs": {
                s.name: {
                    "speed": s.speed,
                    "grade": s.grade,
                    "duration": s.duration,
                    "wheel": self.wheel[s.name]._asdict(),
                    "motor": [m._asdict() for m in self.motor_side[s.name]],
                    "passes": {repr(k): v for k, v in self.passes[s.name].items()},
                    "pass": self.spec_pass[s.name],
                }
                for s in self.specs
            },
        }


def check_motor(
    motor: MotorLimits,
    vehicle: VehicleParams,
    specs,
    ratios,
    efficiency: float = 1.0,
) -> SizingReport:
    """Evaluate a motor against design points over a candidate ratio set.

    A design point passes when at least one ratio meets its torque, power
    and speed requirements simultaneously; enlarging any motor limit can
    only add passes.
    """
    ratios = tuple(sorted(set(float(r) for r in ratios), reverse=True))
    specs = tuple(specs)
    wheel = {}
    motor_side = {}
    passes = {}
    spec_pass = {}
    for s in specs:
        w = wheel_requirements(vehicle, s)
        reqs = motor_requirements(w, ratios, efficiency)
        wheel[s.name] = w
        motor_side[s.name] = reqs
        per = {
            m.ratio: (
                m.torque <= motor.max_torque
                and m.power <= motor.max_power
                and m.speed <= motor.max_speed
            )
            for m in reqs
        }
        passes[s.name] = per
        spec_pass[s.name] = any(per.values())
    return SizingReport(
        motor=motor,
        ratios=ratios,
        specs=specs,
        wheel=wheel,
        motor_side=motor_side,
        passes=passes,
        spec_pass=spec_pass,
    )


class EnvelopePoint(NamedTuple):
    v_kmh: float
    wheel_torque: float  # N*m, best over admissible ratios
    limiting_factor: str  # torque | power | speed


def capacity_envelope(
    motor: MotorLimits,
    ratios,
    p: VehicleParams,
    v_max_kmh: float = 140.0,
    samples: int = 141,
) -> list[EnvelopePoint]:
    """Tractive-effort envelope: best deliverable wheel torque vs speed.

    At each vehicle speed, each ratio whose motor speed stays within the
    rating contributes ``ratio * min(T_max, P_max / (ratio * w_wheel))``;
    the envelope takes the best and labels which limit produced it
    (``speed`` when no ratio is admissible at all).
    """
    ratios = sorted(set(float(r) for r in ratios), reverse=True)
    pts = []
    for v_kmh in np.linspace(0.0, v_max_kmh, samples):
        w_wheel = (v_kmh / 3.6) / p.wheel_radius
        best, factor = 0.0, "speed"
        for r in ratios:
            w_m = r * w_wheel
            if w_m > motor.max_speed:
                continue
            if w_m <= motor.base_speed:
                torque, lim = r * motor.max_torque, "torque"
            else:
                torque, lim = r * motor.max_power / w_m, "power"
            if torque > best:
                best, factor = torque, lim
        pts.append(EnvelopePoint(float(v_kmh), best, factor))
    return pts
