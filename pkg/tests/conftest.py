"""Shared reference fixtures: the 6.5 t two-speed truck used throughout."""
from __future__ import annotations

import math
from pathlib import Path

import pytest

from evshift import (
    DrivelineParams,
    GearingSpec,
    MotorLimits,
    RoadCondition,
    Scenario,
    VehicleParams,
)

REPO = Path(__file__).resolve().parents[1]
EXAMPLE_CONFIG = REPO / "configs" / "example.yaml"


@pytest.fixture
def vehicle() -> VehicleParams:
    return VehicleParams(
        mass=6500.0,
        wheel_radius=0.3,
        frontal_area=6.0,
        drag_coeff=0.7,
        roll_coeff=0.007,
    )


@pytest.fixture
def driveline() -> DrivelineParams:
    return DrivelineParams(
        motor_inertia=0.3,
        output_inertia=0.05,
        motor_damping=0.02,
        output_damping=0.04,
        ring_inertia=0.03,
        sun_inertia=0.03,
    )


@pytest.fixture
def gearing() -> GearingSpec:
    return GearingSpec(gear1=12.0, gear2=6.0, beta1=2.0, beta2=4.0, final_drive=7.2)


@pytest.fixture
def motor() -> MotorLimits:
    return MotorLimits(
        max_torque=450.0, max_power=200e3, max_speed=8000.0 * math.pi / 30.0
    )


@pytest.fixture
def upshift65() -> Scenario:
    return Scenario(
        name="scenario1",
        direction="upshift",
        quadrant="driving",
        initial_speed=65.0 / 3.6,
        acceleration=1.0,
        road=RoadCondition(),
        torque_phase=0.25,
        inertia_phase=0.35,
        torque_demand=0.8,
    )


@pytest.fixture
def downshift18() -> Scenario:
    return Scenario(
        name="scenario2",
        direction="downshift",
        quadrant="driving",
        initial_speed=18.0 / 3.6,
        acceleration=1.0,
        road=RoadCondition(),
        torque_phase=0.25,
        inertia_phase=0.20,
        torque_demand=0.8,
    )


@pytest.fixture
def braking45() -> Scenario:
    return Scenario(
        name="scenario3",
        direction="downshift",
        quadrant="braking",
        initial_speed=45.0 / 3.6,
        acceleration=-1.5,
        road=RoadCondition(),
        torque_phase=0.25,
        inertia_phase=0.50,
    )
