"""Tests for steady-state motor sizing and the tractive-effort envelope.

Frozen numbers were computed once from the gross-mass design points
(8500 kg, wheel radius 0.3 m) and cross-checked here against an
independent hand evaluation of the road-load formula.
"""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evshift import (
    DesignSpec,
    MotorLimits,
    VehicleParams,
    capacity_envelope,
    check_motor,
    motor_requirements,
    wheel_requirements,
)

RPM = math.pi / 30.0

# Gross-vehicle sizing study: kerb + payload, same body as the shift tests.
GROSS = VehicleParams(
    mass=8500.0,
    wheel_radius=0.3,
    frontal_area=6.0,
    drag_coeff=0.7,
    roll_coeff=0.007,
)

SPECS = (
    DesignSpec(name="low-speed-grade", speed=20.0 / 3.6, grade=0.20, duration="short"),
    DesignSpec(name="top-speed", speed=110.0 / 3.6, grade=0.0, duration="continuous"),
    DesignSpec(name="highway-grade", speed=90.0 / 3.6, grade=0.05, duration="short"),
)

MOTOR = MotorLimits(max_torque=450.0, max_power=200e3, max_speed=8000.0 * RPM)


def test_design_spec_validation():
    with pytest.raises(ValueError):
        DesignSpec(name="bad", speed=-1.0)
    with pytest.raises(ValueError):
        DesignSpec(name="bad", speed=10.0, duration="forever")
    spec = DesignSpec(name="ok", speed=10.0)
    assert spec.grade == 0.0 and spec.duration == "short"


def test_wheel_requirements_match_hand_formula():
    # Recompute the grade point from scratch: aero + rolling + climbing,
    # with the grade angle taken as atan(rise/run).
    spec = SPECS[0]
    v = spec.speed
    alpha = math.atan(spec.grade)
    force = (
        0.5 * 1.2 * GROSS.frontal_area * GROSS.drag_coeff * v * v
        + GROSS.mass * 9.81 * GROSS.roll_coeff * math.cos(alpha)
        + GROSS.mass * 9.81 * math.sin(alpha)
    )
    expect = GROSS.wheel_radius * force
    w = wheel_requirements(GROSS, spec)
    assert abs(w.torque - expect) <= 1e-12 * expect, f"wheel torque {w.torque} vs {expect}"
    assert abs(w.speed - v / 0.3) <= 1e-12
    assert abs(w.power - w.torque * w.speed) <= 1e-9


def test_wheel_requirements_frozen_grade_point():
    w = wheel_requirements(GROSS, SPECS[0])
    assert abs(w.power - 94462.67635429259) <= 1e-6, f"grade-point power {w.power}"


def test_motor_requirements_sorted_and_scaled():
    w = wheel_requirements(GROSS, SPECS[0])
    reqs = motor_requirements(w, [6.0, 12.0])
    assert [m.ratio for m in reqs] == [12.0, 6.0]
    for m in reqs:
        assert abs(m.torque - w.torque / m.ratio) <= 1e-12 * w.torque
        assert abs(m.speed - w.speed * m.ratio) <= 1e-12 * m.speed
        assert m.power == w.power
    # Driveline losses inflate torque and power demand, never speed.
    lossy = motor_requirements(w, [12.0], efficiency=0.9)[0]
    assert abs(lossy.torque - reqs[0].torque / 0.9) <= 1e-9
    assert abs(lossy.power - reqs[0].power / 0.9) <= 1e-6
    assert lossy.speed == reqs[0].speed


@pytest.mark.parametrize("efficiency", [0.0, -0.5, 1.0 + 1e-9])
def test_motor_requirements_efficiency_validation(efficiency):
    w = wheel_requirements(GROSS, SPECS[1])
    with pytest.raises(ValueError):
        motor_requirements(w, [12.0], efficiency=efficiency)


def test_motor_requirements_rejects_nonpositive_ratio():
    w = wheel_requirements(GROSS, SPECS[1])
    with pytest.raises(ValueError):
        motor_requirements(w, [12.0, 0.0])


def test_single_speed_needs_oversized_motor():
    report = check_motor(MOTOR, GROSS, SPECS, [7.5])
    assert abs(report.required_torque - 680.1312697509067) <= 1e-9, (
        f"single-speed torque demand {report.required_torque}"
    )
    assert not report.overall_pass
    assert not report.spec_pass["low-speed-grade"]
    assert report.spec_pass["top-speed"] and report.spec_pass["highway-grade"]


def test_single_speed_passes_with_larger_rating():
    big = MotorLimits(max_torque=700.0, max_power=200e3, max_speed=8000.0 * RPM)
    report = check_motor(big, GROSS, SPECS, [7.5])
    assert report.overall_pass, f"700 N*m @ 7.5 should pass: {report.spec_pass}"


def test_two_speed_passes_with_baseline_rating():
    report = check_motor(MOTOR, GROSS, SPECS, [12.0, 6.0])
    assert report.overall_pass
    assert abs(report.required_torque - 425.08204359431664) <= 1e-9, (
        f"two-speed torque demand {report.required_torque}"
    )
    # The grade point needs the deep ratio; top speed only works in the tall one.
    assert report.passes["low-speed-grade"][12.0]
    assert not report.passes["top-speed"][12.0]
    assert report.passes["top-speed"][6.0]


def test_top_speed_motor_speed_within_limit():
    report = check_motor(MOTOR, GROSS, SPECS, [7.5])
    (req,) = report.motor_side["top-speed"]
    assert abs(req.speed - 763.8888888888889) <= 1e-9, f"motor speed {req.speed}"
    assert req.speed <= MOTOR.max_speed


def test_power_margin_frozen():
    report = check_motor(MOTOR, GROSS, SPECS, [12.0, 6.0])
    assert abs(report.power_margin - 41949.62661730606) <= 1e-6, (
        f"power margin {report.power_margin}"
    )
    worst = max(w.power for w in report.wheel.values())
    assert report.required_power == worst
    assert report.required_power == report.wheel["highway-grade"].power


def test_ratio_dedup_and_order():
    report = check_motor(MOTOR, GROSS, SPECS, [6, 12.0, 12])
    assert report.ratios == (12.0, 6.0)


def test_report_to_dict_is_json_serializable():
    report = check_motor(MOTOR, GROSS, SPECS, [12.0, 6.0])
    payload = json.loads(json.dumps(report.to_dict(), sort_keys=True))
    assert payload["overall_pass"] is True
    assert set(payload["specs"]) == {"low-speed-grade", "top-speed", "highway-grade"}
    assert payload["specs"]["top-speed"]["passes"] == {"12.0": False, "6.0": True}


def _point(points, v_kmh):
    return next(p for p in points if abs(p.v_kmh - v_kmh) < 1e-9)


def test_envelope_two_speed_covers_grade_requirement():
    pts = capacity_envelope(MOTOR, [12.0, 6.0], GROSS)
    p = _point(pts, 20.0)
    assert p.wheel_torque == 5400.0 and p.limiting_factor == "torque"
    need = wheel_requirements(GROSS, SPECS[0]).torque
    assert p.wheel_torque >= need, f"envelope {p.wheel_torque} < requirement {need}"


def test_envelope_single_speed_with_big_motor():
    big = MotorLimits(max_torque=700.0, max_power=200e3, max_speed=8000.0 * RPM)
    p = _point(capacity_envelope(big, [7.5], GROSS), 20.0)
    assert p.wheel_torque == 5250.0 and p.limiting_factor == "torque"


def test_envelope_power_region_label():
    p = _point(capacity_envelope(MOTOR, [12.0, 6.0], GROSS), 120.0)
    assert p.limiting_factor == "power"
    expect = 6.0 * MOTOR.max_power / (120.0 / 3.6 / 0.3 * 6.0)
    assert abs(p.wheel_torque - expect) <= 1e-9 * expect


def test_envelope_speed_limited_tail():
    p = _point(capacity_envelope(MOTOR, [12.0], GROSS), 140.0)
    assert p.wheel_torque == 0.0 and p.limiting_factor == "speed"


def test_envelope_non_increasing():
    torques = np.array([p.wheel_torque for p in capacity_envelope(MOTOR, [12.0, 6.0], GROSS)])
    assert np.all(np.diff(torques) <= 1e-9), "capacity envelope should not rise with speed"


@settings(max_examples=60, deadline=None)
@given(
    t_scale=st.floats(min_value=1.0, max_value=3.0),
    p_scale=st.floats(min_value=1.0, max_value=3.0),
    s_scale=st.floats(min_value=1.0, max_value=3.0),
    ratios=st.lists(
        st.floats(min_value=0.5, max_value=20.0, allow_nan=False), min_size=1, max_size=3
    ),
)
def test_check_motor_monotone_in_ratings(t_scale, p_scale, s_scale, ratios):
    """Enlarging any motor limit can only turn failing points into passes."""
    small = MotorLimits(max_torque=300.0, max_power=120e3, max_speed=700.0)
    big = MotorLimits(
        max_torque=small.max_torque * t_scale,
        max_power=small.max_power * p_scale,
        max_speed=small.max_speed * s_scale,
    )
    before = check_motor(small, GROSS, SPECS, ratios)
    after = check_motor(big, GROSS, SPECS, ratios)
    for name in before.spec_pass:
        assert (not before.spec_pass[name]) or after.spec_pass[name]
        for ratio, ok in before.passes[name].items():
            assert (not ok) or after.passes[name][ratio]


@settings(max_examples=60, deadline=None)
@given(
    torque=st.floats(min_value=10.0, max_value=5000.0),
    speed=st.floats(min_value=1.0, max_value=200.0),
    k=st.floats(min_value=0.1, max_value=10.0),
    ratios=st.lists(
        st.floats(min_value=0.5, max_value=20.0, allow_nan=False), min_size=1, max_size=4
    ),
)
def test_motor_requirements_ratio_homogeneity(torque, speed, k, ratios):
    """Scaling every ratio by k divides torque by k, multiplies speed by k,
    and leaves power untouched."""
    from evshift.motor_sizing import WheelRequirement

    wheel = WheelRequirement(torque=torque, power=torque * speed, speed=speed)
    base = motor_requirements(wheel, ratios)
    scaled = motor_requirements(wheel, [k * r for r in ratios])
    for a, b in zip(base, scaled):
        assert abs(b.torque - a.torque / k) <= 1e-9 * abs(a.torque / k) + 1e-12
        assert abs(b.speed - a.speed * k) <= 1e-9 * abs(a.speed * k) + 1e-12
        assert b.power == a.power
