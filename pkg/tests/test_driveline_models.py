"""Transmission model rows, planetary reduction, clutch law."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evshift import (
    ClutchSpec,
    GearingSpec,
    build_model,
    planetary_coefficients,
    planetary_coefficients_numeric,
)
from evshift.driveline_models import ClutchState, clutch_torque, owc_constraint_check


# -- gearing ----------------------------------------------------------------


def test_gearing_requires_descending_ratios():
    with pytest.raises(ValueError):
        GearingSpec(gear1=6.0, gear2=12.0)
    with pytest.raises(ValueError):
        GearingSpec(gear1=6.0, gear2=6.0)
    with pytest.raises(ValueError):
        GearingSpec(gear1=12.0, gear2=-1.0)


def test_gearing_planetary_all_or_none():
    with pytest.raises(ValueError):
        GearingSpec(gear1=12.0, gear2=6.0, beta1=2.0)  # missing beta2 + final drive
    with pytest.raises(ValueError):
        GearingSpec(gear1=12.0, gear2=6.0, beta1=4.0, beta2=2.0, final_drive=7.2)
    plain = GearingSpec(gear1=12.0, gear2=6.0)
    assert not plain.has_planetary


def test_planetary_stage_ratios(gearing):
    # (1+b2)/(1+b1) and b1(1+b2)/(b2(1+b1)) for b1=2, b2=4
    assert gearing.planetary_gear1 == pytest.approx(5.0 / 3.0, rel=1e-15)
    assert gearing.planetary_gear2 == pytest.approx(5.0 / 6.0, rel=1e-15)


# -- clutch law ---------------------------------------------------------------


def test_clutch_capacity_reference():
    spec = ClutchSpec()
    # 4 surfaces * mu 0.3 * 10 kN * 0.1 m
    assert spec.capacity() == pytest.approx(1200.0)


def test_clutch_torque_stick_within_capacity():
    spec = ClutchSpec()
    t, mode = clutch_torque(spec, ClutchState(mode="stick"), 1e4, 500.0)
    assert (t, mode) == (500.0, "stick")


def test_clutch_torque_breakaway():
    spec = ClutchSpec()
    t, mode = clutch_torque(spec, ClutchState(mode="stick"), 1e4, 1500.0)
    assert mode == "slip"
    assert abs(t) <= spec.capacity() + 1e-12


def test_clutch_torque_slip_sign_follows_slip():
    spec = ClutchSpec()
    t_pos, _ = clutch_torque(spec, ClutchState(mode="slip", slip_speed=5.0), 1e4, 0.0)
    t_neg, _ = clutch_torque(spec, ClutchState(mode="slip", slip_speed=-5.0), 1e4, 0.0)
    assert t_pos == pytest.approx(spec.capacity(static=False))
    assert t_neg == pytest.approx(-spec.capacity(static=False))


def test_clutch_torque_rejects_bad_force():
    spec = ClutchSpec()
    with pytest.raises(ValueError):
        clutch_torque(spec, ClutchState(), -1.0, 0.0)
    with pytest.raises(ValueError):
        clutch_torque(spec, ClutchState(), 2e4, 0.0)


def test_one_way_freewheels_and_blocks():
    spec = ClutchSpec(kind="one_way")
    t, mode = clutch_torque(spec, ClutchState(mode="slip", slip_speed=-1.0), 1e4, 300.0)
    assert (t, mode) == (0.0, "slip")  # overrunning: carries nothing
    t, mode = clutch_torque(spec, ClutchState(mode="stick"), 1e4, 300.0)
    assert (t, mode) == (300.0, "stick")
    t, _ = clutch_torque(spec, ClutchState(mode="stick"), 1e4, -300.0)
    assert t == 0.0  # cannot carry reverse torque


def test_owc_constraint_check():
    assert owc_constraint_check(10.0, 0.0) == "ok"
    assert owc_constraint_check(-1.0, 0.0) == "torque-reversal"
    assert owc_constraint_check(10.0, 5.0) == "overspeed"


# -- model rows ---------------------------------------------------------------


def test_dct_rows(driveline, gearing):
    m = build_model("dct-friction", driveline, gearing)
    assert m.motor_row == (1.0, 0.0, -1.0, -1.0)
    assert m.output_row == (0.0, 1.0, 12.0, 6.0)
    assert m.load_scale == 1.0 and m.speed_scale == 1.0
    assert m.sync_ratio(1) == 12.0 and m.sync_ratio(2) == 6.0


def test_dbt_simple_rows(driveline, gearing):
    m = build_model("dbt-simple", driveline, gearing)
    mu, mo, m1, m2 = m.motor_row
    ou, oo, o1, o2 = m.output_row
    assert (mu, mo) == (1.0, 0.0)
    assert m1 == pytest.approx(-1.5) and m2 == pytest.approx(6.0)
    assert (ou, oo) == (0.0, 1.0)
    assert o1 == pytest.approx(2.5) and o2 == pytest.approx(-5.0)
    assert m.load_scale == pytest.approx(1.0 / 7.2)
    assert m.speed_scale == pytest.approx(7.2)


def test_dbt_full_reduction_cross_check(driveline, gearing):
    analytic = planetary_coefficients(driveline, gearing)
    numeric = planetary_coefficients_numeric(driveline, gearing)
    for ca, cn in zip(analytic.as_tuple(), numeric.as_tuple()):
        scale = max(abs(ca), abs(cn), 1.0)
        assert abs(ca - cn) / scale < 1e-9, f"coefficient mismatch {ca} vs {cn}"
    # the numeric route must not depend on the physical sun radii
    other = planetary_coefficients_numeric(driveline, gearing, sun_radii=(0.04, 0.11))
    np.testing.assert_allclose(numeric.as_tuple(), other.as_tuple(), rtol=1e-9)


def test_dbt_full_frozen_gains(driveline, gearing):
    c = planetary_coefficients(driveline, gearing)
    # effective input gain with brake 2 eliminated (downshift decay factor)
    assert c.input_gain == pytest.approx(1.2903225806451617, rel=1e-12)
    # torque-sensitivity ratio of brake 1 vs the motor input: exactly
    # -(1+beta1)/beta1 = -1.5, independent of the inertias
    assert c.brake1_gain_ratio == pytest.approx(-1.5, abs=1e-12)


def test_dbt_full_brake1_ratio_isolates_geometry(gearing):
    # same -1.5 for wildly different inertias: the ratio is pure geometry
    from evshift import DrivelineParams

    for im, io, ir, isun in [(0.1, 0.9, 0.001, 0.2), (2.0, 0.3, 0.5, 0.01)]:
        p = DrivelineParams(
            motor_inertia=im,
            output_inertia=io,
            motor_damping=0.02,
            output_damping=0.04,
            ring_inertia=ir,
            sun_inertia=isun,
        )
        c = planetary_coefficients(p, gearing)
        assert c.brake1_gain_ratio == pytest.approx(-1.5, rel=1e-12)


def test_dbt_full_degenerate_betas(driveline):
    g = GearingSpec(gear1=12.0, gear2=6.0, beta1=2.0, beta2=2.0 + 1e-15, final_drive=7.2)
    with pytest.raises(ValueError):
        planetary_coefficients(driveline, g)


def test_zero_gear_inertia_limit_matches_simplified(gearing):
    # with I_r = I_s = 0 the coupled reduction must collapse onto the
    # simplified rows; compare accelerations over random states
    from evshift import DrivelineParams

    p0 = DrivelineParams(
        motor_inertia=0.3,
        output_inertia=0.05,
        motor_damping=0.02,
        output_damping=0.04,
        ring_inertia=0.0,
        sun_inertia=0.0,
    )
    full = build_model("dbt-full", p0, gearing)
    simple = build_model("dbt-simple", p0, gearing)
    rng = np.random.default_rng(20260815)
    for _ in range(200):
        w_m, w_out = rng.uniform(-900, 900, size=2)
        t_m, t_1, t_2, t_o = rng.uniform(-600, 600, size=4)
        a_full = full.accelerations(w_m, w_out, t_m, t_1, t_2, t_o)
        a_simple = simple.accelerations(w_m, w_out, t_m, t_1, t_2, t_o)
        for af, asimp in zip(a_full, a_simple):
            scale = max(abs(af), abs(asimp), 1.0)
            assert abs(af - asimp) / scale < 1e-9, f"{a_full} vs {a_simple}"


def test_effective_ratios(driveline, gearing):
    dct = build_model("dct-friction", driveline, gearing)
    assert dct.effective_ratio(1) == pytest.approx(12.0, rel=1e-12)
    assert dct.effective_ratio(2) == pytest.approx(6.0, rel=1e-12)
    for name in ("dbt-simple", "dbt-full"):
        dbt = build_model(name, driveline, gearing)
        # stage ratio times the 7.2 final drive: 12 and 6 overall
        assert dbt.effective_ratio(1) == pytest.approx(12.0, rel=1e-9), name
        assert dbt.effective_ratio(2) == pytest.approx(6.0, rel=1e-9), name


def test_dbt_sync_speeds_and_slip(driveline, gearing):
    m = build_model("dbt-full", driveline, gearing)
    w_out = 100.0
    # gear 1 engaged: ring at rest exactly when w_m = rho1 * w_out
    w_m = m.sync_ratio(1) * w_out
    assert abs(m.slip_speed(1, w_m, w_out)) < 1e-9
    # gear 2 engaged: sun at rest
    w_m = m.sync_ratio(2) * w_out
    assert abs(m.slip_speed(2, w_m, w_out)) < 1e-9
    # overall ratios referred through the final drive
    assert m.sync_ratio(1) * m.speed_scale == pytest.approx(12.0, rel=1e-12)
    assert m.sync_ratio(2) * m.speed_scale == pytest.approx(6.0, rel=1e-12)


def test_unknown_model_name(driveline, gearing):
    with pytest.raises(ValueError):
        build_model("cvt", driveline, gearing)


# -- property: the reduction holds across the parameter space ----------------


@settings(max_examples=60, deadline=None)
@given(
    im=st.floats(0.05, 5.0),
    io=st.floats(0.01, 2.0),
    ir=st.floats(0.0, 1.0),
    isun=st.floats(0.0, 1.0),
    b1=st.floats(1.2, 3.5),
    db=st.floats(0.4, 4.0),
)
def test_reduction_routes_agree_everywhere(im, io, ir, isun, b1, db):
    from evshift import DrivelineParams

    p = DrivelineParams(
        motor_inertia=im,
        output_inertia=io,
        motor_damping=0.02,
        output_damping=0.04,
        ring_inertia=ir,
        sun_inertia=isun,
    )
    b2 = b1 + db
    g = GearingSpec(
        gear1=12.0, gear2=6.0, beta1=b1, beta2=b2, final_drive=7.2
    )
    ca = planetary_coefficients(p, g).as_tuple()
    cn = planetary_coefficients_numeric(p, g).as_tuple()
    for a, n in zip(ca, cn):
        scale = max(abs(a), abs(n), 1.0)
        assert abs(a - n) / scale < 1e-8
