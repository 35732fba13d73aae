"""Pre-shift saturation feasibility checks.

Each check answers, without running a full shift synthesis, whether the
motor (and the shift elements) can deliver a no-jerk gearshift for a given
scenario, and reports the governing quantity and the binding limit:

- :func:`check_owc_upshift` — the handover power demanded at the end of the
  torque transfer when element 1 cannot slip forward (one-way device or a
  stuck transfer strategy).
- :func:`check_dual_friction_upshift` — the smallest pre-transfer motor
  overspeed ``dm`` whose leftover slip ``ds`` at transfer end stays
  non-negative, searched against the largest reachable overspeed.
- :func:`check_powered_downshift` — existence of a synchronization time for
  the full-torque inertia phase, from the closed-form slip response.
- :func:`check_braking_downshift` — the element-1 torque sign rule in the
  braking quadrant.

All checks work from the reduced model coefficients, so the planetary
variants are the same code path; on parallel-shaft models the expressions
collapse to the familiar ratio forms. Verdicts are ``feasible``,
``infeasible`` or ``inapplicable`` (the operating point violates a stated
precondition, e.g. the wrong motor region); margins are signed in the
binding limit's units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .driveline_models import ClutchSpec, DrivelineModel
from .errors import SpeedMarginUnreachableError
from .trajectory_engine import (
    SolverSettings,
    max_speed_margin,
    simulate_upshift_dualfriction,
)
from .vehicle_load import Scenario, VehicleParams, no_jerk_targets

__all__ = [
    "MotorLimits",
    "FeasibilityReport",
    "check_owc_upshift",
    "check_dual_friction_upshift",
    "check_powered_downshift",
    "check_braking_downshift",
    "check_shift",
    "RPM_TO_RAD_S",
]

RPM_TO_RAD_S = math.pi / 30.0

_VERDICTS = ("feasible", "infeasible", "inapplicable")
_LIMITS = ("power", "torque", "speed", "rate", "one-way-reversal", "none")


@dataclass(frozen=True)
class MotorLimits:
    """Electric machine envelope.

    Parameters
    ----------
    max_torque : float
        Peak torque [N*m], available below base speed.
    max_power : float
        Peak mechanical power [W], the limit above base speed.
    max_speed : float
        Rated speed [rad/s].
    """

    max_torque: float
    max_power: float
    max_speed: float

    def __post_init__(self) -> None:
        if min(self.max_torque, self.max_power, self.max_speed) <= 0.0:
            raise ValueError("motor limits must all be positive")

    @property
    def base_speed(self) -> float:
        """Corner speed between the torque- and power-limited regions [rad/s]."""
        return self.max_power / self.max_torque

    @property
    def max_speed_rpm(self) -> float:
        return self.max_speed / RPM_TO_RAD_S

    def available_torque(self, speed: float) -> float:
        """Envelope torque at shaft speed ``speed`` [rad/s] -> [N*m]."""
        w = abs(speed)
        if w <= self.base_speed:
            return self.max_torque
        return self.max_power / w


def _plain(value):
    """Plain Python scalar for a possibly-numpy value."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of one pre-shift check.

    ``margin`` is signed in the units of ``binding_limit`` (W, N*m, rad/s or
    N*m/s): positive means slack, negative means shortfall. ``quantities``
    carries the governing numbers (handover power, dm/ds, sync time, ...)
    and ``assumptions`` lists the modeling assumptions the verdict rests on.
    """

    check: str
    verdict: str
    binding_limit: str
    margin: float
    quantities: dict = field(default_factory=dict)
    assumptions: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.verdict not in _VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.binding_limit not in _LIMITS:
            raise ValueError(f"unknown binding limit {self.binding_limit!r}")
        if self.verdict == "infeasible" and self.binding_limit == "none":
            raise ValueError("an infeasible verdict must name its binding limit")
        if self.verdict == "infeasible" and self.margin > 0.0:
            raise ValueError("infeasible verdicts carry non-positive margins")
        if self.verdict == "feasible" and self.margin < 0.0:
            raise ValueError("feasible verdicts carry non-negative margins")
        # numpy scalars sneak in from vectorized producers; strip them so the
        # report serializes (json) and prints (repr) as plain numbers
        object.__setattr__(self, "margin", float(self.margin))
        object.__setattr__(
            self, "quantities", {k: _plain(v) for k, v in self.quantities.items()}
        )

    @property
    def feasible(self) -> bool:
        return self.verdict == "feasible"

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "verdict": self.verdict,
            "binding_limit": self.binding_limit,
            "margin": self.margin,
            "quantities": dict(self.quantities),
            "assumptions": list(self.assumptions),
        }


class _Reduced:
    """Effective one-element coefficients of the no-jerk-constrained model.

    With the output speed imposed and the load carried by a single element,
    eliminating that element's torque from the motor equation leaves
    ``I_m*dw_m = gain*u_m + load_gain*u_o + couple*I_out*dw_out``.
    """

    def __init__(self, model: DrivelineModel, carrying_gear: int):
        mu, mo, m1, m2 = model.motor_row
        ou, oo, o1, o2 = model.output_row
        mb, ob = (m1, o1) if carrying_gear == 1 else (m2, o2)
        self.gain = mu - mb * ou / ob
        self.load_gain = mo - mb * oo / ob
        self.couple = mb / ob
        self.other_ratio = -(
            (m1 - m2 * o1 / o2) / self.gain
            if carrying_gear == 2
            else (m2 - m1 * o2 / o1) / self.gain
        )


def _inapplicable(check: str, why: str, quantities: dict | None = None):
    return FeasibilityReport(
        check=check,
        verdict="inapplicable",
        binding_limit="none",
        margin=0.0,
        quantities=quantities or {},
        assumptions=[why],
    )


def check_owc_upshift(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    motor: MotorLimits,
    transfer_time: float | None = None,
    settings: SolverSettings | None = None,
) -> FeasibilityReport:
    """Handover-power check for upshifts whose element 1 stays synchronous.

    With element 1 unable to slip forward, the motor must keep tracking the
    gear-1 synchronous speed until the transfer completes, at which point it
    carries the full gear-2 load at gear-1 speed — the power peak of the
    whole shift. Evaluates that peak in closed form and compares it against
    the motor's power rating.

    Parameters
    ----------
    transfer_time : float, optional
        Torque-transfer duration [s]; defaults to ``scenario.torque_phase``.

    Notes
    -----
    The closed form is exact for the uncoupled layouts. On the coupled
    planetary model it assumes the remaining states stay near their
    transfer-end values, and it is a peak (sufficient) condition only when
    the reported ``sufficiency_ratio`` is negative; otherwise the verdict is
    necessary-only, which the report states explicitly.
    """
    check = "owc-upshift-power"
    settings = settings or SolverSettings()
    if scenario.direction != "upshift" or scenario.quadrant != "driving":
        return _inapplicable(check, "only driving upshifts hand over this way")
    t_tr = scenario.torque_phase if transfer_time is None else float(transfer_time)
    tg = no_jerk_targets(vehicle, scenario)
    p = model.params
    ws, ls = model.speed_scale, model.load_scale
    red = _Reduced(model, carrying_gear=2)
    rho1 = model.sync_ratio(1)
    dw = ws * tg.wheel_accel
    w_star = ws * tg.wheel_speed(t_tr)
    w_m = rho1 * w_star
    u_o = -p.output_damping * w_star - ls * tg.output_torque
    u_m = (p.motor_inertia * rho1 * dw - red.couple * p.output_inertia * dw
           - red.load_gain * u_o) / red.gain
    t_m = u_m + p.motor_damping * w_m
    power = w_m * t_m

    quantities = {
        "handover_power": power,
        "handover_time": t_tr,
        "motor_speed_at_handover": w_m,
        "motor_torque_at_handover": t_m,
        "sufficiency_ratio": red.other_ratio,
        "sufficient": red.other_ratio < 0.0,
        "base_speed": motor.base_speed,
    }
    assumptions = [
        "output speed and torque follow the no-jerk targets exactly",
        "element 1 stays synchronous until fully unloaded",
    ]
    if w_m < motor.base_speed:
        return _inapplicable(
            check,
            "handover falls in the torque-limited region; the power peak "
            "argument does not apply below base speed",
            quantities,
        )
    if not quantities["sufficient"]:
        assumptions.append(
            "peak-location precondition failed: the handover power is a "
            "necessary bound only, not sufficient"
        )
    if getattr(model, "coupled", False) and (
        p.ring_inertia != 0.0 or p.sun_inertia != 0.0
    ):
        assumptions.append(
            "coupled planetary inertias assumed near-constant over the transfer"
        )
    margin = motor.max_power - power
    return FeasibilityReport(
        check=check,
        verdict="feasible" if margin >= 0.0 else "infeasible",
        binding_limit="none" if margin >= 0.0 else "power",
        margin=margin,
        quantities=quantities,
        assumptions=assumptions,
    )


def check_dual_friction_upshift(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    motor: MotorLimits,
    clutch1: ClutchSpec | None = None,
    clutch2: ClutchSpec | None = None,
    settings: SolverSettings | None = None,
    resolution: float = 0.1,
) -> FeasibilityReport:
    """Smallest workable pre-transfer overspeed for a dual-friction upshift.

    A slipping element 1 can only carry driving torque while the motor runs
    above the gear-1 synchronous speed, so the shift needs an overspeed
    margin ``dm`` built before the transfer, large enough that the slip
    left at transfer end (``ds``) is still non-negative. This check:

    1. probes the largest reachable ``dm`` (envelope or speed limit),
    2. verifies ``ds`` grows with ``dm`` on a coarse grid,
    3. bisects for the smallest ``dm`` with ``ds >= 0`` to ``resolution``
       [rad/s].

    Feasible iff such a ``dm`` exists below the reachable maximum.
    """
    check = "dual-friction-overspeed"
    clutch1 = clutch1 or ClutchSpec()
    clutch2 = clutch2 or ClutchSpec()
    settings = settings or SolverSettings()
    if scenario.direction != "upshift" or scenario.quadrant != "driving":
        return _inapplicable(check, "only driving upshifts use the overspeed strategy")
    if clutch1.kind != "friction" or clutch2.kind != "friction":
        raise ValueError("the overspeed strategy needs two friction elements")
    tg = no_jerk_targets(vehicle, scenario)
    rho1 = model.sync_ratio(1)
    w_m0 = rho1 * model.speed_scale * tg.wheel_speed(0.0)
    if w_m0 < motor.base_speed:
        return _inapplicable(
            check,
            "gear-1 speed is below base speed; the envelope is not "
            "power-limited as the overspeed argument assumes",
            {"motor_speed_gear1": w_m0, "base_speed": motor.base_speed},
        )

    dm_max, cap_reason = max_speed_margin(
        model, vehicle, scenario, motor, clutch1, settings
    )
    # evaluating exactly at the reachable maximum chases an asymptote (or
    # grazes the speed limit); back off a hair
    dm_top = dm_max * (1.0 - 1e-3)

    def residual(dm: float) -> float:
        try:
            traj = simulate_upshift_dualfriction(
                model, vehicle, scenario, motor, dm, clutch1, clutch2, settings
            )
        except SpeedMarginUnreachableError:
            return -math.inf
        return traj.residual_margin

    ds0 = residual(0.0)
    grid = [(0.0, ds0)]
    if ds0 < 0.0:
        for f in (0.25, 0.5, 0.75, 1.0):
            grid.append((f * dm_top, residual(f * dm_top)))
    ds_vals = [ds for _, ds in grid]
    monotone = all(b >= a - 1e-9 for a, b in zip(ds_vals, ds_vals[1:]))

    quantities = {
        "dm_max": dm_max,
        "dm_cap": cap_reason,
        "ds_at_zero": ds0,
        "ds_at_dm_max": grid[-1][1],
        "monotone": monotone,
        "transfer_time": scenario.torque_phase,
    }
    assumptions = [
        "speed phase runs at the full motor envelope",
        "slip left at transfer end decides element-1 torque admissibility",
    ]
    if not monotone:
        assumptions.append(
            "ds was not monotone in dm on the probe grid; the best grid "
            "point stands in for the bisection result"
        )

    best_dm, best_ds = max(grid, key=lambda g: g[1])
    if best_ds < 0.0:
        return FeasibilityReport(
            check=check,
            verdict="infeasible",
            binding_limit="speed" if cap_reason == "speed" else "power",
            margin=best_ds if math.isfinite(best_ds) else -dm_max,
            quantities=quantities,
            assumptions=assumptions,
        )

    if ds0 >= 0.0:
        dm_min, ds_min = 0.0, ds0
    elif monotone:
        lo = max((dm for dm, ds in grid if ds < 0.0), default=0.0)
        hi = min(dm for dm, ds in grid if ds >= 0.0)
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            if residual(mid) >= 0.0:
                hi = mid
            else:
                lo = mid
        dm_min, ds_min = hi, residual(hi)
    else:
        dm_min, ds_min = best_dm, best_ds
    quantities["dm_min"] = dm_min
    quantities["ds_at_dm_min"] = ds_min
    quantities["motor_speed_at_dm_min"] = rho1 * model.speed_scale * tg.wheel_speed(
        0.0
    ) + dm_min
    return FeasibilityReport(
        check=check,
        verdict="feasible",
        binding_limit="none",
        margin=quantities["ds_at_dm_max"] if ds0 < 0.0 else ds0,
        quantities=quantities,
        assumptions=assumptions,
    )


def _hold_torque_at(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    gear: int,
    t: float = 0.0,
) -> float:
    """Element torque carrying the no-jerk load alone in ``gear`` at time t."""
    tg = no_jerk_targets(vehicle, scenario)
    p = model.params
    ws, ls = model.speed_scale, model.load_scale
    mu, mo, m1, m2 = model.motor_row
    ou, oo, o1, o2 = model.output_row
    mb, ob = (m1, o1) if gear == 1 else (m2, o2)
    dw = ws * tg.wheel_accel
    w_star = ws * tg.wheel_speed(t)
    u_o = -p.output_damping * w_star - ls * tg.output_torque
    req = p.output_inertia * dw - oo * u_o
    rho = model.sync_ratio(gear)
    u_m = (p.motor_inertia * rho * dw - mo * u_o - (mb / ob) * req) / (
        mu - (mb / ob) * ou
    )
    return (req - ou * u_m) / ob


def check_powered_downshift(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    motor: MotorLimits,
    hold_torque: float | None = None,
    settings: SolverSettings | None = None,
) -> FeasibilityReport:
    """Synchronization-time check for the powered (driving) downshift.

    During the inertia phase the motor, still loaded through the gear-2
    element, must catch the rising gear-1 synchronous speed at full torque.
    With the element-2 torque held at its shift-start value the motor speed
    answers a linear first-order equation, so the gear-1 slip is available
    in closed form; the shift is feasible iff that slip reaches zero within
    the practical synchronization time.

    Parameters
    ----------
    hold_torque : float, optional
        Element-2 torque held during the phase [N*m]. Defaults to the
        quasi-static balance at shift start; an override is applied as a
        perturbation of that balance.

    Notes
    -----
    Returns the governing quantities ``sync_time`` (first zero crossing, if
    any), ``slip_margin`` (peak slip within the practical window; the
    margin), and the closed-form constants. Verdict ``inapplicable`` when
    the phase leaves the torque-limited region.
    """
    check = "downshift-synchronization"
    settings = settings or SolverSettings()
    if scenario.direction != "downshift" or scenario.quadrant != "driving":
        return _inapplicable(check, "only driving downshifts synchronize under power")
    p = model.params
    red = _Reduced(model, carrying_gear=2)
    if red.gain <= 0.0:
        raise ValueError(
            "model inconsistency: non-positive effective input gain "
            f"({red.gain:.6g}) while element 2 carries the load"
        )
    tg = no_jerk_targets(vehicle, scenario)
    ws, ls = model.speed_scale, model.load_scale
    rho1, rho2 = model.sync_ratio(1), model.sync_ratio(2)
    w0 = ws * tg.wheel_speed(0.0)
    dw = ws * tg.wheel_accel
    t2_qs = _hold_torque_at(model, vehicle, scenario, gear=2)
    tau = red.load_gain * (p.output_damping * w0 + ls * tg.output_torque) - (
        red.couple * p.output_inertia * dw
    )
    mb2 = model.motor_row[3]
    if hold_torque is not None:
        tau -= mb2 * (hold_torque - t2_qs)
    k = red.gain * p.motor_damping / p.motor_inertia
    big_g = (red.gain * motor.max_torque - tau) / (red.gain * p.motor_damping)

    def slip(t: float) -> float:
        return -rho1 * (w0 + dw * t) + (rho2 * w0 - big_g) * math.exp(-k * t) + big_g

    # peak of the slip response: where the envelope pull equals the target's
    # advance; afterwards the slip only shrinks
    if big_g <= rho2 * w0:
        t_peak = 0.0
    elif dw <= 0.0:
        t_peak = math.inf
    else:
        arg = rho1 * dw / (k * (big_g - rho2 * w0))
        t_peak = -math.log(arg) / k if arg < 1.0 else 0.0
    t_eval = min(t_peak, settings.practical_sync_time)
    margin = slip(t_eval)

    sync_time = None
    if margin >= 0.0 and t_eval > 0.0:
        sync_time = float(brentq(slip, 0.0, t_eval, xtol=1e-12))
    root_exists = sync_time is not None
    if not root_exists and t_peak > settings.practical_sync_time:
        # a late root may still exist beyond the practical window
        if slip(min(t_peak, settings.horizon)) >= 0.0:
            sync_time = float(
                brentq(slip, settings.practical_sync_time, min(t_peak, settings.horizon))
            )
            root_exists = True

    quantities = {
        "sync_time": sync_time,
        "root_exists": root_exists,
        "slip_margin": margin,
        "time_of_peak_slip": t_peak,
        "practical_sync_time": settings.practical_sync_time,
        "hold_torque": t2_qs if hold_torque is None else hold_torque,
        "input_gain": red.gain,
        "load_bias": tau,
        "decay_rate": k,
        "terminal_speed": big_g,
    }
    assumptions = [
        "element-2 torque held constant at its shift-start balance",
        "full motor torque available throughout the phase",
    ]
    ou = model.output_row[0]
    if ou > 1e-12:
        # on coupled layouts the motor input feeds the output equation
        # directly; above this input the slipping element would have to
        # push in its inadmissible direction, so a real trajectory
        # saturates earlier than the closed form assumes
        oo = model.output_row[1]
        u_o0 = -p.output_damping * w0 - ls * tg.output_torque
        u_cap = (p.output_inertia * dw - oo * u_o0) / ou
        quantities["admissible_input_cap"] = u_cap
        if motor.max_torque - p.motor_damping * rho2 * w0 > u_cap:
            assumptions.append(
                "the full-torque assumption exceeds the slip-admissible "
                "element torque; the closed-form time is optimistic"
            )
    # the motor stays below the gear-1 target until sync, so the target at
    # the evaluation horizon bounds every speed the formula relies on
    horizon_t = sync_time if sync_time is not None else t_eval
    max_seek_speed = max(abs(rho2 * w0), abs(rho1 * (w0 + dw * horizon_t)))
    quantities["max_seek_speed"] = max_seek_speed
    quantities["base_speed"] = motor.base_speed
    if max_seek_speed > motor.base_speed:
        return _inapplicable(
            check,
            "the phase leaves the torque-limited region; constant peak "
            "torque is not available throughout",
            quantities,
        )
    verdict = "feasible" if (root_exists and sync_time <= settings.practical_sync_time and margin >= 0.0) else "infeasible"
    return FeasibilityReport(
        check=check,
        verdict=verdict,
        binding_limit="none" if verdict == "feasible" else "torque",
        margin=margin if verdict == "infeasible" else max(margin, 0.0),
        quantities=quantities,
        assumptions=assumptions,
    )


def check_braking_downshift(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    motor: MotorLimits,
    clutch1: ClutchSpec | None = None,
    clutch2: ClutchSpec | None = None,
    settings: SolverSettings | None = None,
) -> FeasibilityReport:
    """Element-1 torque-sign rule for downshifts in the braking quadrant.

    Braking load puts negative torque on every carrying element, so the
    verdict is categorical: a one-way element 1 cannot carry it at all,
    while a friction element only needs capacity. The report quantifies the
    element-1 torque demanded once the transfer completes.
    """
    check = "braking-handover"
    clutch1 = clutch1 or ClutchSpec()
    clutch2 = clutch2 or ClutchSpec()
    settings = settings or SolverSettings()
    if scenario.direction != "downshift" or scenario.quadrant != "braking":
        return _inapplicable(check, "the torque-sign rule covers braking downshifts")
    t_end = settings.lead_in + scenario.torque_phase
    t1_req = _hold_torque_at(model, vehicle, scenario, gear=1, t=t_end)
    quantities = {"required_torque": t1_req, "at_time": t_end}
    if clutch1.kind == "one_way":
        return FeasibilityReport(
            check=check,
            verdict="infeasible",
            binding_limit="one-way-reversal",
            margin=min(t1_req, 0.0),
            quantities=quantities,
            assumptions=["a one-way element free-wheels instead of braking"],
        )
    capacity = clutch1.capacity()
    quantities["capacity"] = capacity
    margin = capacity - abs(t1_req)
    return FeasibilityReport(
        check=check,
        verdict="feasible" if margin >= 0.0 else "infeasible",
        binding_limit="none" if margin >= 0.0 else "torque",
        margin=margin,
        quantities=quantities,
        assumptions=["full braking load referred to element 1 after the transfer"],
    )


def check_shift(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    motor: MotorLimits,
    clutch1: ClutchSpec | None = None,
    clutch2: ClutchSpec | None = None,
    settings: SolverSettings | None = None,
    transfer_time: float | None = None,
    hold_torque: float | None = None,
) -> FeasibilityReport:
    """Run the feasibility check matching the scenario and element hardware."""
    c1 = clutch1 or ClutchSpec()
    if scenario.direction == "upshift":
        if scenario.quadrant == "braking":
            return _inapplicable(
                "upshift", "braking upshifts are outside the supported strategies"
            )
        if c1.kind == "one_way":
            return check_owc_upshift(
                model, vehicle, scenario, motor, transfer_time, settings
            )
        return check_dual_friction_upshift(
            model, vehicle, scenario, motor, clutch1, clutch2, settings
        )
    if scenario.quadrant == "driving":
        return check_powered_downshift(
            model, vehicle, scenario, motor, hold_torque, settings
        )
    return check_braking_downshift(
        model, vehicle, scenario, motor, clutch1, clutch2, settings
    )
