"""Jerk-free gearshift trajectory synthesis.

The output shaft is held exactly on the affine no-jerk speed profile while
the motor and the two shift elements are solved phase by phase:

``hold``
    One element engaged (stick); motor speed is the synchronous speed and
    the motor torque is solved algebraically.
``torque-transfer``
    Load cross-fades between the elements over a fixed duration with a
    smoothstep profile. The motor is either still synchronous on one gear
    (torque solved) or free at its envelope (speed integrated).
``speed-raise``
    Upshift with two friction elements: the motor, still carrying the load
    through the slipping gear-1 element, runs at its envelope until it
    leads the gear-1 synchronous speed by the requested margin.
``inertia-sync``
    Motor speed swings to the target gear's synchronous speed: for
    duration-based phases along a Hermite cubic matching speed and slope at
    both ends (so element torques stay continuous); for the powered
    downshift by integrating at the envelope until the slip crosses zero.

Within each phase the no-jerk output equation pins the combined element
torque, so delivered wheel torque is constant by construction; everything
that could go wrong is recorded as flags (limits exceeded, actuation rate,
element torque against its admissible slip direction, synchronization not
reached), never silently clipped.

Samples are emitted on the uniform grid ``t = k*dt`` regardless of where
phase boundaries or events fall, which makes CSV output byte-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .driveline_models import ClutchSpec, DrivelineModel
from .errors import (
    InfeasibleShiftError,
    SpeedMarginUnreachableError,
    TrajectoryError,
)
from .vehicle_load import (
    DrivelineCheck,
    Scenario,
    ShiftTargets,
    VehicleParams,
    no_jerk_targets,
    validate_full_driveline,
)

__all__ = [
    "SolverSettings",
    "Flag",
    "GearshiftTrajectory",
    "simulate_shift",
    "simulate_upshift_owc",
    "simulate_upshift_dualfriction",
    "simulate_downshift_driving",
    "simulate_downshift_braking",
    "max_speed_margin",
    "integrate_step",
    "validate_trajectory",
    "CSV_HEADER",
]

CSV_HEADER = "t,omega_m,omega_out,omega_v,T_m,T_1,T_2,T_o,P_m,phase"

_TIME_EPS = 1e-12


@dataclass(frozen=True)
class SolverSettings:
    """Numerical knobs of the shift solver.

    Parameters
    ----------
    dt : float
        Output sample spacing and base integration step [s].
    stick_tol : float
        Slip magnitude treated as synchronized [rad/s].
    event_tol : float
        Bisection width for locating events in time [s].
    horizon : float
        Give-up time for event-terminated phases [s].
    practical_sync_time : float
        Longest acceptable powered-downshift synchronization [s]; used by
        the feasibility checks as their time horizon.
    lead_in, tail_out : float
        Pre/post-shift hold durations included in every trajectory [s].
    limit_rel_tol : float
        Relative slack on limit checks so riding a limit exactly is legal.
    """

    dt: float = 1e-3
    stick_tol: float = 1e-4
    event_tol: float = 1e-9
    horizon: float = 5.0
    practical_sync_time: float = 2.0
    lead_in: float = 0.05
    tail_out: float = 0.05
    limit_rel_tol: float = 1e-9

    def __post_init__(self) -> None:
        if self.dt <= 0.0 or self.horizon <= 0.0:
            raise ValueError("dt and horizon must be > 0")
        if self.lead_in < 0.0 or self.tail_out < 0.0:
            raise ValueError("lead_in and tail_out must be >= 0")


@dataclass(frozen=True)
class Flag:
    """One violated constraint on a solved trajectory."""

    code: str  # power | torque | speed | rate | one-way-reversal | torque-reversal | no-sync
    time: float  # first offending instant [s]
    value: float  # worst offending value (units of the limit)
    limit: float  # the limit it violates
    message: str

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "time": self.time,
            "value": self.value,
            "limit": self.limit,
            "message": self.message,
        }


def _smoothstep(u: float) -> float:
    u = min(max(u, 0.0), 1.0)
    return u * u * (3.0 - 2.0 * u)


def _rk4(f: Callable[[float, float], float], t: float, y: float, h: float) -> float:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class GearshiftTrajectory:
    """A solved gearshift with its audit trail.

    Speeds are stored in the transmission frame (``omega_out`` is upstream
    of the final drive on the planetary layout) except ``omega_v``, the
    wheel-frame vehicle target. ``flags`` is empty iff the shift respects
    every limit; nothing is ever clipped to make it so.
    """

    model_name: str
    times: np.ndarray
    omega_m: np.ndarray
    omega_out: np.ndarray
    omega_v: np.ndarray
    torque_motor: np.ndarray
    torque_clutch1: np.ndarray
    torque_clutch2: np.ndarray
    torque_output: np.ndarray
    power_motor: np.ndarray
    phase_labels: list[str]
    phases: list[tuple[str, float, float]]
    events: dict[str, float]
    flags: list[Flag]
    scenario: Scenario
    targets: ShiftTargets
    settings: SolverSettings
    speed_margin: float | None = None
    residual_margin: float | None = None
    model: DrivelineModel | None = None

    @property
    def feasible(self) -> bool:
        return not self.flags

    def to_csv(self, path=None):
        """Write samples as CSV (exact ``repr`` floats, byte-reproducible).

        With ``path=None`` the CSV text is returned instead.
        """
        lines = [CSV_HEADER]
        for i in range(self.times.size):
            lines.append(
                ",".join(
                    [
                        repr(float(self.times[i])),
                        repr(float(self.omega_m[i])),
                        repr(float(self.omega_out[i])),
                        repr(float(self.omega_v[i])),
                        repr(float(self.torque_motor[i])),
                        repr(float(self.torque_clutch1[i])),
                        repr(float(self.torque_clutch2[i])),
                        repr(float(self.torque_output[i])),
                        repr(float(self.power_motor[i])),
                        self.phase_labels[i],
                    ]
                )
            )
        text = "\n".join(lines) + "\n"
        if path is None:
            return text
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return None

    def tracking_error(self) -> float:
        """Relative output-speed tracking error of the stored torques.

        Re-integrates the output equation from the recorded motor/element
        torques alone (linear interpolation between samples, output speed
        fed back into its own damping/load term) and compares against the
        imposed no-jerk profile. This is an independent reconstruction, not
        an echo of the imposed target.
        """
        m = self.model
        if m is None:
            raise TrajectoryError("trajectory carries no model reference")
        ou, oo, o1, o2 = m.output_row
        i_out = m.params.output_inertia
        c_m, c_o = m.params.motor_damping, m.params.output_damping
        ls = m.load_scale
        t = self.times
        t_o = float(self.torque_output[0])

        def col(arr, tt):
            return float(np.interp(tt, t, arr))

        def f(tt: float, w: float) -> float:
            u_m = col(self.torque_motor, tt) - c_m * col(self.omega_m, tt)
            u_o = -c_o * w - ls * t_o
            return (
                ou * u_m
                + oo * u_o
                + o1 * col(self.torque_clutch1, tt)
                + o2 * col(self.torque_clutch2, tt)
            ) / i_out

        w = float(self.omega_out[0])
        worst = 0.0
        scale = max(1.0, float(np.max(np.abs(self.omega_out))))
        for k in range(t.size - 1):
            h = float(t[k + 1] - t[k])
            w = _rk4(f, float(t[k]), w, h)
            worst = max(worst, abs(w - float(self.omega_out[k + 1])))
        return worst / scale

    def wheel_frame(self) -> dict:
        """Wheel-frame quantities for the compliant-driveline validation.

        Returns the delivered transmission torque and the output inertia and
        damping reflected through the final drive (square of the speed
        ratio), ready for :func:`evshift.vehicle_load.validate_full_driveline`.
        """
        m = self.model
        if m is None:
            raise TrajectoryError("trajectory carries no model reference")
        ws = m.speed_scale
        i_out = m.params.output_inertia
        c_o = m.params.output_damping
        dw = ws * self.targets.wheel_accel
        tau_model = i_out * dw + c_o * self.omega_out + m.load_scale * self.torque_output
        return {
            "times": self.times,
            "wheel_torque": ws * tau_model,
            "output_inertia": i_out * ws * ws,
            "output_damping": c_o * ws * ws,
            "stiffness": m.params.stiffness,
            "damping": m.params.damping,
            "initial_speed": self.targets.initial_speed,
        }

    def peak_clutch_rate(self, element: int) -> float:
        """Worst |dT/dt| of one shift element [N*m/s], finite-differenced
        between samples that share a phase (boundary redistributions are
        motor steps, not actuator slew)."""
        torque = self.torque_clutch1 if element == 1 else self.torque_clutch2
        if self.times.size < 2:
            return 0.0
        rate = np.abs(np.diff(torque)) / np.diff(self.times)
        same = np.array(
            [
                self.phase_labels[i] == self.phase_labels[i + 1]
                for i in range(self.times.size - 1)
            ]
        )
        return float(np.max(np.where(same, rate, 0.0)))

    def summary(self) -> dict:
        """Machine-readable digest used by the CLI."""
        return {
            "model": self.model_name,
            "scenario": self.scenario.name,
            "feasible": self.feasible,
            "duration": float(self.times[-1]),
            "samples": int(self.times.size),
            "phases": [
                {"label": lbl, "start": t0, "end": t1} for lbl, t0, t1 in self.phases
            ],
            "events": {k: float(v) for k, v in self.events.items()},
            "flags": [f.to_dict() for f in self.flags],
            "speed_margin": None if self.speed_margin is None else float(self.speed_margin),
            "residual_margin": None
            if self.residual_margin is None
            else float(self.residual_margin),
            "peak_motor_torque": float(np.max(np.abs(self.torque_motor))),
            "peak_motor_power": float(np.max(np.abs(self.power_motor))),
            "peak_motor_speed": float(np.max(np.abs(self.omega_m))),
            "peak_clutch1_rate": self.peak_clutch_rate(1),
            "peak_clutch2_rate": self.peak_clutch_rate(2),
        }


# ---------------------------------------------------------------------------
# phases
# ---------------------------------------------------------------------------


class _Phase:
    label = "hold"
    mode = "stick"  # stick | cubic | free
    duration: float | None = None
    has_event = False
    ramp_rate: float | None = None
    ramp_from: float = 0.0

    def begin(self, sv: "_Solver", t0: float) -> None:
        self.sv = sv
        self.t0 = t0

    def alphas(self, t: float) -> tuple[float, float]:
        raise NotImplementedError

    # algebraic phases
    def motor_speed(self, t: float) -> tuple[float, float]:
        raise NotImplementedError

    # free phases
    def motor_torque(self, sv: "_Solver", t: float, w: float) -> float:
        env = sv.motor.available_torque(abs(w))
        if self.ramp_rate is not None:
            env = min(env, self.ramp_from + self.ramp_rate * (t - self.t0))
        # keep the combined element torque in the admissible (driving)
        # direction on layouts where the motor input enters the output
        # equation directly
        if sv.ou > 1e-12:
            env = min(env, sv.req(t) / sv.ou + sv.cm * w)
        return env

    def event(self, sv: "_Solver", t: float, w: float) -> float:
        raise NotImplementedError

    def on_step(self, sv: "_Solver", t: float, w: float) -> None:
        pass

    def on_deadline(self, sv: "_Solver", t: float, w: float) -> None:
        """Default: flag and truncate (handled by the runner)."""


class _Hold(_Phase):
    label = "hold"
    mode = "stick"

    def __init__(self, gear: int, duration: float):
        self.gear = gear
        self.duration = duration

    def begin(self, sv: "_Solver", t0: float) -> None:
        super().begin(sv, t0)
        self.ratio = sv.model.sync_ratio(self.gear)
        a = 1.0 / sv.o_coef(self.gear)
        self._a1, self._a2 = (a, 0.0) if self.gear == 1 else (0.0, a)

    def alphas(self, t: float) -> tuple[float, float]:
        return self._a1, self._a2

    def motor_speed(self, t: float) -> tuple[float, float]:
        return self.ratio * self.sv.w_star(t), self.ratio * self.sv.dw


class _Transfer(_Phase):
    label = "torque-transfer"

    def __init__(
        self, from_gear: int, to_gear: int, duration: float, stuck_gear: int | None
    ):
        self.from_gear = from_gear
        self.to_gear = to_gear
        self.duration = duration
        self.stuck_gear = stuck_gear
        self.mode = "stick" if stuck_gear is not None else "free"

    def begin(self, sv: "_Solver", t0: float) -> None:
        super().begin(sv, t0)
        self.o_from = sv.o_coef(self.from_gear)
        self.o_to = sv.o_coef(self.to_gear)
        if self.stuck_gear is not None:
            self.ratio = sv.model.sync_ratio(self.stuck_gear)
            if abs(sv.w_m - self.ratio * sv.w_star(t0)) > 100.0 * sv.settings.stick_tol:
                raise TrajectoryError(
                    "torque transfer entered without synchronous motor speed"
                )

    def alphas(self, t: float) -> tuple[float, float]:
        s = _smoothstep((t - self.t0) / self.duration)
        a_from = (1.0 - s) / self.o_from
        a_to = s / self.o_to
        if self.from_gear == 1:
            return a_from, a_to
        return a_to, a_from

    def motor_speed(self, t: float) -> tuple[float, float]:
        return self.ratio * self.sv.w_star(t), self.ratio * self.sv.dw


class _CubicSync(_Phase):
    label = "inertia-sync"
    mode = "cubic"

    def __init__(self, to_gear: int, duration: float):
        self.to_gear = to_gear
        self.duration = duration

    def begin(self, sv: "_Solver", t0: float) -> None:
        super().begin(sv, t0)
        ratio = sv.model.sync_ratio(self.to_gear)
        t1 = t0 + self.duration
        self.y0, self.v0 = sv.w_m, sv.dw_m
        self.y1, self.v1 = ratio * sv.w_star(t1), ratio * sv.dw
        a = 1.0 / sv.o_coef(self.to_gear)
        self._a1, self._a2 = (a, 0.0) if self.to_gear == 1 else (0.0, a)

    def alphas(self, t: float) -> tuple[float, float]:
        return self._a1, self._a2

    def motor_speed(self, t: float) -> tuple[float, float]:
        d = self.duration
        u = min(max((t - self.t0) / d, 0.0), 1.0)
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        y = h00 * self.y0 + h10 * d * self.v0 + h01 * self.y1 + h11 * d * self.v1
        dh00 = 6 * u**2 - 6 * u
        dh10 = 3 * u**2 - 4 * u + 1
        dh11 = 3 * u**2 - 2 * u
        dy = dh00 * (self.y0 - self.y1) / d + dh10 * self.v0 + dh11 * self.v1
        return y, dy


class _SpeedRaise(_Phase):
    label = "speed-raise"
    mode = "free"
    has_event = True

    def __init__(self, margin: float, ramp_rate: float | None):
        self.margin = margin
        self.ramp_rate = ramp_rate

    def begin(self, sv: "_Solver", t0: float) -> None:
        super().begin(sv, t0)
        self.rho1 = sv.model.sync_ratio(1)
        self._alpha = 1.0 / sv.o_coef(1)
        if self.ramp_rate is not None:
            u_m, _ = sv.algebraic_solve(t0, self.rho1 * sv.dw, self._alpha, 0.0)
            self.ramp_from = u_m + sv.cm * sv.w_m

    def alphas(self, t: float) -> tuple[float, float]:
        return self._alpha, 0.0

    def event(self, sv: "_Solver", t: float, w: float) -> float:
        return (w - self.rho1 * sv.w_star(t)) - self.margin

    def ramp_binding(self, sv: "_Solver", t: float, w: float) -> bool:
        """True while the slew-rate ramp, not the envelope, caps the motor."""
        if self.ramp_rate is None:
            return False
        env = sv.motor.available_torque(abs(w))
        if sv.ou > 1e-12:
            env = min(env, sv.req(t) / sv.ou + sv.cm * w)
        return self.ramp_from + self.ramp_rate * (t - self.t0) < env

    def on_step(self, sv: "_Solver", t: float, w: float) -> None:
        if abs(w) >= sv.motor.max_speed * (1.0 + 1e-12):
            raise SpeedMarginUnreachableError(
                "motor speed limit reached at slip margin "
                f"{w - self.rho1 * sv.w_star(t):.3f} rad/s "
                f"(requested {self.margin:.3f})",
                reason="speed",
            )
        if self.ramp_binding(sv, t, w):
            return  # torque still climbing; slip growth has not peaked yet
        if sv.free_accel(self, t, w) - self.rho1 * sv.dw <= 1e-9:
            raise SpeedMarginUnreachableError(
                "slip growth stalled at margin "
                f"{w - self.rho1 * sv.w_star(t):.3f} rad/s "
                f"(requested {self.margin:.3f})",
                reason="power",
            )

    def on_deadline(self, sv: "_Solver", t: float, w: float) -> None:
        raise SpeedMarginUnreachableError(
            f"speed margin {self.margin:.3f} rad/s not reached within "
            f"{sv.settings.horizon:.3f} s",
            reason="power",
        )


class _SyncSeek(_Phase):
    """Powered-downshift inertia phase: full envelope until slip-1 hits zero."""

    label = "inertia-sync"
    mode = "free"
    has_event = True

    def begin(self, sv: "_Solver", t0: float) -> None:
        super().begin(sv, t0)
        self.rho1 = sv.model.sync_ratio(1)
        self._alpha = 1.0 / sv.o_coef(2)

    def alphas(self, t: float) -> tuple[float, float]:
        return 0.0, self._alpha

    def event(self, sv: "_Solver", t: float, w: float) -> float:
        return w - self.rho1 * sv.w_star(t)


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


class _Solver:
    def __init__(
        self,
        model: DrivelineModel,
        vehicle: VehicleParams,
        scenario: Scenario,
        motor,
        settings: SolverSettings,
    ) -> None:
        self.model = model
        self.motor = motor
        self.settings = settings
        self.scenario = scenario
        self.targets = no_jerk_targets(vehicle, scenario)
        p = model.params
        self.im, self.iout = p.motor_inertia, p.output_inertia
        self.cm, self.co = p.motor_damping, p.output_damping
        self.mu, self.mo, self.m1, self.m2 = model.motor_row
        self.ou, self.oo, self.o1, self.o2 = model.output_row
        self.ls = model.load_scale
        self.ws = model.speed_scale
        self.t_o = self.targets.output_torque
        self._v0 = self.targets.initial_speed
        self._a = self.targets.acceleration
        self._rw = self.targets.wheel_radius
        self.dw = self.ws * self.targets.wheel_accel

        self.t = 0.0
        self.k = 0  # next grid index to emit
        self.w_m = 0.0
        self.dw_m = 0.0
        self._rows: list[tuple] = []
        self._labels: list[str] = []
        self._records: list[tuple[str, float, float]] = []
        self.end_state: dict[str, tuple[float, float]] = {}
        self.pending_flags: list[Flag] = []

    # -- target helpers ----------------------------------------------------
    def w_star(self, t: float) -> float:
        return self.ws * (self._v0 + self._a * t) / self._rw

    def u_o(self, t: float) -> float:
        return -self.co * self.w_star(t) - self.ls * self.t_o

    def req(self, t: float) -> float:
        """Combined element torque demanded by the no-jerk output equation,
        before the motor's direct share is removed."""
        return self.iout * self.dw - self.oo * self.u_o(t)

    def o_coef(self, gear: int) -> float:
        return self.o1 if gear == 1 else self.o2

    # -- per-instant solves --------------------------------------------------
    def algebraic_solve(
        self, t: float, dw_m: float, a1: float, a2: float
    ) -> tuple[float, float]:
        """Solve (u_m, combined element torque) with the motor speed imposed."""
        q = self.m1 * a1 + self.m2 * a2
        den = self.mu - q * self.ou
        if abs(den) < 1e-12:
            raise TrajectoryError("degenerate torque split for this model")
        u_m = (self.im * dw_m - self.mo * self.u_o(t) - q * self.req(t)) / den
        return u_m, self.req(t) - self.ou * u_m

    def free_eval(self, ph: _Phase, t: float, w: float):
        t_m = ph.motor_torque(self, t, w)
        u_m = t_m - self.cm * w
        lam = self.req(t) - self.ou * u_m
        a1, a2 = ph.alphas(t)
        t_1, t_2 = a1 * lam, a2 * lam
        dw_m = (
            self.mu * u_m + self.mo * self.u_o(t) + self.m1 * t_1 + self.m2 * t_2
        ) / self.im
        return t_m, t_1, t_2, dw_m

    def free_accel(self, ph: _Phase, t: float, w: float) -> float:
        return self.free_eval(ph, t, w)[3]

    # -- sampling ------------------------------------------------------------
    def _append(
        self, t: float, w_m: float, t_m: float, t_1: float, t_2: float, label: str
    ) -> None:
        w_out = self.w_star(t)
        w_v = (self._v0 + self._a * t) / self._rw
        self._rows.append((t, w_m, w_out, w_v, t_m, t_1, t_2, self.t_o, t_m * w_m))
        self._labels.append(label)

    def _emit_algebraic(self, ph: _Phase, t: float) -> None:
        w, dw_m = ph.motor_speed(t)
        a1, a2 = ph.alphas(t)
        u_m, lam = self.algebraic_solve(t, dw_m, a1, a2)
        self._append(t, w, u_m + self.cm * w, a1 * lam, a2 * lam, ph.label)

    def _emit_free(self, ph: _Phase, t: float, w: float) -> None:
        t_m, t_1, t_2, _ = self.free_eval(ph, t, w)
        self._append(t, w, t_m, t_1, t_2, ph.label)

    # -- runner ---------------------------------------------------------------
    def run(self, phases: list[_Phase]) -> None:
        dt = self.settings.dt
        first = phases[0]
        if not isinstance(first, _Hold):
            raise TrajectoryError("shift plans must begin with a hold phase")
        r0 = self.model.sync_ratio(first.gear)
        self.w_m, self.dw_m = r0 * self.w_star(0.0), r0 * self.dw
        for ph in phases:
            ph.begin(self, self.t)
            start = self.t
            if ph.mode in ("stick", "cubic"):
                t1 = ph.t0 + ph.duration
                while self.k * dt <= t1 + _TIME_EPS:
                    self._emit_algebraic(ph, self.k * dt)
                    self.k += 1
                self.w_m, self.dw_m = ph.motor_speed(t1)
                self.t = t1
                status = "complete"
            else:
                status = self._run_free(ph)
            self._records.append((ph.label, start, self.t))
            self.end_state[ph.label] = (self.t, self.w_m)
            if status == "truncate":
                break

    def _run_free(self, ph: _Phase) -> str:
        dt = self.settings.dt
        t, w = self.t, self.w_m
        t_end = None if ph.duration is None else ph.t0 + ph.duration
        deadline = ph.t0 + self.settings.horizon

        def f(tt: float, ww: float) -> float:
            return self.free_accel(ph, tt, ww)

        if ph.has_event and ph.event(self, t, w) >= 0.0:
            self.t, self.w_m, self.dw_m = t, w, f(t, w)
            return "event"
        while True:
            stops = [self.k * dt]
            if t_end is not None:
                stops.append(t_end)
            if ph.has_event:
                stops.append(deadline)
            t_stop = min(stops)
            h = t_stop - t
            w_new = w if h <= _TIME_EPS else _rk4(f, t, w, h)
            if ph.has_event and h > _TIME_EPS:
                if ph.event(self, t_stop, w_new) >= 0.0:
                    t_ev, w_ev = self._bisect_event(ph, f, t, w, h)
                    self.t, self.w_m, self.dw_m = t_ev, w_ev, f(t_ev, w_ev)
                    return "event"
            t, w = t_stop, w_new
            if abs(t - self.k * dt) < _TIME_EPS:
                self._emit_free(ph, t, w)
                self.k += 1
            ph.on_step(self, t, w)
            if t_end is not None and t >= t_end - _TIME_EPS:
                self.t, self.w_m, self.dw_m = t, w, f(t, w)
                return "complete"
            if ph.has_event and t >= deadline - _TIME_EPS:
                ph.on_deadline(self, t, w)  # may raise instead of truncating
                self.t, self.w_m, self.dw_m = t, w, f(t, w)
                self.pending_flags.append(
                    Flag(
                        code="no-sync",
                        time=t,
                        value=ph.event(self, t, w),
                        limit=0.0,
                        message=(
                            "synchronization not reached within "
                            f"{self.settings.horizon:.3f} s horizon"
                        ),
                    )
                )
                return "truncate"

    def _bisect_event(self, ph, f, t, w, h) -> tuple[float, float]:
        lo, hi = 0.0, h
        for _ in range(120):
            if hi - lo < self.settings.event_tol:
                break
            mid = 0.5 * (lo + hi)
            if ph.event(self, t + mid, _rk4(f, t, w, mid)) >= 0.0:
                hi = mid
            else:
                lo = mid
        return t + hi, _rk4(f, t, w, hi)

    # -- assembly ---------------------------------------------------------------
    def finish(
        self,
        model_name: str,
        events: dict[str, float],
        clutch1: ClutchSpec,
        clutch2: ClutchSpec,
        speed_margin: float | None = None,
        residual_margin: float | None = None,
    ) -> GearshiftTrajectory:
        rows = np.array(self._rows, dtype=float)
        traj = GearshiftTrajectory(
            model_name=model_name,
            times=rows[:, 0],
            omega_m=rows[:, 1],
            omega_out=rows[:, 2],
            omega_v=rows[:, 3],
            torque_motor=rows[:, 4],
            torque_clutch1=rows[:, 5],
            torque_clutch2=rows[:, 6],
            torque_output=rows[:, 7],
            power_motor=rows[:, 8],
            phase_labels=list(self._labels),
            phases=list(self._records),
            events=events,
            flags=list(self.pending_flags),
            scenario=self.scenario,
            targets=self.targets,
            settings=self.settings,
            speed_margin=speed_margin,
            residual_margin=residual_margin,
            model=self.model,
        )
        traj.flags.extend(
            _scan_flags(traj, self.motor, clutch1, clutch2, self.settings)
        )
        return traj


def _scan_flags(
    traj: GearshiftTrajectory,
    motor,
    clutch1: ClutchSpec,
    clutch2: ClutchSpec,
    settings: SolverSettings,
) -> list[Flag]:
    """Audit a solved trajectory against every limit; one flag per code."""
    rel = settings.limit_rel_tol
    m = traj.model
    t = traj.times
    w = traj.omega_m
    flags: dict[str, Flag] = {}

    def note(code, when, value, limit, message):
        if code not in flags:
            flags[code] = Flag(code, float(when), float(value), float(limit), message)

    env = np.array([motor.available_torque(abs(x)) for x in w])
    over = np.abs(traj.torque_motor) > env * (1.0 + rel) + 1e-12
    if np.any(over):
        i = int(np.argmax(over))
        j = int(np.argmax(np.abs(traj.torque_motor) - env))
        note(
            "torque",
            t[i],
            traj.torque_motor[j],
            env[j],
            "motor torque exceeds the available envelope",
        )
    over = np.abs(traj.power_motor) > motor.max_power * (1.0 + rel) + 1e-9
    if np.any(over):
        i = int(np.argmax(over))
        j = int(np.argmax(np.abs(traj.power_motor)))
        note(
            "power",
            t[i],
            traj.power_motor[j],
            motor.max_power,
            "motor power exceeds the rated limit",
        )
    over = np.abs(w) > motor.max_speed * (1.0 + rel)
    if np.any(over):
        i = int(np.argmax(over))
        j = int(np.argmax(np.abs(w)))
        note("speed", t[i], w[j], motor.max_speed, "motor speed exceeds the rated limit")

    for gear, torque, spec in (
        (1, traj.torque_clutch1, clutch1),
        (2, traj.torque_clutch2, clutch2),
    ):
        if spec.kind == "one_way":
            neg = torque < -1e-9
            if np.any(neg):
                i = int(np.argmax(neg))
                j = int(np.argmin(torque))
                note(
                    "one-way-reversal",
                    t[i],
                    torque[j],
                    0.0,
                    f"element {gear} is one-way and cannot carry negative torque",
                )
            continue
        cap = spec.capacity()
        over = np.abs(torque) > cap * (1.0 + rel)
        if np.any(over):
            i = int(np.argmax(over))
            j = int(np.argmax(np.abs(torque)))
            note(
                "torque",
                t[i],
                torque[j],
                cap,
                f"element {gear} torque exceeds its friction capacity",
            )
        # actuation rate, finite difference within phases only (phase
        # boundary steps are motor-commanded redistributions, not smooth
        # actuator ramps, and the motor itself is not rate-limited)
        if t.size >= 2:
            dtv = np.diff(t)
            rate = np.abs(np.diff(torque)) / dtv
            same = np.array(
                [
                    traj.phase_labels[i] == traj.phase_labels[i + 1]
                    for i in range(t.size - 1)
                ]
            )
            over = (rate > spec.rate_limit * (1.0 + 1e-6)) & same
            if np.any(over):
                i = int(np.argmax(over))
                j = int(np.argmax(np.where(same, rate, 0.0)))
                note(
                    "rate",
                    t[i],
                    rate[j],
                    spec.rate_limit,
                    f"element {gear} torque slews faster than its actuator allows",
                )
        # friction direction while slipping
        slip = np.array(
            [m.slip_speed(gear, w[i], traj.omega_out[i]) for i in range(t.size)]
        )
        active = (np.abs(slip) > settings.stick_tol) & (np.abs(torque) > 1e-6)
        if np.any(active):
            want = np.array([m.slip_torque_sign(gear, s) for s in slip])
            bad = active & (np.sign(torque) != want)
            if np.any(bad):
                i = int(np.argmax(bad))
                note(
                    "torque-reversal",
                    t[i],
                    torque[i],
                    0.0,
                    f"element {gear} torque opposes its admissible slip direction",
                )
    return list(flags.values())


# ---------------------------------------------------------------------------
# public simulation entry points
# ---------------------------------------------------------------------------


def _required_gear1_torque(sv: _Solver, t: float) -> float:
    """Element-1 torque once it alone carries the no-jerk load at time t."""
    a1 = 1.0 / sv.o_coef(1)
    _, lam = sv.algebraic_solve(t, sv.model.sync_ratio(2) * sv.dw, a1, 0.0)
    return a1 * lam


def simulate_upshift_owc(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    motor,
    clutch1: ClutchSpec | None = None,
    clutch2: ClutchSpec | None = None,
    settings: SolverSettings | None = None,
) -> GearshiftTrajectory:
    """Upshift with a one-way element on gear 1.

    Torque transfer happens first (the one-way element simply unloads as the
    gear-2 element picks up), then the motor swings down to the gear-2
    synchronous speed along a Hermite cubic. The handover instant (transfer
    end) carries the motor's power peak.
    """
    clutch1 = clutch1 or ClutchSpec(kind="one_way")
    clutch2 = clutch2 or ClutchSpec()
    settings = settings or SolverSettings()
    if scenario.direction != "upshift" or scenario.quadrant != "driving":
        raise TrajectoryError("one-way upshift requires a driving upshift scenario")
    sv = _Solver(model, vehicle, scenario, motor, settings)
    phases = [
        _Hold(1, settings.lead_in),
        _Transfer(1, 2, scenario.torque_phase, stuck_gear=1),
        _CubicSync(2, scenario.inertia_phase),
        _Hold(2, settings.tail_out),
    ]
    sv.run(phases)
    t1 = settings.lead_in + scenario.torque_phase
    events = {
        "shift_start": settings.lead_in,
        "transfer_start": settings.lead_in,
        "transfer_end": t1,
        "handover": t1,
        "sync_start": t1,
        "sync_end": t1 + scenario.inertia_phase,
        "shift_end": t1 + scenario.inertia_phase,
    }
    return sv.finish(model.name, events, clutch1, clutch2)


def simulate_upshift_dualfriction(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    motor,
    speed_margin: float,
    clutch1: ClutchSpec | None = None,
    clutch2: ClutchSpec | None = None,
    settings: SolverSettings | None = None,
) -> GearshiftTrajectory:
    """Upshift with two friction elements.

    Because a slipping friction element can only drag the motor toward its
    own synchronous speed, the motor first builds a positive slip margin
    (``speed_margin`` [rad/s] above the gear-1 synchronous speed) at full
    envelope; the margin must survive the torque transfer, or element 1 ends
    up driven against its slip direction (flagged, never hidden). The slip
    remaining at transfer end is stored as ``residual_margin``.

    Raises
    ------
    SpeedMarginUnreachableError
        If the margin cannot be built before the envelope or the speed limit
        stalls slip growth.
    """
    if speed_margin < 0.0:
        raise TrajectoryError("speed margin must be >= 0")
    clutch1 = clutch1 or ClutchSpec()
    clutch2 = clutch2 or ClutchSpec()
    settings = settings or SolverSettings()
    if scenario.direction != "upshift" or scenario.quadrant != "driving":
        raise TrajectoryError(
            "dual-friction upshift requires a driving upshift scenario"
        )
    sv = _Solver(model, vehicle, scenario, motor, settings)
    ramp = None
    if abs(model.output_row[0]) > 1e-12:
        # motor torque steps feed straight into element 1 on coupled
        # layouts; cap the step rate safely below the actuator slew limit
        ramp = 0.95 * clutch1.rate_limit * abs(
            model.output_row[2] / model.output_row[0]
        )
    phases = [
        _Hold(1, settings.lead_in),
        _SpeedRaise(speed_margin, ramp),
        _Transfer(1, 2, scenario.torque_phase, stuck_gear=None),
        _CubicSync(2, scenario.inertia_phase),
        _Hold(2, settings.tail_out),
    ]
    sv.run(phases)
    t_tr, w_tr = sv.end_state["torque-transfer"]
    residual = w_tr - model.sync_ratio(1) * sv.w_star(t_tr)
    rec = {lbl: (a, b) for lbl, a, b in sv._records}
    events = {
        "shift_start": settings.lead_in,
        "speed_phase_end": rec["speed-raise"][1],
        "transfer_start": rec["torque-transfer"][0],
        "transfer_end": t_tr,
        "sync_start": t_tr,
        "sync_end": rec["inertia-sync"][1],
        "shift_end": rec["inertia-sync"][1],
    }
    return sv.finish(
        model.name,
        events,
        clutch1,
        clutch2,
        speed_margin=speed_margin,
        residual_margin=residual,
    )


def simulate_downshift_driving(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    motor,
    clutch1: ClutchSpec | None = None,
    clutch2: ClutchSpec | None = None,
    settings: SolverSettings | None = None,
) -> GearshiftTrajectory:
    """Powered downshift: inertia phase first, at the full motor envelope,
    until the gear-1 slip crosses zero; then the torque transfer. If slip
    never reaches zero within the horizon the trajectory is truncated and
    flagged ``no-sync``."""
    clutch1 = clutch1 or ClutchSpec()
    clutch2 = clutch2 or ClutchSpec()
    settings = settings or SolverSettings()
    if scenario.direction != "downshift" or scenario.quadrant != "driving":
        raise TrajectoryError("powered downshift requires a driving downshift scenario")
    sv = _Solver(model, vehicle, scenario, motor, settings)
    phases = [
        _Hold(2, settings.lead_in),
        _SyncSeek(),
        _Transfer(2, 1, scenario.torque_phase, stuck_gear=1),
        _Hold(1, settings.tail_out),
    ]
    sv.run(phases)
    rec = {lbl: (a, b) for lbl, a, b in sv._records}
    truncated = any(f.code == "no-sync" for f in sv.pending_flags)
    events = {"shift_start": settings.lead_in}
    if "inertia-sync" in rec:
        events["sync_start"] = rec["inertia-sync"][0]
        if not truncated:
            events["sync_time"] = rec["inertia-sync"][1]
    if "torque-transfer" in rec:
        events["transfer_start"] = rec["torque-transfer"][0]
        events["transfer_end"] = rec["torque-transfer"][1]
        events["shift_end"] = rec["torque-transfer"][1]
    return sv.finish(model.name, events, clutch1, clutch2)


def simulate_downshift_braking(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    motor,
    clutch1: ClutchSpec | None = None,
    clutch2: ClutchSpec | None = None,
    settings: SolverSettings | None = None,
) -> GearshiftTrajectory:
    """Braking downshift: both elements run in the negative-torque quadrant,
    so the torque transfer comes first (element 1 picks up the braking load
    while slipping in the admissible direction) and the motor then sweeps up
    to the gear-1 synchronous speed along a cubic.

    Raises
    ------
    InfeasibleShiftError
        If element 1 is a one-way device: it cannot carry negative torque at
        all, so no trajectory exists.
    """
    clutch1 = clutch1 or ClutchSpec()
    clutch2 = clutch2 or ClutchSpec()
    settings = settings or SolverSettings()
    if scenario.direction != "downshift" or scenario.quadrant != "braking":
        raise TrajectoryError("braking downshift requires a braking downshift scenario")
    sv = _Solver(model, vehicle, scenario, motor, settings)
    if clutch1.kind == "one_way":
        t_need = _required_gear1_torque(sv, settings.lead_in + scenario.torque_phase)
        raise InfeasibleShiftError(
            "braking downshift demands negative element-1 torque "
            f"({t_need:.1f} N*m) which a one-way device cannot carry",
            flag=Flag(
                code="one-way-reversal",
                time=0.0,
                value=t_need,
                limit=0.0,
                message="one-way element cannot transmit braking torque",
            ),
        )
    phases = [
        _Hold(2, settings.lead_in),
        _Transfer(2, 1, scenario.torque_phase, stuck_gear=2),
        _CubicSync(1, scenario.inertia_phase),
        _Hold(1, settings.tail_out),
    ]
    sv.run(phases)
    t1 = settings.lead_in + scenario.torque_phase
    events = {
        "shift_start": settings.lead_in,
        "transfer_start": settings.lead_in,
        "transfer_end": t1,
        "sync_start": t1,
        "sync_end": t1 + scenario.inertia_phase,
        "shift_end": t1 + scenario.inertia_phase,
    }
    return sv.finish(model.name, events, clutch1, clutch2)


def simulate_shift(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    motor,
    clutch1: ClutchSpec | None = None,
    clutch2: ClutchSpec | None = None,
    settings: SolverSettings | None = None,
    speed_margin: float | None = None,
) -> GearshiftTrajectory:
    """Dispatch to the right shift strategy for the scenario and hardware."""
    kind = (clutch1 or ClutchSpec()).kind
    if scenario.direction == "upshift":
        if scenario.quadrant == "braking":
            raise TrajectoryError("braking upshifts are not supported")
        if kind == "one_way":
            return simulate_upshift_owc(
                model, vehicle, scenario, motor, clutch1, clutch2, settings
            )
        if speed_margin is None:
            raise TrajectoryError(
                "dual-friction upshift needs a speed margin (the feasibility "
                "check reports the minimum workable value)"
            )
        return simulate_upshift_dualfriction(
            model, vehicle, scenario, motor, speed_margin, clutch1, clutch2, settings
        )
    if scenario.quadrant == "driving":
        return simulate_downshift_driving(
            model, vehicle, scenario, motor, clutch1, clutch2, settings
        )
    return simulate_downshift_braking(
        model, vehicle, scenario, motor, clutch1, clutch2, settings
    )


def max_speed_margin(
    model: DrivelineModel,
    vehicle: VehicleParams,
    scenario: Scenario,
    motor,
    clutch1: ClutchSpec | None = None,
    settings: SolverSettings | None = None,
) -> tuple[float, str]:
    """Largest gear-1 slip margin the motor can build before handover.

    Integrates the speed-raise phase at the full envelope until slip growth
    stalls, the speed limit is hit, or the horizon runs out. Returns the
    achieved margin [rad/s] and what capped it (``"power"``, ``"speed"`` or
    ``"horizon"``).
    """
    clutch1 = clutch1 or ClutchSpec()
    settings = settings or SolverSettings()
    sv = _Solver(model, vehicle, scenario, motor, settings)
    ph = _SpeedRaise(margin=math.inf, ramp_rate=None)
    if abs(model.output_row[0]) > 1e-12:
        ph.ramp_rate = 0.95 * clutch1.rate_limit * abs(
            model.output_row[2] / model.output_row[0]
        )
    t0 = settings.lead_in
    rho1 = model.sync_ratio(1)
    sv.w_m = rho1 * sv.w_star(t0)
    sv.dw_m = rho1 * sv.dw
    ph.begin(sv, t0)

    def f(tt: float, ww: float) -> float:
        return sv.free_accel(ph, tt, ww)

    def sigma(tt: float, ww: float) -> float:
        return ww - rho1 * sv.w_star(tt)

    t, w = t0, sv.w_m
    w_cap = motor.max_speed
    while True:
        if not ph.ramp_binding(sv, t, w) and f(t, w) - rho1 * sv.dw <= 1e-9:
            return sigma(t, w), "power"
        h = settings.dt
        w_new = _rk4(f, t, w, h)
        if w_new >= w_cap:
            lo, hi = 0.0, h
            for _ in range(80):
                if hi - lo < settings.event_tol:
                    break
                mid = 0.5 * (lo + hi)
                if _rk4(f, t, w, mid) >= w_cap:
                    hi = mid
                else:
                    lo = mid
            return sigma(t + hi, _rk4(f, t, w, hi)), "speed"
        t, w = t + h, w_new
        if t - t0 >= settings.horizon:
            return sigma(t, w), "horizon"


def integrate_step(
    model: DrivelineModel,
    w_m: float,
    w_out: float,
    torques: tuple[float, float, float, float],
    dt: float,
    substeps: int = 1,
) -> tuple[float, float]:
    """Advance the free two-state model one step under constant torques.

    ``torques`` is ``(T_m, T_1, T_2, T_o)``. Plain RK4; useful for model
    cross-checks and reconstruction tests rather than shift synthesis.
    """
    t_m, t_1, t_2, t_o = torques
    y = np.array([w_m, w_out], dtype=float)

    def f(yy):
        return np.array(model.accelerations(yy[0], yy[1], t_m, t_1, t_2, t_o))

    h = dt / substeps
    for _ in range(substeps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return float(y[0]), float(y[1])


def validate_trajectory(
    traj: GearshiftTrajectory, vehicle: VehicleParams, substeps: int = 1
) -> DrivelineCheck:
    """Replay a solved shift through the compliant driveline model.

    Reflects the trajectory to the wheel frame and hands it to
    :func:`evshift.vehicle_load.validate_full_driveline`; the returned check
    carries the vehicle jerk that actually results once shaft compliance and
    the true speed-dependent road load are restored.
    """
    wf = traj.wheel_frame()
    return validate_full_driveline(
        vehicle,
        wf["times"],
        wf["wheel_torque"],
        output_inertia=wf["output_inertia"],
        output_damping=wf["output_damping"],
        stiffness=wf["stiffness"],
        damping=wf["damping"],
        initial_speed=wf["initial_speed"],
        road=traj.scenario.road,
        substeps=substeps,
    )
