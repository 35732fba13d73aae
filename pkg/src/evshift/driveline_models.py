"""Transmission dynamics models and clutch torque laws.

Four concrete models share one linear evaluation form. Writing the motor
input as ``u_m = T_m - c_m*w_m`` and the output-shaft input as
``u_o = -c_o*w_out - load_scale*T_o``, every model reads

    I_m   * dw_m/dt   = M_u*u_m + M_o*u_o + M_1*T_1 + M_2*T_2
    I_out * dw_out/dt = O_u*u_m + O_o*u_o + O_1*T_1 + O_2*T_2

where T_1, T_2 are the two shift-element torques (clutches on the parallel
shaft layout, brakes on the planetary layout).

* Parallel twin-shaft layout ("dct"): two clutches with gear ratios i1 > i2;
  the rows are (1, 0, -1, -1) and (0, 1, i1, i2).
* Dual-brake double-planetary layout ("dbt"): shared ring shaft (brake 1)
  and shared sun shaft (brake 2), with the motor on the first-stage carrier
  and the output on the second-stage carrier, upstream of a final drive.
  Neglecting ring/sun inertias gives fixed rows in the tooth ratios
  beta1, beta2; keeping them requires eliminating the two mesh forces and
  the ring/sun accelerations from the six-equation rigid model, which
  produces the eight coupling coefficients computed here in closed form and
  cross-checked on construction against an independent numeric elimination.

Sign conventions worth noting for the planetary layout: brake torques act on
the ring/sun shafts, so an engaged brake's slipping torque opposes *element*
speed (not motor slip), and the sun brake carries negative torque while
driving in second gear.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DrivelineParams",
    "GearingSpec",
    "ClutchSpec",
    "ClutchState",
    "ReducedCoefficients",
    "DrivelineModel",
    "ParallelShaftModel",
    "PlanetaryModel",
    "MODEL_NAMES",
    "clutch_torque",
    "owc_constraint_check",
    "planetary_coefficients",
    "planetary_coefficients_numeric",
    "dct_dynamics",
    "dbt_dynamics_simplified",
    "dbt_dynamics_full",
    "build_model",
]

MODEL_NAMES = ("dct-friction", "dct-owc", "dbt-simple", "dbt-full")

STICK_TOL = 1e-4  # [rad/s] slip magnitude counted as synchronized


@dataclass(frozen=True)
class DrivelineParams:
    """Lumped driveline parameters.

    Parameters
    ----------
    motor_inertia : float
        Motor-side inertia I_m [kg*m^2] (first planetary carrier lumped in).
    output_inertia : float
        Output-shaft inertia I_out [kg*m^2] (second carrier lumped in).
    motor_damping, output_damping : float
        Viscous losses c_m, c_o [N*m*s/rad].
    stiffness, damping : float
        Driveline shaft compliance k [N*m/rad] and d [N*m*s/rad], used only
        by the full-driveline validation model.
    ring_inertia, sun_inertia : float
        Shared ring / sun shaft inertias [kg*m^2]; planetary layout only.
    """

    motor_inertia: float
    output_inertia: float
    motor_damping: float
    output_damping: float
    stiffness: float = 10_000.0
    damping: float = 75.0
    ring_inertia: float = 0.0
    sun_inertia: float = 0.0

    def __post_init__(self) -> None:
        if self.motor_inertia <= 0.0 or self.output_inertia <= 0.0:
            raise ValueError("inertias must be > 0")
        if self.motor_damping < 0.0 or self.output_damping < 0.0:
            raise ValueError("dampings must be >= 0")
        if self.stiffness <= 0.0 or self.damping <= 0.0:
            raise ValueError("stiffness and damping must be > 0")
        if self.ring_inertia < 0.0 or self.sun_inertia < 0.0:
            raise ValueError("gear inertias must be >= 0")


@dataclass(frozen=True)
class GearingSpec:
    """Gear ratios for both layouts.

    ``gear1 > gear2`` are the overall parallel-shaft ratios. The planetary
    fields describe the dual-brake layout: tooth ratios ``beta1, beta2``
    (ring/sun per stage) and the ``final_drive`` between the second carrier
    and the wheels. Either provide all three or none.
    """

    gear1: float
    gear2: float
    beta1: float | None = None
    beta2: float | None = None
    final_drive: float | None = None

    def __post_init__(self) -> None:
        if not (self.gear1 > self.gear2 > 0.0):
            raise ValueError("require gear1 > gear2 > 0 (an upshift lowers the ratio)")
        planetary = (self.beta1, self.beta2, self.final_drive)
        if any(v is not None for v in planetary):
            if any(v is None for v in planetary):
                raise ValueError("beta1, beta2, final_drive must be given together")
            if self.beta1 <= 0.0 or self.beta2 <= 0.0 or self.final_drive <= 0.0:
                raise ValueError("planetary ratios must be > 0")
            if self.beta2 <= self.beta1:
                raise ValueError("require beta2 > beta1 so first gear is the shorter one")

    @property
    def has_planetary(self) -> bool:
        return self.beta1 is not None

    @property
    def planetary_gear1(self) -> float:
        """Upstream ratio motor:output with the ring shaft braked."""
        return (1.0 + self.beta2) / (1.0 + self.beta1)

    @property
    def planetary_gear2(self) -> float:
        """Upstream ratio motor:output with the sun shaft braked."""
        return self.beta1 * (1.0 + self.beta2) / (self.beta2 * (1.0 + self.beta1))


# ---------------------------------------------------------------------------
# clutch torque law
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClutchSpec:
    """Friction clutch / brake parameters.

    The transmissible torque is ``F_n * mu * R_a * n``. ``rate_limit`` caps
    the commanded |dT/dt| of the actuation. ``kind`` is ``"friction"`` or
    ``"one_way"`` (mechanical freewheel on element 1).
    """

    kind: str = "friction"
    max_normal_force: float = 10_000.0  # F_n,max [N]
    mu_dynamic: float = 0.3
    mu_static: float = 0.3
    mean_radius: float = 0.1  # R_a [m]
    surfaces: int = 4
    rate_limit: float = 5_000.0  # [N*m/s]

    def __post_init__(self) -> None:
        if self.kind not in ("friction", "one_way"):
            raise ValueError(f"unknown clutch kind {self.kind!r}")
        if not (self.mu_static >= self.mu_dynamic > 0.0):
            raise ValueError("require mu_static >= mu_dynamic > 0")
        if self.max_normal_force <= 0.0 or self.mean_radius <= 0.0 or self.surfaces < 1:
            raise ValueError("invalid clutch geometry")
        if self.rate_limit <= 0.0:
            raise ValueError("rate_limit must be > 0")

    def capacity(self, normal_force: float | None = None, static: bool = True) -> float:
        """Transmissible torque [N*m] at the given (default max) clamp force."""
        f_n = self.max_normal_force if normal_force is None else normal_force
        mu = self.mu_static if static else self.mu_dynamic
        return f_n * mu * self.mean_radius * self.surfaces

    def slip_torque(self, normal_force: float, slip_speed: float) -> float:
        """Coulomb torque while slipping: dynamic capacity, sign of slip."""
        if abs(slip_speed) <= STICK_TOL:
            return 0.0
        return math.copysign(self.capacity(normal_force, static=False), slip_speed)


@dataclass
class ClutchState:
    """Instantaneous clutch condition used by the torque law."""

    mode: str = "stick"  # "stick" | "slip"
    slip_speed: float = 0.0  # [rad/s], motor side minus geared output side
    torque: float = 0.0  # [N*m]


def clutch_torque(
    spec: ClutchSpec,
    state: ClutchState,
    normal_force: float,
    stick_demand: float,
    stick_tol: float = STICK_TOL,
) -> tuple[float, str]:
    """Coulomb clutch/brake torque and the resulting mode.

    In stick the element transmits whatever reaction holds the constraint,
    up to the static capacity at the applied clamp force; exceeding it breaks
    away into slip, where the torque is the dynamic capacity signed with the
    slip speed. A one-way element rejects negative reactions and free-wheels
    (zero torque) whenever the motor side underruns the geared output side.

    Returns ``(torque, next_mode)``.
    """
    if normal_force < 0.0:
        raise ValueError("normal force must be >= 0")
    if normal_force > spec.max_normal_force:
        raise ValueError("normal force exceeds actuator capacity")

    if spec.kind == "one_way":
        if state.slip_speed < -stick_tol:
            return 0.0, "slip"  # free-wheeling
        return max(stick_demand, 0.0), "stick"

    if state.mode == "stick" or abs(state.slip_speed) <= stick_tol:
        cap = spec.capacity(normal_force, static=True)
        if abs(stick_demand) <= cap:
            return stick_demand, "stick"
        return math.copysign(spec.capacity(normal_force, static=False), stick_demand), "slip"
    return spec.slip_torque(normal_force, state.slip_speed), "slip"


def owc_constraint_check(
    torque_demand: float, slip_speed: float, stick_tol: float = STICK_TOL
) -> str:
    """Admissibility of a one-way element state.

    Returns ``"ok"``, ``"torque-reversal"`` (negative reaction demanded), or
    ``"overspeed"`` (motor side running ahead of the geared output side while
    engagement is asserted).
    """
    if torque_demand < -1e-12:
        return "torque-reversal"
    if slip_speed > stick_tol:
        return "overspeed"
    return "ok"


# ---------------------------------------------------------------------------
# planetary reduction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedCoefficients:
    """Coupling coefficients of the gear-inertia-coupled planetary model.

    ``m_*`` weight the motor equation, ``o_*`` the output equation; suffixes
    ``u`` (motor input), ``o`` (output input), ``b1``/``b2`` (brake torques).
    """

    m_u: float
    m_o: float
    m_b1: float
    m_b2: float
    o_u: float
    o_o: float
    o_b1: float
    o_b2: float

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.m_u,
            self.m_o,
            self.m_b1,
            self.m_b2,
            self.o_u,
            self.o_o,
            self.o_b1,
            self.o_b2,
        )

    @property
    def input_gain(self) -> float:
        """Effective motor-input gain once the brake-2 torque is eliminated
        through the output equation (appears as the decay-rate factor in the
        downshift synchronization analysis)."""
        return self.m_u - self.m_b2 * self.o_u / self.o_b2

    @property
    def load_gain(self) -> float:
        """Companion gain on the output input under the same elimination."""
        return self.m_o - self.m_b2 * self.o_o / self.o_b2

    @property
    def accel_coupling(self) -> float:
        """Weight of the output acceleration fed back into the motor
        equation under the same elimination (m_b2/o_b2)."""
        return self.m_b2 / self.o_b2

    @property
    def brake1_gain_ratio(self) -> float:
        """Sensitivity ratio d(w_m dot)/dT_1 over d(w_m dot)/du_m with the
        brake-2 torque eliminated; must be negative for the upshift handover
        power to be the phase maximum. Equals -(1+beta1)/beta1 exactly."""
        return -(self.m_b1 - self.m_b2 * self.o_b1 / self.o_b2) / self.input_gain


def planetary_coefficients(p: DrivelineParams, g: GearingSpec) -> ReducedCoefficients:
    """Closed-form coupling coefficients of the dual-brake planetary model.

    Eliminates the two mesh forces and the ring/sun accelerations from the
    rigid six-equation model (four shaft balances plus the two differentiated
    stage constraints). Radii scale out, so only the tooth ratios matter.
    Raises on degenerate ratios (beta1 == beta2 has no two-speed geometry).
    """
    if not g.has_planetary:
        raise ValueError("gearing has no planetary data")
    b1, b2 = g.beta1, g.beta2
    i_m, i_out = p.motor_inertia, p.output_inertia
    i_r, i_s = p.ring_inertia, p.sun_inertia
    s1, s2 = 1.0 + b1, 1.0 + b2
    d = b2 - b1
    if abs(d) < 1e-12:
        raise ValueError("beta1 == beta2: reduction is singular")

    a11 = i_m * b1 / s1 - i_r * s1 / d
    a12 = i_out * b2 / s2 + i_r * s2 / d
    a21 = i_m / s1 + i_s * s1 * b2 / d
    a22 = i_out / s2 - i_s * s2 * b1 / d
    det = a11 * a22 - a12 * a21
    if abs(det) < 1e-15:
        raise ValueError("singular planetary elimination for these parameters")

    return ReducedCoefficients(
        m_u=i_m * (a22 * b1 - a12) / (s1 * det),
        m_o=i_m * (a22 * b2 - a12) / (s2 * det),
        m_b1=i_m * a22 / det,
        m_b2=-i_m * a12 / det,
        o_u=i_out * (a11 - a21 * b1) / (s1 * det),
        o_o=i_out * (a11 - a21 * b2) / (s2 * det),
        o_b1=-i_out * a21 / det,
        o_b2=i_out * a11 / det,
    )


def planetary_coefficients_numeric(
    p: DrivelineParams,
    g: GearingSpec,
    sun_radii: tuple[float, float] = (1.0, 1.0),
) -> ReducedCoefficients:
    """Independent numeric route to the same coefficients.

    Assembles the rigid model as a 6x6 linear system in the four shaft
    accelerations and the two mesh forces, then reads each coefficient off
    the solution for a unit input. Kept in production as a construction-time
    cross-check of the closed form (the two derivations share no algebra).
    ``sun_radii`` sets the physical per-stage sun radii; the result must not
    depend on them.
    """
    if not g.has_planetary:
        raise ValueError("gearing has no planetary data")
    s1, s2 = sun_radii
    r1, r2 = g.beta1 * s1, g.beta2 * s2
    # unknowns: [dw_ring, dw_motor, dw_out, dw_sun, F1, F2]
    a = np.array(
        [
            [p.ring_inertia, 0.0, 0.0, 0.0, r1, r2],
            [0.0, p.motor_inertia, 0.0, 0.0, -(r1 + s1), 0.0],
            [0.0, 0.0, p.output_inertia, 0.0, 0.0, -(r2 + s2)],
            [0.0, 0.0, 0.0, p.sun_inertia, s1, s2],
            [-r1, r1 + s1, 0.0, -s1, 0.0, 0.0],
            [-r2, 0.0, r2 + s2, -s2, 0.0, 0.0],
        ]
    )
    cols = {}
    for tag, rhs in (
        ("u", [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
        ("o", [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
        ("b1", [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ("b2", [0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
    ):
        x = np.linalg.solve(a, np.array(rhs))
        cols[tag] = (p.motor_inertia * x[1], p.output_inertia * x[2])
    return ReducedCoefficients(
        m_u=cols["u"][0],
        m_o=cols["o"][0],
        m_b1=cols["b1"][0],
        m_b2=cols["b2"][0],
        o_u=cols["u"][1],
        o_o=cols["o"][1],
        o_b1=cols["b1"][1],
        o_b2=cols["b2"][1],
    )


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


class DrivelineModel:
    """Shared linear evaluation over the rows defined by each layout.

    Attributes set by subclasses:

    ``motor_row`` / ``output_row``
        Four weights each: (input u_m, input u_o, T_1, T_2).
    ``load_scale``
        Multiplier on the wheel-side load torque inside u_o (1 for the
        parallel layout, 1/final_drive upstream of the planetary output).
    ``speed_scale``
        Model output speed per unit wheel speed (1, or final_drive).
    """

    name: str = "base"

    def __init__(self, params: DrivelineParams, gearing: GearingSpec) -> None:
        self.params = params
        self.gearing = gearing
        self.motor_row: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
        self.output_row: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
        self.load_scale = 1.0
        self.speed_scale = 1.0

    # -- kinematics ------------------------------------------------------
    def sync_ratio(self, gear: int) -> float:
        """Motor speed per unit model output speed with ``gear`` engaged."""
        raise NotImplementedError

    def slip_speed(self, gear: int, w_m: float, w_out: float) -> float:
        """Speed across the slipping element of ``gear`` [rad/s]."""
        raise NotImplementedError

    def slip_torque_sign(self, gear: int, slip: float) -> float:
        """Admissible torque sign of element ``gear`` while it slips."""
        raise NotImplementedError

    def sync_slip(self, gear: int, w_m: float, w_out: float) -> float:
        """Motor overspeed relative to the ``gear`` synchronous speed."""
        return w_m - self.sync_ratio(gear) * w_out

    # -- dynamics --------------------------------------------------------
    def motor_input(self, w_m: float, t_m: float) -> float:
        return t_m - self.params.motor_damping * w_m

    def output_input(self, w_out: float, t_o: float) -> float:
        return -self.params.output_damping * w_out - self.load_scale * t_o

    def accelerations(
        self,
        w_m: float,
        w_out: float,
        t_m: float,
        t_1: float,
        t_2: float,
        t_o: float,
    ) -> tuple[float, float]:
        """Motor and output shaft accelerations [rad/s^2]."""
        u_m = self.motor_input(w_m, t_m)
        u_o = self.output_input(w_out, t_o)
        mu, mo, m1, m2 = self.motor_row
        ou, oo, o1, o2 = self.output_row
        dw_m = (mu * u_m + mo * u_o + m1 * t_1 + m2 * t_2) / self.params.motor_inertia
        dw_out = (ou * u_m + oo * u_o + o1 * t_1 + o2 * t_2) / self.params.output_inertia
        return dw_m, dw_out

    def effective_ratio(self, gear: int) -> float:
        """Quasi-static wheel-torque-per-motor-torque ratio in ``gear``.

        Eliminates the engaged element's torque from the static (zero
        acceleration, zero damping) balance of both equations.
        """
        mu, mo, m1, m2 = self.motor_row
        ou, oo, o1, o2 = self.output_row
        mg, og = (m1, o1) if gear == 1 else (m2, o2)
        return (mu * og - mg * ou) / (self.load_scale * (mo * og - mg * oo))


class ParallelShaftModel(DrivelineModel):
    """Twin lay-shaft layout: two clutches with ratios i1 > i2."""

    name = "dct"

    def __init__(self, params: DrivelineParams, gearing: GearingSpec) -> None:
        super().__init__(params, gearing)
        self.motor_row = (1.0, 0.0, -1.0, -1.0)
        self.output_row = (0.0, 1.0, gearing.gear1, gearing.gear2)

    def sync_ratio(self, gear: int) -> float:
        return self.gearing.gear1 if gear == 1 else self.gearing.gear2

    def slip_speed(self, gear: int, w_m: float, w_out: float) -> float:
        return w_m - self.sync_ratio(gear) * w_out

    def slip_torque_sign(self, gear: int, slip: float) -> float:
        # Coulomb drag on the motor side opposes the slip, which means the
        # clutch torque in these equations carries the slip's own sign.
        return math.copysign(1.0, slip)


class PlanetaryModel(DrivelineModel):
    """Dual-brake double-planetary layout, with or without gear inertias."""

    def __init__(
        self, params: DrivelineParams, gearing: GearingSpec, coupled: bool
    ) -> None:
        super().__init__(params, gearing)
        if not gearing.has_planetary:
            raise ValueError("planetary model requires beta1/beta2/final_drive")
        self.coupled = coupled
        self.name = "dbt-full" if coupled else "dbt-simple"
        self.load_scale = 1.0 / gearing.final_drive
        self.speed_scale = gearing.final_drive
        b1, b2 = gearing.beta1, gearing.beta2
        if coupled:
            self.coeffs = planetary_coefficients(params, gearing)
            check = planetary_coefficients_numeric(params, gearing)
            for ca, cn in zip(self.coeffs.as_tuple(), check.as_tuple()):
                scale = max(abs(ca), abs(cn), 1.0)
                if abs(ca - cn) / scale > 1e-9:
                    raise AssertionError(
                        "closed-form and numeric planetary coefficients disagree: "
                        f"{self.coeffs.as_tuple()} vs {check.as_tuple()}"
                    )
        else:
            # exact zero-gear-inertia limit of the reduction
            self.coeffs = ReducedCoefficients(
                m_u=1.0,
                m_o=0.0,
                m_b1=(1.0 + b1) / (b1 - b2),
                m_b2=-b2 * (1.0 + b1) / (b1 - b2),
                o_u=0.0,
                o_o=1.0,
                o_b1=(1.0 + b2) / (b2 - b1),
                o_b2=b1 * (1.0 + b2) / (b1 - b2),
            )
        c = self.coeffs
        self.motor_row = (c.m_u, c.m_o, c.m_b1, c.m_b2)
        self.output_row = (c.o_u, c.o_o, c.o_b1, c.o_b2)

    def sync_ratio(self, gear: int) -> float:
        if gear == 1:
            return self.gearing.planetary_gear1
        return self.gearing.planetary_gear2

    def slip_speed(self, gear: int, w_m: float, w_out: float) -> float:
        """Ring (gear 1) or sun (gear 2) shaft speed [rad/s]."""
        b1, b2 = self.gearing.beta1, self.gearing.beta2
        s1, s2 = 1.0 + b1, 1.0 + b2
        d = b2 - b1
        if gear == 1:
            return (s2 * w_out - s1 * w_m) / d
        return (b2 * s1 * w_m - b1 * s2 * w_out) / d

    def slip_torque_sign(self, gear: int, slip: float) -> float:
        # brake friction opposes the braked element's own rotation
        return -math.copysign(1.0, slip)


def build_model(name: str, params: DrivelineParams, gearing: GearingSpec) -> DrivelineModel:
    """Instantiate one of the four named transmission models."""
    if name in ("dct-friction", "dct-owc"):
        return ParallelShaftModel(params, gearing)
    if name == "dbt-simple":
        return PlanetaryModel(params, gearing, coupled=False)
    if name == "dbt-full":
        return PlanetaryModel(params, gearing, coupled=True)
    raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")


# ---------------------------------------------------------------------------
# direct evaluation helpers
# ---------------------------------------------------------------------------


def dct_dynamics(
    params: DrivelineParams,
    gearing: GearingSpec,
    *,
    w_m: float,
    w_out: float,
    t_m: float,
    t_1: float,
    t_2: float,
    t_o: float,
) -> tuple[float, float]:
    """Accelerations of the parallel twin-shaft layout."""
    return ParallelShaftModel(params, gearing).accelerations(w_m, w_out, t_m, t_1, t_2, t_o)


def dbt_dynamics_simplified(
    params: DrivelineParams,
    gearing: GearingSpec,
    *,
    w_m: float,
    w_out: float,
    t_m: float,
    t_1: float,
    t_2: float,
    t_o: float,
) -> tuple[float, float]:
    """Accelerations of the planetary layout with gear inertias neglected."""
    return PlanetaryModel(params, gearing, coupled=False).accelerations(
        w_m, w_out, t_m, t_1, t_2, t_o
    )


def dbt_dynamics_full(
    coeffs: ReducedCoefficients,
    params: DrivelineParams,
    gearing: GearingSpec,
    *,
    w_m: float,
    w_out: float,
    t_m: float,
    t_1: float,
    t_2: float,
    t_o: float,
) -> tuple[float, float]:
    """Accelerations of the gear-inertia-coupled planetary layout using
    externally supplied coefficients."""
    model = PlanetaryModel(params, gearing, coupled=True)
    model.coeffs = coeffs
    model.motor_row = (coeffs.m_u, coeffs.m_o, coeffs.m_b1, coeffs.m_b2)
    model.output_row = (coeffs.o_u, coeffs.o_o, coeffs.o_b1, coeffs.o_b2)
    return model.accelerations(w_m, w_out, t_m, t_1, t_2, t_o)
