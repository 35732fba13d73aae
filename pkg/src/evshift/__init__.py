"""Gearshift feasibility toolkit for single-motor multi-speed EV powertrains.

The package answers three questions about a clutch-to-clutch (or
brake-to-brake planetary) gearshift that must not disturb the vehicle:

* what motor/element trajectory performs the shift with zero output
  disturbance (``trajectory_engine``),
* whether that trajectory exists inside the motor's saturation limits,
  decided *before* simulating (``feasibility``),
* and how large a motor a given set of gear ratios requires in the first
  place (``motor_sizing``).

``config`` + ``cli`` wrap everything behind one YAML document and four
commands (``simulate``, ``check``, ``size-motor``, ``sweep``).
"""

from .config import ConfigDocument, SizingStudy, load_config
from .driveline_models import (
    MODEL_NAMES,
    ClutchSpec,
    DrivelineParams,
    GearingSpec,
    ParallelShaftModel,
    PlanetaryModel,
    ReducedCoefficients,
    build_model,
    planetary_coefficients,
    planetary_coefficients_numeric,
)
from .errors import (
    ConfigError,
    EvshiftError,
    InfeasibleShiftError,
    IntegrationError,
    SpeedMarginUnreachableError,
    TrajectoryError,
)
from .feasibility import (
    FeasibilityReport,
    MotorLimits,
    check_braking_downshift,
    check_dual_friction_upshift,
    check_owc_upshift,
    check_powered_downshift,
    check_shift,
)
from .motor_sizing import (
    DesignSpec,
    SizingReport,
    capacity_envelope,
    check_motor,
    motor_requirements,
    wheel_requirements,
)
from .trajectory_engine import (
    CSV_HEADER,
    Flag,
    GearshiftTrajectory,
    SolverSettings,
    max_speed_margin,
    simulate_downshift_braking,
    simulate_downshift_driving,
    simulate_shift,
    simulate_upshift_dualfriction,
    simulate_upshift_owc,
    validate_trajectory,
)
from .vehicle_load import (
    RoadCondition,
    Scenario,
    ShiftTargets,
    VehicleParams,
    equivalent_inertia,
    no_jerk_targets,
    road_load_torque,
    validate_full_driveline,
)

__version__ = "0.1.0"

__all__ = [
    "CSV_HEADER",
    "ClutchSpec",
    "ConfigDocument",
    "ConfigError",
    "DesignSpec",
    "DrivelineParams",
    "EvshiftError",
    "FeasibilityReport",
    "Flag",
    "GearingSpec",
    "GearshiftTrajectory",
    "InfeasibleShiftError",
    "IntegrationError",
    "MODEL_NAMES",
    "MotorLimits",
    "ParallelShaftModel",
    "PlanetaryModel",
    "ReducedCoefficients",
    "RoadCondition",
    "Scenario",
    "ShiftTargets",
    "SizingReport",
    "SizingStudy",
    "SolverSettings",
    "SpeedMarginUnreachableError",
    "TrajectoryError",
    "VehicleParams",
    "build_model",
    "capacity_envelope",
    "check_braking_downshift",
    "check_dual_friction_upshift",
    "check_motor",
    "check_owc_upshift",
    "check_powered_downshift",
    "check_shift",
    "equivalent_inertia",
    "load_config",
    "max_speed_margin",
    "motor_requirements",
    "no_jerk_targets",
    "planetary_coefficients",
    "planetary_coefficients_numeric",
    "road_load_torque",
    "simulate_downshift_braking",
    "simulate_downshift_driving",
    "simulate_shift",
    "simulate_upshift_dualfriction",
    "simulate_upshift_owc",
    "validate_full_driveline",
    "validate_trajectory",
    "wheel_requirements",
    "__version__",
]
