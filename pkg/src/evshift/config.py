"""YAML configuration loading with per-field provenance.

One documented format, no autodetection: a single YAML file declares the
vehicle, driveline, gearing, shift elements, motor, named scenarios, solver
settings and (optionally) the motor-sizing study. Every field is validated
on load, unknown keys are rejected (typos fail loudly instead of silently
running defaults), and the returned document records for each field whether
its value came from the file or from a default — sweep and report output
can then state exactly what was assumed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .driveline_models import ClutchSpec, DrivelineParams, GearingSpec
from .errors import ConfigError
from .feasibility import RPM_TO_RAD_S, MotorLimits
from .motor_sizing import DesignSpec
from .trajectory_engine import SolverSettings
from .vehicle_load import RoadCondition, Scenario, VehicleParams

__all__ = ["ConfigDocument", "SizingStudy", "load_config"]

_REQUIRED = object()


class _Section:
    """One mapping node: typed field extraction + unknown-key rejection."""

    def __init__(self, data, where: str, provenance: dict):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
        self._data = dict(data)
        self._where = where
        self._prov = provenance

    def _coerce(self, key, raw, kind):
        where = f"{self._where}.{key}"
        if kind is float:
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                raise ConfigError(f"{where}: expected a number, got {raw!r}")
            return float(raw)
        if kind is int:
            if isinstance(raw, bool) or not isinstance(raw, int):
                raise ConfigError(f"{where}: expected an integer, got {raw!r}")
            return raw
        if kind is str:
            if not isinstance(raw, str):
                raise ConfigError(f"{where}: expected a string, got {raw!r}")
            return raw
        return raw

    def take(self, key, default=_REQUIRED, kind=float):
        if key in self._data:
            value = self._coerce(key, self._data.pop(key), kind)
            self._prov[f"{self._where}.{key}"] = "file"
            return value
        if default is _REQUIRED:
            raise ConfigError(f"{self._where}: missing required key {key!r}")
        self._prov[f"{self._where}.{key}"] = "default"
        return default

    def take_one_of(self, keys_kinds, where_hint: str):
        """Exactly one of the alternative keys must be present."""
        present = [k for k, _ in keys_kinds if k in self._data]
        if len(present) != 1:
            names = " or ".join(k for k, _ in keys_kinds)
            raise ConfigError(
                f"{self._where}: give exactly one of {names} ({where_hint})"
            )
        key = present[0]
        kind = dict(keys_kinds)[key]
        value = self._coerce(key, self._data.pop(key), kind)
        self._prov[f"{self._where}.{key}"] = "file"
        return key, value

    def subsection(self, key, required=True):
        if key not in self._data:
            if required:
                raise ConfigError(f"{self._where}: missing required section {key!r}")
            return None
        raw = self._data.pop(key)
        return _Section(raw, f"{self._where}.{key}", self._prov)

    def raw_subsections(self, key):
        """Pop a mapping-of-mappings (e.g. the named scenarios)."""
        if key not in self._data:
            raise ConfigError(f"{self._where}: missing required section {key!r}")
        raw = self._data.pop(key)
        if not isinstance(raw, dict) or not raw:
            raise ConfigError(f"{self._where}.{key}: expected a non-empty mapping")
        return {
            str(name): _Section(sub, f"{self._where}.{key}.{name}", self._prov)
            for name, sub in raw.items()
        }

    def take_list(self, key, default=_REQUIRED):
        if key not in self._data:
            if default is _REQUIRED:
                raise ConfigError(f"{self._where}: missing required key {key!r}")
            self._prov[f"{self._where}.{key}"] = "default"
            return default
        raw = self._data.pop(key)
        if not isinstance(raw, list):
            raise ConfigError(f"{self._where}.{key}: expected a list")
        self._prov[f"{self._where}.{key}"] = "file"
        return raw

    def finish(self):
        if self._data:
            stray = ", ".join(sorted(map(str, self._data)))
            raise ConfigError(f"{self._where}: unknown keys: {stray}")


@dataclass(frozen=True)
class SizingStudy:
    """Inputs of the motor-sizing command."""

    mass: float
    efficiency: float
    ratio_sets: tuple
    specs: tuple


@dataclass(frozen=True)
class ConfigDocument:
    path: str
    vehicle: VehicleParams
    driveline: DrivelineParams
    gearing: GearingSpec
    clutch1: ClutchSpec
    clutch2: ClutchSpec
    motor: MotorLimits
    scenarios: dict
    solver: SolverSettings
    sizing: SizingStudy | None
    provenance: dict = field(default_factory=dict)

    def scenario(self, name: str) -> Scenario:
        try:
            return self.scenarios[name]
        except KeyError:
            known = ", ".join(sorted(self.scenarios))
            raise ConfigError(f"unknown scenario {name!r} (config has: {known})")


def _build(where, ctor, /, **kwargs):
    """Construct a domain object, reporting its invariant errors as config errors."""
    try:
        return ctor(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _vehicle(sec: _Section) -> VehicleParams:
    v = _build(
        "vehicle",
        VehicleParams,
        mass=sec.take("mass"),
        wheel_radius=sec.take("wheel_radius"),
        frontal_area=sec.take("frontal_area"),
        drag_coeff=sec.take("drag_coeff"),
        roll_coeff=sec.take("roll_coeff"),
        air_density=sec.take("air_density", 1.2),
        gravity=sec.take("gravity", 9.81),
    )
    sec.finish()
    return v


def _driveline(sec: _Section) -> DrivelineParams:
    d = _build(
        "driveline",
        DrivelineParams,
        motor_inertia=sec.take("motor_inertia"),
        output_inertia=sec.take("output_inertia"),
        motor_damping=sec.take("motor_damping"),
        output_damping=sec.take("output_damping"),
        stiffness=sec.take("stiffness", 10000.0),
        damping=sec.take("damping", 75.0),
        ring_inertia=sec.take("ring_inertia", 0.0),
        sun_inertia=sec.take("sun_inertia", 0.0),
    )
    sec.finish()
    return d


def _gearing(sec: _Section) -> GearingSpec:
    g = _build(
        "gearing",
        GearingSpec,
        gear1=sec.take("gear1"),
        gear2=sec.take("gear2"),
        beta1=sec.take("beta1", None),
        beta2=sec.take("beta2", None),
        final_drive=sec.take("final_drive", None),
    )
    sec.finish()
    return g


def _clutch(sec: _Section | None, where: str) -> ClutchSpec:
    if sec is None:
        return ClutchSpec()
    c = _build(
        where,
        ClutchSpec,
        kind=sec.take("kind", "friction", kind=str),
        max_normal_force=sec.take("max_normal_force", 1e4),
        mu_dynamic=sec.take("mu_dynamic", 0.3),
        mu_static=sec.take("mu_static", 0.3),
        mean_radius=sec.take("mean_radius", 0.1),
        surfaces=sec.take("surfaces", 4, kind=int),
        rate_limit=sec.take("rate_limit", 5000.0),
    )
    sec.finish()
    return c


def _motor(sec: _Section) -> MotorLimits:
    key, speed = sec.take_one_of(
        [("max_speed_rpm", float), ("max_speed", float)],
        "rated speed in rpm or rad/s",
    )
    if key == "max_speed_rpm":
        speed = speed * RPM_TO_RAD_S
    m = _build(
        "motor",
        MotorLimits,
        max_torque=sec.take("max_torque"),
        max_power=sec.take("max_power"),
        max_speed=speed,
    )
    sec.finish()
    return m


def _scenario(name: str, sec: _Section) -> Scenario:
    key, speed = sec.take_one_of(
        [("initial_speed_kmh", float), ("initial_speed", float)],
        "initial vehicle speed in km/h or m/s",
    )
    if key == "initial_speed_kmh":
        speed = speed / 3.6
    road = _build(f"scenarios.{name}", RoadCondition, grade=sec.take("grade", 0.0))
    s = _build(
        f"scenarios.{name}",
        Scenario,
        name=name,
        direction=sec.take("direction", kind=str),
        quadrant=sec.take("quadrant", kind=str),
        initial_speed=speed,
        acceleration=sec.take("acceleration"),
        road=road,
        torque_phase=sec.take("torque_phase", 0.25),
        inertia_phase=sec.take("inertia_phase", 0.20),
        torque_demand=sec.take("torque_demand", None),
    )
    sec.finish()
    return s


def _solver(sec: _Section | None) -> SolverSettings:
    if sec is None:
        return SolverSettings()
    s = _build(
        "solver",
        SolverSettings,
        dt=sec.take("dt", 1e-3),
        stick_tol=sec.take("stick_tol", 1e-4),
        event_tol=sec.take("event_tol", 1e-9),
        horizon=sec.take("horizon", 5.0),
        practical_sync_time=sec.take("practical_sync_time", 2.0),
        lead_in=sec.take("lead_in", 0.05),
        tail_out=sec.take("tail_out", 0.05),
        limit_rel_tol=sec.take("limit_rel_tol", 1e-9),
    )
    sec.finish()
    return s


def _sizing(sec: _Section | None) -> SizingStudy | None:
    if sec is None:
        return None
    mass = sec.take("mass")
    efficiency = sec.take("efficiency", 1.0)
    raw_sets = sec.take_list("ratio_sets")
    ratio_sets = []
    for i, rs in enumerate(raw_sets):
        if not isinstance(rs, list) or not rs:
            raise ConfigError(f"sizing.ratio_sets[{i}]: expected a non-empty list")
        ratios = []
        for r in rs:
            if isinstance(r, bool) or not isinstance(r, (int, float)) or r <= 0:
                raise ConfigError(f"sizing.ratio_sets[{i}]: ratios must be positive numbers")
            ratios.append(float(r))
        ratio_sets.append(tuple(ratios))
    raw_specs = sec.take_list("specs")
    specs = []
    for i, raw in enumerate(raw_specs):
        sub = _Section(raw, f"sizing.specs[{i}]", sec._prov)
        key, speed = sub.take_one_of(
            [("speed_kmh", float), ("speed", float)], "design speed in km/h or m/s"
        )
        if key == "speed_kmh":
            speed = speed / 3.6
        specs.append(
            _build(
                f"sizing.specs[{i}]",
                DesignSpec,
                name=sub.take("name", kind=str),
                speed=speed,
                grade=sub.take("grade", 0.0),
                duration=sub.take("duration", "short", kind=str),
            )
        )
        sub.finish()
    sec.finish()
    if len({s.name for s in specs}) != len(specs):
        raise ConfigError("sizing.specs: names must be unique")
    return SizingStudy(
        mass=mass,
        efficiency=efficiency,
        ratio_sets=tuple(ratio_sets),
        specs=tuple(specs),
    )


def load_config(path: str) -> ConfigDocument:
    """Load and validate a configuration file.

    Raises
    ------
    ConfigError
        On parse errors (with the YAML position), missing/unknown keys, or
        any violated field invariant (named in the message).
    """
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path!r} is not valid YAML: {exc}") from exc
    if raw is None:
        raise ConfigError(f"config {path!r} is empty")
    provenance: dict[str, str] = {}
    root = _Section(raw, "config", provenance)
    vehicle = _vehicle(root.subsection("vehicle"))
    driveline = _driveline(root.subsection("driveline"))
    gearing = _gearing(root.subsection("gearing"))
    clutches = root.subsection("clutches", required=False)
    if clutches is not None:
        clutch1 = _clutch(clutches.subsection("clutch1", required=False), "clutches.clutch1")
        clutch2 = _clutch(clutches.subsection("clutch2", required=False), "clutches.clutch2")
        clutches.finish()
    else:
        clutch1, clutch2 = ClutchSpec(), ClutchSpec()
    motor = _motor(root.subsection("motor"))
    scenarios = {
        name: _scenario(name, sec)
        for name, sec in root.raw_subsections("scenarios").items()
    }
    solver = _solver(root.subsection("solver", required=False))
    sizing = _sizing(root.subsection("sizing", required=False))
    root.finish()
    if not math.isfinite(vehicle.mass):
        raise ConfigError("vehicle.mass: must be finite")
    return ConfigDocument(
        path=str(path),
        vehicle=vehicle,
        driveline=driveline,
        gearing=gearing,
        clutch1=clutch1,
        clutch2=clutch2,
        motor=motor,
        scenarios=scenarios,
        solver=solver,
        sizing=sizing,
        provenance=provenance,
    )
