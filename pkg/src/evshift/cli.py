"""Command-line entry points: simulate, check, size-motor, sweep.

Everything is driven by one YAML config; commands add only run selection
(scenario, model) and output targets. All numeric output — CSV cells, JSON
payloads, human-readable lines — uses round-trip ``repr`` formatting, so an
identical config and command line produces byte-identical output.

Exit codes, never conflated:

* 0 — analysis ran and the result is feasible / all-pass,
* 2 — analysis ran and the result is infeasible (or the check does not
  apply in the requested operating region),
* 1 — the run itself failed (bad arguments, config errors, unknown names).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .config import ConfigDocument, load_config
from .driveline_models import MODEL_NAMES, build_model
from .errors import (
    ConfigError,
    EvshiftError,
    InfeasibleShiftError,
    SpeedMarginUnreachableError,
)
from .feasibility import check_dual_friction_upshift, check_shift
from .motor_sizing import capacity_envelope, check_motor
from .trajectory_engine import simulate_shift

__all__ = ["main"]


def _fmt(value) -> str:
    """Round-trip text for one scalar (the determinism contract)."""
    if isinstance(value, float):
        return repr(float(value))  # plain float even for numpy scalars
    if value is None:
        return ""
    return str(value)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default, which would collide with
    # the "infeasible" code; usage problems are errors -> 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclasses.dataclass
class _RunInputs:
    """Everything one analysis needs, after model-name resolution."""

    cfg: ConfigDocument
    model_name: str
    vehicle: object
    driveline: object
    gearing: object
    clutch1: object
    clutch2: object
    motor: object
    scenario: object
    solver: object

    @property
    def model(self):
        return build_model(self.model_name, self.driveline, self.gearing)


def _inputs(cfg: ConfigDocument, model_name: str, scenario_name: str) -> _RunInputs:
    # the model name is authoritative for the element kind: `dct-owc` puts a
    # freewheel on element 1, every other model uses controllable elements
    kind = "one_way" if model_name == "dct-owc" else "friction"
    return _RunInputs(
        cfg=cfg,
        model_name=model_name,
        vehicle=cfg.vehicle,
        driveline=cfg.driveline,
        gearing=cfg.gearing,
        clutch1=dataclasses.replace(cfg.clutch1, kind=kind),
        clutch2=dataclasses.replace(cfg.clutch2, kind="friction"),
        motor=cfg.motor,
        scenario=cfg.scenario(scenario_name),
        solver=cfg.solver,
    )


def _emit_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _print_report(report) -> None:
    print(f"check {report.check}: {report.verdict}")
    print(f"  binding limit: {report.binding_limit}")
    print(f"  margin: {_fmt(report.margin)}")
    for key in sorted(report.quantities):
        print(f"  {key} = {_fmt(report.quantities[key])}")
    for note in report.assumptions:
        print(f"  note: {note}")


def _report_exit(report) -> int:
    return 0 if report.verdict == "feasible" else 2


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    run = _inputs(cfg, args.model, args.scenario)
    scenario, model = run.scenario, run.model

    margin_check = None
    speed_margin = args.dm
    needs_margin = (
        scenario.direction == "upshift"
        and scenario.quadrant == "driving"
        and run.clutch1.kind == "friction"
    )
    if needs_margin and speed_margin is None:
        # derive the smallest workable pre-transfer slip margin
        margin_check = check_dual_friction_upshift(
            model, run.vehicle, scenario, run.motor, run.clutch1, run.clutch2, run.solver
        )
        if margin_check.verdict != "feasible":
            if args.machine_readable:
                _emit_json(
                    {
                        "command": "simulate",
                        "model": run.model_name,
                        "scenario": scenario.name,
                        "result": "not-simulated",
                        "margin_check": margin_check.to_dict(),
                    }
                )
            else:
                print("no workable speed margin; trajectory not simulated")
                _print_report(margin_check)
            return 2
        speed_margin = margin_check.quantities["dm_min"]

    try:
        traj = simulate_shift(
            model,
            run.vehicle,
            scenario,
            run.motor,
            run.clutch1,
            run.clutch2,
            run.solver,
            speed_margin=speed_margin,
        )
    except (InfeasibleShiftError, SpeedMarginUnreachableError) as exc:
        payload = {
            "command": "simulate",
            "model": run.model_name,
            "scenario": scenario.name,
            "result": "infeasible",
            "reason": str(exc),
        }
        flag = getattr(exc, "flag", None)
        if flag is not None:
            payload["flag"] = flag.to_dict()
        if args.machine_readable:
            _emit_json(payload)
        else:
            print(f"infeasible: {exc}")
        return 2

    if args.out:
        traj.to_csv(args.out)
    if args.plot:
        _plot_trajectory(traj, args.plot)

    summary = traj.summary()
    if args.machine_readable:
        payload = {
            "command": "simulate",
            "model": run.model_name,
            "scenario": scenario.name,
            "summary": summary,
        }
        if margin_check is not None:
            payload["margin_check"] = margin_check.to_dict()
        if args.out:
            payload["csv"] = args.out
        _emit_json(payload)
    else:
        verdict = "no-jerk shift achieved" if traj.feasible else "limits violated"
        print(f"simulate {scenario.name} / {run.model_name}: {verdict}")
        print(f"  duration {_fmt(summary['duration'])} s, {summary['samples']} samples")
        if traj.speed_margin is not None:
            print(f"  speed margin used {_fmt(traj.speed_margin)} rad/s")
        print(f"  peak motor power {_fmt(summary['peak_motor_power'])} W")
        print(f"  peak motor torque {_fmt(summary['peak_motor_torque'])} N*m")
        print(f"  peak motor speed {_fmt(summary['peak_motor_speed'])} rad/s")
        print(f"  peak element-1 torque rate {_fmt(summary['peak_clutch1_rate'])} N*m/s")
        print(f"  peak element-2 torque rate {_fmt(summary['peak_clutch2_rate'])} N*m/s")
        if traj.flags:
            for f in traj.flags:
                print(
                    f"  flag {f.code} at t={_fmt(f.time)}: {f.message} "
                    f"(value {_fmt(f.value)}, limit {_fmt(f.limit)})"
                )
        else:
            print("  flags: none")
        if args.out:
            print(f"  wrote {args.out}")
    return 0 if traj.feasible else 2


def _plot_trajectory(traj, path: str) -> None:
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on extras
        raise ConfigError(
            "plotting needs matplotlib; install the 'plot' extra"
        ) from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_w, ax_t, ax_p) = plt.subplots(3, 1, sharex=True, figsize=(8.0, 9.0))
    ax_w.plot(traj.times, traj.omega_m, label="motor")
    ax_w.plot(traj.times, traj.omega_out, label="output")
    ax_w.set_ylabel("speed [rad/s]")
    ax_w.legend(loc="best")
    ax_t.plot(traj.times, traj.torque_motor, label="motor")
    ax_t.plot(traj.times, traj.torque_clutch1, label="element 1")
    ax_t.plot(traj.times, traj.torque_clutch2, label="element 2")
    ax_t.plot(traj.times, traj.torque_output, label="output", linestyle="--")
    ax_t.set_ylabel("torque [N*m]")
    ax_t.legend(loc="best")
    ax_p.plot(traj.times, traj.power_motor)
    ax_p.set_ylabel("motor power [W]")
    ax_p.set_xlabel("time [s]")
    fig.suptitle(f"{traj.scenario.name} / {traj.model_name}")
    fig.savefig(path)
    plt.close(fig)


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    run = _inputs(cfg, args.model, args.scenario)
    report = check_shift(
        run.model,
        run.vehicle,
        run.scenario,
        run.motor,
        run.clutch1,
        run.clutch2,
        run.solver,
        transfer_time=args.transfer_time,
    )
    if args.machine_readable:
        _emit_json(
            {
                "command": "check",
                "model": run.model_name,
                "scenario": run.scenario.name,
                "report": report.to_dict(),
            }
        )
    else:
        _print_report(report)
    return _report_exit(report)


# ---------------------------------------------------------------------------
# size-motor
# ---------------------------------------------------------------------------

ENVELOPE_HEADER = "v_kmh,wheel_torque_Nm,limiting_factor"


def _envelope_csv(points) -> str:
    lines = [ENVELOPE_HEADER]
    for p in points:
        lines.append(f"{_fmt(p.v_kmh)},{_fmt(p.wheel_torque)},{p.limiting_factor}")
    return "\n".join(lines) + "\n"


def cmd_size_motor(args) -> int:
    cfg = load_config(args.config)
    if cfg.sizing is None:
        raise ConfigError("size-motor needs a `sizing:` section in the config")
    study = cfg.sizing
    vehicle = dataclasses.replace(cfg.vehicle, mass=study.mass)
    if args.ratios is not None:
        ratio_sets = [_parse_ratios(args.ratios)]
    else:
        ratio_sets = list(study.ratio_sets)

    reports = [
        check_motor(cfg.motor, vehicle, study.specs, rs, study.efficiency)
        for rs in ratio_sets
    ]

    if args.envelope_out:
        if len(ratio_sets) != 1:
            raise ConfigError(
                "--envelope-out covers one ratio set; select it with --ratios"
            )
        points = capacity_envelope(cfg.motor, ratio_sets[0], vehicle)
        with open(args.envelope_out, "w") as fh:
            fh.write(_envelope_csv(points))

    if args.machine_readable:
        _emit_json(
            {
                "command": "size-motor",
                "motor": {
                    "max_torque": cfg.motor.max_torque,
                    "max_power": cfg.motor.max_power,
                    "max_speed": cfg.motor.max_speed,
                },
                "mass": study.mass,
                "efficiency": study.efficiency,
                "reports": [r.to_dict() for r in reports],
            }
        )
    else:
        print(
            f"motor {_fmt(cfg.motor.max_torque)} N*m / {_fmt(cfg.motor.max_power)} W"
            f" / {_fmt(cfg.motor.max_speed)} rad/s, mass {_fmt(study.mass)} kg"
        )
        for report in reports:
            ratios = ", ".join(_fmt(r) for r in report.ratios)
            verdict = "pass" if report.overall_pass else "FAIL"
            print(f"ratio set [{ratios}]: {verdict}")
            print(f"  required motor torque {_fmt(report.required_torque)} N*m")
            print(f"  required motor power {_fmt(report.required_power)} W")
            print(f"  power margin {_fmt(report.power_margin)} W")
            for spec in report.specs:
                ok = "pass" if report.spec_pass[spec.name] else "FAIL"
                reqs = report.motor_side[spec.name]
                detail = "; ".join(
                    f"ratio {_fmt(m.ratio)}: {_fmt(m.torque)} N*m, "
                    f"{_fmt(m.power)} W, {_fmt(m.speed)} rad/s"
                    for m in reqs
                )
                print(f"  {spec.name}: {ok} ({detail})")
        if args.envelope_out:
            print(f"wrote {args.envelope_out}")
    return 0 if any(r.overall_pass for r in reports) else 2


def _parse_ratios(text: str) -> tuple:
    try:
        ratios = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"--ratios: expected comma-separated numbers, got {text!r}")
    if not ratios or any(r <= 0 for r in ratios):
        raise ConfigError("--ratios: need at least one positive ratio")
    return ratios


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

_SWEEP_SECTIONS = (
    "vehicle",
    "driveline",
    "gearing",
    "motor",
    "scenario",
    "solver",
    "clutch1",
    "clutch2",
)


def _apply_param(run: _RunInputs, path: str, value: float) -> _RunInputs:
    section, dot, field_name = path.partition(".")
    if not dot or section not in _SWEEP_SECTIONS:
        raise ConfigError(
            f"sweep parameter {path!r}: expected `section.field` with section "
            f"in {', '.join(_SWEEP_SECTIONS)} (or the virtual `delta_m`)"
        )
    target = getattr(run, section)
    names = {f.name for f in dataclasses.fields(target)}
    if field_name not in names:
        raise ConfigError(
            f"sweep parameter {path!r}: {section} has no field {field_name!r}"
        )
    try:
        replaced = dataclasses.replace(target, **{field_name: value})
    except ValueError as exc:
        raise ConfigError(f"sweep point {path}={_fmt(value)}: {exc}") from exc
    return dataclasses.replace(run, **{section: replaced})


def _sweep_values(args) -> list:
    if args.steps < 2:
        raise ConfigError("sweep needs --steps >= 2")
    if args.start == args.stop:
        raise ConfigError("sweep needs --from != --to")
    return [float(v) for v in np.linspace(args.start, args.stop, args.steps)]


def _sweep_margin_rows(run: _RunInputs, values) -> tuple:
    scenario = run.scenario
    if (
        scenario.direction != "upshift"
        or scenario.quadrant != "driving"
        or run.clutch1.kind != "friction"
    ):
        raise ConfigError(
            "delta_m sweeps need a driving upshift scenario and a friction "
            "element 1 (models other than dct-owc)"
        )
    header = ["delta_m", "status", "residual_slip", "peak_motor_speed", "flag_codes"]
    rows = []
    model = run.model
    for dm in values:
        try:
            traj = simulate_shift(
                model,
                run.vehicle,
                scenario,
                run.motor,
                run.clutch1,
                run.clutch2,
                run.solver,
                speed_margin=dm,
            )
        except SpeedMarginUnreachableError as exc:
            rows.append([dm, f"margin-unreachable-{exc.reason}", None, None, ""])
            continue
        codes = ";".join(sorted({f.code for f in traj.flags}))
        status = "ok" if traj.feasible else "flagged"
        rows.append(
            [dm, status, traj.residual_margin, float(np.max(np.abs(traj.omega_m))), codes]
        )
    return header, rows


def _sweep_check_rows(run: _RunInputs, param: str, values) -> tuple:
    rows = []
    keys = None
    for v in values:
        point = _apply_param(run, param, v)
        report = check_shift(
            point.model,
            point.vehicle,
            point.scenario,
            point.motor,
            point.clutch1,
            point.clutch2,
            point.solver,
        )
        if keys is None:
            keys = sorted(report.quantities)
        rows.append(
            [v, report.verdict, report.binding_limit, report.margin]
            + [report.quantities.get(k) for k in keys]
        )
    header = [param, "verdict", "binding_limit", "margin"] + list(keys or [])
    return header, rows


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    run = _inputs(cfg, args.model, args.scenario)
    values = _sweep_values(args)
    if args.param == "delta_m":
        header, rows = _sweep_margin_rows(run, values)
    else:
        header, rows = _sweep_check_rows(run, args.param, values)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(cell) for cell in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        if not args.machine_readable:
            print(f"wrote {len(rows)} sweep points to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------


def _add_common(sub, scenario=True, model=True):
    sub.add_argument("--config", required=True, help="path to the YAML config")
    if scenario:
        sub.add_argument("--scenario", required=True, help="scenario name from the config")
    if model:
        sub.add_argument(
            "--model", required=True, choices=MODEL_NAMES, help="transmission model"
        )
    sub.add_argument(
        "--machine-readable",
        action="store_true",
        help="emit a JSON payload instead of prose",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="evshift",
        description="Gearshift feasibility toolkit for multi-speed electric "
        "powertrains: no-jerk trajectory simulation, saturation checks, "
        "motor sizing and parameter sweeps.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p_sim = sub.add_parser("simulate", help="solve one gearshift trajectory")
    _add_common(p_sim)
    p_sim.add_argument("--out", help="write the trajectory CSV here")
    p_sim.add_argument(
        "--dm",
        type=float,
        default=None,
        help="pre-transfer slip margin [rad/s] for dual-friction upshifts "
        "(derived from the feasibility check when omitted)",
    )
    p_sim.add_argument("--plot", help="write a static SVG of the trajectory here")
    p_sim.set_defaults(func=cmd_simulate)

    p_chk = sub.add_parser("check", help="run the pre-shift feasibility check")
    _add_common(p_chk)
    p_chk.add_argument(
        "--transfer-time",
        type=float,
        default=None,
        help="torque-transfer duration override [s] for the one-way upshift check",
    )
    p_chk.set_defaults(func=cmd_check)

    p_size = sub.add_parser("size-motor", help="evaluate motor ratings vs design points")
    _add_common(p_size, scenario=False, model=False)
    p_size.add_argument(
        "--ratios", help="comma-separated ratio set overriding the config sets"
    )
    p_size.add_argument("--envelope-out", help="write the tractive-capacity CSV here")
    p_size.set_defaults(func=cmd_size_motor)

    p_swp = sub.add_parser("sweep", help="run a check or simulation over a range")
    _add_common(p_swp)
    p_swp.add_argument(
        "--param",
        required=True,
        help="dotted config path (e.g. scenario.acceleration) or `delta_m`",
    )
    p_swp.add_argument("--from", dest="start", type=float, required=True, help="range start")
    p_swp.add_argument("--to", dest="stop", type=float, required=True, help="range end")
    p_swp.add_argument("--steps", type=int, required=True, help="number of points (>= 2)")
    p_swp.add_argument("--out", help="write the sweep CSV here (default: stdout)")
    p_swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "func", None) is None:
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except (InfeasibleShiftError, SpeedMarginUnreachableError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EvshiftError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
