"""End-to-end CLI tests: exit codes, CSV outputs, JSON payloads, sweeps.

The exit-code contract: 0 = analysis ran and passed, 2 = analysis ran and
the shift is infeasible (the analysis itself succeeded), 1 = the run failed
(usage, config, unknown names). Usage errors must never look like
infeasibility.
"""
import json

import pytest

from evshift import CSV_HEADER
from evshift.cli import main

from conftest import EXAMPLE_CONFIG

CFG = str(EXAMPLE_CONFIG)

NO_SIZING = """
vehicle:
  mass: 6500
  wheel_radius: 0.3
  frontal_area: 6.0
  drag_coeff: 0.7
  roll_coeff: 0.007
driveline:
  motor_inertia: 0.3
  output_inertia: 0.05
  motor_damping: 0.02
  output_damping: 0.04
gearing:
  gear1: 12
  gear2: 6
motor:
  max_torque: 450
  max_power: 200000
  max_speed_rpm: 8000
scenarios:
  s:
    direction: upshift
    quadrant: driving
    initial_speed_kmh: 65
    acceleration: 1.0
"""


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "scenario,model,expected",
    [
        ("scenario1", "dct-owc", 2),
        ("scenario1", "dct-friction", 0),
        ("scenario2", "dct-friction", 0),
        ("scenario3", "dct-owc", 2),
        ("scenario3", "dct-friction", 0),
    ],
)
def test_check_exit_codes(scenario, model, expected):
    rc = main(["check", "--config", CFG, "--scenario", scenario, "--model", model])
    assert rc == expected, f"check {scenario}/{model} -> {rc}, want {expected}"


def test_unknown_scenario_is_an_error(capsys):
    rc = main(["check", "--config", CFG, "--scenario", "nope", "--model", "dct-owc"])
    assert rc == 1
    assert "unknown scenario" in capsys.readouterr().err


def test_usage_error_exits_1():
    with pytest.raises(SystemExit) as exc:
        main(["check", "--config", CFG, "--scenario", "scenario1", "--model", "warp-drive"])
    assert exc.value.code == 1


def test_no_command_prints_help(capsys):
    assert main([]) == 1
    assert "simulate" in capsys.readouterr().out


def test_missing_config_file(capsys):
    rc = main(["check", "--config", "/no/such.yaml", "--scenario", "s", "--model", "dct-owc"])
    assert rc == 1
    assert "cannot read config" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# check output
# ---------------------------------------------------------------------------


def test_check_verdict_text(capsys):
    main(["check", "--config", CFG, "--scenario", "scenario1", "--model", "dct-owc"])
    out = capsys.readouterr().out
    assert "infeasible" in out and "binding limit: power" in out


def test_check_json_payload_is_sorted_and_roundtrips(capsys):
    rc = main(
        [
            "check",
            "--config",
            CFG,
            "--scenario",
            "scenario1",
            "--model",
            "dct-friction",
            "--machine-readable",
        ]
    )
    out = capsys.readouterr().out
    payload = json.loads(out)
    assert rc == 0
    assert out == json.dumps(payload, indent=2, sort_keys=True) + "\n"
    assert payload["command"] == "check"
    assert payload["report"]["verdict"] == "feasible"


def test_check_transfer_time_override(capsys):
    rc = main(
        [
            "check",
            "--config",
            CFG,
            "--scenario",
            "scenario1",
            "--model",
            "dct-owc",
            "--transfer-time",
            "0.3",
            "--machine-readable",
        ]
    )
    assert rc == 2
    payload = json.loads(capsys.readouterr().out)
    assert payload["report"]["quantities"]["handover_power"] == 305079.80506447185


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def test_simulate_writes_trajectory_csv(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    rc = main(
        [
            "simulate",
            "--config",
            CFG,
            "--scenario",
            "scenario1",
            "--model",
            "dct-friction",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    # 0.05 lead-in + 0.40 margin build + 0.25 + 0.35 phases + 0.05 tail on a
    # 1 ms grid, endpoints included
    assert len(lines) == 1 + 1101
    assert all(line.count(",") == 9 for line in lines)
    assert "wrote" in capsys.readouterr().out


def test_simulate_is_byte_identical_across_runs(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        rc = main(
            [
                "simulate",
                "--config",
                CFG,
                "--scenario",
                "scenario2",
                "--model",
                "dbt-full",
                "--out",
                str(p),
            ]
        )
        assert rc == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_simulate_dbt_full_upshift_reports_not_simulated(capsys):
    # the coupled model cannot build a workable margin for this scenario;
    # the check's verdict is surfaced instead of a broken trajectory
    rc = main(
        [
            "simulate",
            "--config",
            CFG,
            "--scenario",
            "scenario1",
            "--model",
            "dbt-full",
            "--machine-readable",
        ]
    )
    assert rc == 2
    payload = json.loads(capsys.readouterr().out)
    assert payload["result"] == "not-simulated"
    assert payload["margin_check"]["verdict"] == "infeasible"


def test_simulate_owc_flags_exit_2_but_still_writes(tmp_path, capsys):
    out = tmp_path / "owc.csv"
    rc = main(
        [
            "simulate",
            "--config",
            CFG,
            "--scenario",
            "scenario1",
            "--model",
            "dct-owc",
            "--out",
            str(out),
        ]
    )
    assert rc == 2
    assert out.exists()
    text = capsys.readouterr().out
    assert "limits violated" in text and "flag power" in text


def test_simulate_dm_override(capsys):
    rc = main(
        [
            "simulate",
            "--config",
            CFG,
            "--scenario",
            "scenario1",
            "--model",
            "dct-friction",
            "--dm",
            "60",
            "--machine-readable",
        ]
    )
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["summary"]["speed_margin"] == 60.0
    assert "margin_check" not in payload  # explicit margin skips the derivation


def test_simulate_unreachable_margin(capsys):
    rc = main(
        [
            "simulate",
            "--config",
            CFG,
            "--scenario",
            "scenario1",
            "--model",
            "dct-friction",
            "--dm",
            "85",
            "--machine-readable",
        ]
    )
    assert rc == 2
    payload = json.loads(capsys.readouterr().out)
    assert payload["result"] == "infeasible"
    assert "reason" in payload


def test_simulate_derives_margin_when_omitted(capsys):
    rc = main(
        [
            "simulate",
            "--config",
            CFG,
            "--scenario",
            "scenario1",
            "--model",
            "dct-friction",
            "--machine-readable",
        ]
    )
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["margin_check"]["verdict"] == "feasible"
    assert payload["summary"]["speed_margin"] == payload["margin_check"]["quantities"]["dm_min"]


def test_simulate_braking_owc_infeasible(capsys):
    rc = main(
        ["simulate", "--config", CFG, "--scenario", "scenario3", "--model", "dct-owc"]
    )
    assert rc == 2
    assert "infeasible" in capsys.readouterr().out


def test_simulate_plot_writes_svg(tmp_path):
    svg = tmp_path / "traj.svg"
    rc = main(
        [
            "simulate",
            "--config",
            CFG,
            "--scenario",
            "scenario2",
            "--model",
            "dct-friction",
            "--plot",
            str(svg),
        ]
    )
    assert rc == 0
    assert svg.exists() and b"<svg" in svg.read_bytes()


# ---------------------------------------------------------------------------
# size-motor
# ---------------------------------------------------------------------------


def test_size_motor_passes_via_two_speed_set(capsys):
    rc = main(["size-motor", "--config", CFG, "--machine-readable"])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    single, two_speed = payload["reports"]
    assert single["ratios"] == [7.5] and not single["overall_pass"]
    assert single["required_torque"] == 680.1312697509067
    assert two_speed["ratios"] == [12.0, 6.0] and two_speed["overall_pass"]
    assert two_speed["required_torque"] == 425.08204359431664


def test_size_motor_ratio_override_exit_codes():
    assert main(["size-motor", "--config", CFG, "--ratios", "7.5"]) == 2
    assert main(["size-motor", "--config", CFG, "--ratios", "12,6"]) == 0


@pytest.mark.parametrize("bad", ["bogus", "-3", ""])
def test_size_motor_bad_ratios(bad, capsys):
    rc = main(["size-motor", "--config", CFG, "--ratios", bad])
    assert rc == 1
    assert "--ratios" in capsys.readouterr().err


def test_size_motor_requires_sizing_section(tmp_path, capsys):
    cfg = tmp_path / "nosizing.yaml"
    cfg.write_text(NO_SIZING)
    rc = main(["size-motor", "--config", str(cfg)])
    assert rc == 1
    assert "sizing" in capsys.readouterr().err


def test_envelope_out_needs_single_ratio_set(tmp_path, capsys):
    rc = main(
        ["size-motor", "--config", CFG, "--envelope-out", str(tmp_path / "env.csv")]
    )
    assert rc == 1
    assert "--ratios" in capsys.readouterr().err


def test_envelope_csv_contents(tmp_path):
    out = tmp_path / "env.csv"
    rc = main(
        ["size-motor", "--config", CFG, "--ratios", "12,6", "--envelope-out", str(out)]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "v_kmh,wheel_torque_Nm,limiting_factor"
    assert len(lines) == 1 + 141  # 0..140 km/h at 1 km/h
    assert "20.0,5400.0,torque" in lines
    assert any(line.endswith(",power") for line in lines)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def test_sweep_margin_rows(tmp_path):
    out = tmp_path / "dm.csv"
    rc = main(
        [
            "sweep",
            "--config",
            CFG,
            "--scenario",
            "scenario1",
            "--model",
            "dct-friction",
            "--param",
            "delta_m",
            "--from",
            "40",
            "--to",
            "85",
            "--steps",
            "4",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "delta_m,status,residual_slip,peak_motor_speed,flag_codes"
    rows = [line.split(",") for line in lines[1:]]
    assert [r[0] for r in rows] == ["40.0", "55.0", "70.0", "85.0"]
    assert rows[0][1] == "flagged" and "torque-reversal" in rows[0][4]
    assert rows[1][1] == "ok" and rows[2][1] == "ok"
    assert rows[3][1] == "margin-unreachable-speed"
    assert rows[3][2] == "" and rows[3][3] == ""  # blank cells, not placeholders
    # residual slip after the handover grows with the pre-built margin
    assert float(rows[1][2]) < float(rows[2][2])


def test_sweep_check_rows_to_stdout(capsys):
    rc = main(
        [
            "sweep",
            "--config",
            CFG,
            "--scenario",
            "scenario2",
            "--model",
            "dct-friction",
            "--param",
            "scenario.acceleration",
            "--from",
            "0.2",
            "--to",
            "1.4",
            "--steps",
            "7",
        ]
    )
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    header = lines[0].split(",")
    assert header[:4] == ["scenario.acceleration", "verdict", "binding_limit", "margin"]
    assert "sync_time" in header
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 7
    verdicts = [r[1] for r in rows]
    assert verdicts[:6] == ["feasible"] * 6 and verdicts[6] == "infeasible"
    col = header.index("sync_time")
    times = [float(r[col]) for r in rows[:6]]
    assert times == sorted(times) and times[0] < times[-1], f"sync times {times}"


@pytest.mark.parametrize(
    "extra",
    [
        ["--param", "delta_m", "--from", "40", "--to", "80", "--steps", "1"],
        ["--param", "delta_m", "--from", "40", "--to", "40", "--steps", "3"],
        ["--param", "nosuch.field", "--from", "0", "--to", "1", "--steps", "2"],
        ["--param", "scenario.bogus", "--from", "0", "--to", "1", "--steps", "2"],
    ],
)
def test_sweep_validation_errors(extra, capsys):
    rc = main(
        ["sweep", "--config", CFG, "--scenario", "scenario1", "--model", "dct-friction"]
        + extra
    )
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_sweep_delta_m_needs_friction_upshift(capsys):
    rc = main(
        [
            "sweep",
            "--config",
            CFG,
            "--scenario",
            "scenario2",
            "--model",
            "dct-friction",
            "--param",
            "delta_m",
            "--from",
            "40",
            "--to",
            "80",
            "--steps",
            "2",
        ]
    )
    assert rc == 1
    assert "delta_m sweeps need" in capsys.readouterr().err
