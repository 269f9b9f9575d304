import math
from pathlib import Path

import pytest
import yaml
from hypothesis import given, settings, strategies as st

from nvdicke import config as conf
from nvdicke.cli import main
from nvdicke.model import ParameterError
from nvdicke.report import SUMMARY_COLUMNS, SWEEP_COLUMNS, fmt

GOLDEN = Path(__file__).parent / "golden"


def run_cli(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def fields(line):
    return dict(kv.split("=", 1) for kv in line.split())


def test_d31_run_writes_outputs(tmp_path, capsys):
    code, out, _ = run_cli(["run", "--scenario", "d31", "--preset", "paper", "--out", str(tmp_path)], capsys)
    assert code == 0
    summary = fields(out.splitlines()[0])
    assert float(summary["final_fidelity"]) >= 0.999
    assert float(summary["gate_time"]) == pytest.approx(1.889e-6, abs=1e-9)
    for name in ("summary.csv", "trajectory.csv", "summary.gnuplot-dat", "trajectory.gnuplot-dat", "populations.png"):
        assert (tmp_path / name).stat().st_size > 0
    assert not list(tmp_path.glob(".tmp-*"))


def test_golden_headers(tmp_path, capsys):
    run_cli(["run", "--scenario", "d31", "--preset", "paper", "--out", str(tmp_path), "--no-plot"], capsys)
    for produced, golden in (("summary.csv", "summary_header.csv"), ("trajectory.csv", "trajectory_d31_header.csv")):
        head = (tmp_path / produced).read_text().splitlines()[:2]
        assert head == (GOLDEN / golden).read_text().splitlines()
    assert (GOLDEN / "summary_header.csv").read_text().splitlines()[1].split(",") == list(SUMMARY_COLUMNS)
    assert (GOLDEN / "sweep_header.csv").read_text().splitlines()[1].split(",") == list(SWEEP_COLUMNS)
    dat = (tmp_path / "trajectory.gnuplot-dat").read_text().splitlines()
    assert dat[0] == "# nvdicke trajectory v1"
    assert dat[3] == "# time population_0 population_1 fidelity n_phonon leakage"


def test_bad_lambda_exits_2(capsys):
    code, _, err = run_cli(["run", "--scenario", "d31", "--lambda", "-1"], capsys)
    assert code == 2
    assert "key=lambda" in err and len(err.strip().splitlines()) == 1


@pytest.mark.parametrize("doc, key", [
    ({"scenario": "d31", "params": {"lamda": 1.0}}, "params.lamda"),
    ({"scenario": "d31", "bogus": 1}, "bogus"),
    ({"scenario": "d31", "integrator": {"relative_tolerance": 0.5}}, "integrator.relative_tolerance"),
    ({"scenario": "d31", "schedule": {"kind": "square"}}, "schedule.duration"),
    ({"scenario": "d31", "schedule": {"duration": 1e-6, "delta_constant": 2e7}}, "schedule"),
    ({"scenario": "heating", "sweep": {"values": [1e5, 1e4, 1e6]}}, "sweep.values"),
    ({"scenario": "coupling", "sweep": {"parameter": "quality_factor", "values": [1.0]}}, "sweep.parameter"),
    ({"scenario": "d31", "workers": 0}, "workers"),
    ({"scenario": "d31", "params": {"n_spins": 2.5}}, "n_spins"),
    ({"scenario": "nope"}, "scenario"),
])
def test_config_errors_name_key(tmp_path, capsys, doc, key):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(doc))
    with pytest.raises(ParameterError) as err:
        conf.parse_config(doc)
    assert err.value.key == key
    code, _, msg = run_cli(["sweep" if doc["scenario"] in ("heating", "coupling") else "run", "--config", str(path)], capsys)
    assert code == 2 and f"key={key}" in msg


def test_run_rejects_sweep_name(capsys):
    code, _, err = run_cli(["run", "--scenario", "heating"], capsys)
    assert code == 2 and "key=scenario" in err


def test_numerical_failure_exits_3(tmp_path, capsys):
    path = tmp_path / "tight.yaml"
    path.write_text("scenario: d31\nintegrator:\n  relative_tolerance: 1.0e-15\n  max_refinements: 1\n")
    code, _, err = run_cli(["run", "--config", str(path), "--out", str(tmp_path / "o")], capsys)
    assert code == 3
    f = fields(err.split(" message=")[0].removeprefix("error: numerical "))
    assert f["scenario"] == "d31" and float(f["time"]) == pytest.approx(1.889e-6, abs=1e-9)


def test_flags_beat_file_beat_preset(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("scenario: d31\nparams:\n  lambda: 1.0e+6\n  quality_factor: 5.0e+4\n")
    from nvdicke.cli import build_parser, resolve_config

    args = build_parser().parse_args(["run", "--preset", "paper", "--config", str(path), "--lambda", "2e6"])
    cfg = resolve_config(args)
    assert cfg.params.lambda_base == 2e6
    assert cfg.params.quality_factor == 5e4
    assert cfg.params.nu == 14.87e6


def test_output_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(conf.OUTPUT_ENV, str(tmp_path / "env"))
    assert conf.parse_config({"scenario": "d31"}).resolved_output_dir() == str(tmp_path / "env")
    assert conf.parse_config({"scenario": "d31", "output_dir": "x"}).resolved_output_dir() == "x"


def test_echo_roundtrip_is_bitwise_identical(tmp_path, capsys):
    base = ["--scenario", "d32-resonant", "--preset", "paper", "--lambda", "1.1e6", "--no-plot"]
    code, echoed, _ = run_cli(["run", *base, "--echo-config"], capsys)
    assert code == 0
    cfg_path = tmp_path / "echo.yaml"
    cfg_path.write_text(echoed)
    run_cli(["run", *base, "--out", str(tmp_path / "a")], capsys)
    run_cli(["run", "--config", str(cfg_path), "--out", str(tmp_path / "b")], capsys)
    run_cli(["run", "--config", str(cfg_path), "--out", str(tmp_path / "c")], capsys)
    for name in ("summary.csv", "trajectory.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()


finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=60)
@given(
    st.floats(1e6, 1e8), st.floats(0, 5e6), st.floats(0, 0.3), st.floats(1e2, 1e9) | st.just(math.inf),
    st.floats(0, 1e-3), st.integers(1, 5), st.floats(1e-8, 1e-4), st.floats(-9e5, 9e5),
)
def test_config_echo_roundtrip(nu, lam, err, q, temp, n, duration, delta):
    raw = {
        "scenario": "d32-adiabatic",
        "params": {"nu": nu, "lambda": lam, "coupling_error": err / max(n, 1), "quality_factor": q,
                   "temperature": temp, "n_spins": n},
        "schedule": {"kind": "linear_chirp", "duration": duration, "delta_start": -delta, "delta_end": delta},
        "integrator": {"relative_tolerance": 1e-9, "sample_stride": 3},
    }
    cfg = conf.parse_config(raw)
    assert conf.parse_config(yaml.safe_load(conf.dump_config(cfg))) == cfg


def test_sweep_cli(tmp_path, capsys):
    code, out, _ = run_cli(
        ["sweep", "--scenario", "coupling", "--delta", "0,0.01", "--preset", "paper", "--out", str(tmp_path)], capsys
    )
    assert code == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[:2] == (GOLDEN / "sweep_header.csv").read_text().splitlines()
    assert len(lines) == 4
    assert (tmp_path / "sweep.png").exists() and (tmp_path / "sweep.gnuplot-dat").exists()
    assert float(fields(out.splitlines()[1])["fidelity_d31"]) >= 0.99


def test_validate_and_list(capsys):
    code, out, _ = run_cli(["validate", "--check", "ladder_matches_full_space", "--check", "fock_decay_law"], capsys)
    assert code == 0
    assert out.splitlines()[0].startswith("PASS ladder_matches_full_space")
    assert "2/2 checks passed" in out
    code, out, _ = run_cli(["list"], capsys)
    assert code == 0 and "d32-adiabatic" in out and "heating" in out
    code, _, err = run_cli(["validate", "--check", "nope"], capsys)
    assert code == 2


def test_full_validate_suite(capsys):
    code, out, _ = run_cli(["validate"], capsys)
    assert code == 0, out


def test_float_format():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(3) == "3" and fmt(None) == "" and fmt(True) == "true" and fmt(math.inf) == "inf"
