import csv
import json
import math

import pytest

from peh_impedance.cli import (
    EXIT_CONFIG,
    EXIT_NONCONVERGED,
    EXIT_OK,
    ConfigError,
    main,
    parse_quantity,
)

SMALL_GRIDS = {
    "omega": {"start": {"value": 0.95, "unit": "omega_n"}, "stop": {"value": 1.05, "unit": "omega_n"}, "points": 5},
    "phi": {"start": {"value": -90, "unit": "deg"}, "stop": {"value": 90, "unit": "deg"}, "points": 7},
    "second": {"points": 9},
}


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"schema_version": 1, **doc}))
    return str(path)


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_parse_quantity():
    freq = ("Hz", "rad/s", "omega_n")
    assert parse_quantity("55.8Hz", freq, "omega") == {"value": 55.8, "unit": "Hz"}
    assert parse_quantity("1.02 omega_n", freq, "omega") == {"value": 1.02, "unit": "omega_n"}
    with pytest.raises(ConfigError):
        parse_quantity("12", freq, "omega")
    with pytest.raises(ConfigError):
        parse_quantity("12deg", freq, "omega")


def test_ideal_artifacts(tmp_path):
    assert main(["ideal", "--out", str(tmp_path), "--eta", "0,1,3", "--zeta", "0.01"]) == EXIT_OK
    rows = read_csv(tmp_path / "ideal.csv")
    assert [float(r["beta_r"]) for r in rows] == [0.0, 0.25, 0.1875]
    summary = json.loads((tmp_path / "ideal.json").read_text())
    assert summary["command"] == "ideal"
    assert summary["p_h_max_w"] == pytest.approx(summary["p_m_max_w"] / 4)


def test_waveform_artifacts(tmp_path):
    code = main(["waveform", "--out", str(tmp_path), "--topology", "S-SSHI", "--phi", "0deg", "--second", "0"])
    assert code == EXIT_OK
    rows = read_csv(tmp_path / "waveform.csv")
    assert max(float(r["vp"]) for r in rows) == pytest.approx(5.0)
    z = json.loads((tmp_path / "waveform.json").read_text())["z_normalized"]
    assert z["re"] == pytest.approx(16 / math.pi, rel=1e-8)


def test_region_circle(tmp_path):
    code = main(["region", "--out", str(tmp_path), "--topology", "S-SSHI", "--pv", "--omega", "1omega_n"])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "region.json").read_text())
    c = complex(summary["circle"]["center"]["re"], summary["circle"]["center"]["im"])
    r = summary["circle"]["radius"]
    assert c == pytest.approx(complex(8 / math.pi, -1))
    rows = read_csv(tmp_path / "region.csv")
    worst = 0.0
    for row in rows:
        z = complex(float(row["z_re"]), float(row["z_im"]))
        worst = max(worst, abs(z - c) - r)
    # artifacts carry nine significant digits
    assert worst < 1e-8


def test_sweep_is_byte_deterministic(tmp_path):
    doc = {"system": "weak", "topology": "P-SSHI", "grids": SMALL_GRIDS}
    cfg = write_config(tmp_path, doc)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["sweep", "--config", cfg, "--out", str(b)]) == EXIT_OK
    for name in ("sweep.csv", "sweep.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = read_csv(a / "sweep.csv")
    assert len(rows) == 5 * 7
    assert set(rows[0]) == {"omega_hz", "phi_deg", "second_param", "p_h_mw"}


def test_bandwidth_summary(tmp_path):
    doc = {"system": "strong", "topology": "SECE", "grids": SMALL_GRIDS}
    assert main(["bandwidth", "--config", write_config(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "bandwidth.json").read_text())
    assert "broadening_ratio" in json.dumps(summary)


@pytest.mark.parametrize("doc", [
    {"system": "medium"},
    {"topology": "SSHC"},
    {"grids": {"omega": {"start": {"value": 1, "unit": "furlong"}}}},
    {"colour": "blue"},
    {"schema_version": 99},
    {"oracle": {"max_cycles": "many"}},
])
def test_schema_errors_exit_2(tmp_path, doc, capsys):
    assert main(["sweep", "--config", write_config(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_missing_schema_version_exit_2(tmp_path):
    path = tmp_path / "bare.json"
    path.write_text(json.dumps({"system": "weak"}))
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_cli_quantity_exit_2(tmp_path):
    assert main(["waveform", "--out", str(tmp_path), "--phi", "30"]) == EXIT_CONFIG


def test_oracle_nonconvergence_exit_3(tmp_path, capsys):
    doc = {"system": "weak", "topology": "SECE", "oracle": {"max_cycles": 10}}
    code = main(["oracle", "--config", write_config(tmp_path, doc), "--out", str(tmp_path), "--phi", "0deg"])
    assert code == EXIT_NONCONVERGED
    assert (tmp_path / "oracle.json").exists()
    assert "converge" in capsys.readouterr().err


def test_oracle_converged_run(tmp_path):
    doc = {"system": "weak", "topology": "SEH", "oracle": {"initial": "open_circuit"}}
    code = main(["oracle", "--config", write_config(tmp_path, doc), "--out", str(tmp_path), "--second", "0.5"])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "oracle.json").read_text())
    assert summary["status"] == "converged"
    rows = read_csv(tmp_path / "oracle.csv")
    assert set(rows[0]) == {"t", "x", "xdot", "vp", "vr"}
