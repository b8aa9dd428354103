import csv
import io
import json
import math
import subprocess
import sys

import pytest

from cvcoherent.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_teleport_json(capsys):
    code, out, err = run_cli(capsys, "teleport", "--r", "1", "--rc", "1", "--in", "3,-2", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["fidelity"] == pytest.approx(2 / (2 + 1.5 * math.exp(-2)), abs=1e-12)
    assert data["role_map"]["teleported"] == 4
    assert "fidelity" in err


def test_degrade_csv(capsys):
    code, out, _ = run_cli(capsys, "degrade", "--eps", "0.1,0.1,0.1", "--depth", "10", "--format", "csv")
    assert code == 0
    first, rest = out.split("\n", 1)
    assert first == "# cvcoherent-degradation-trace v1 max_depth=3"
    rows = list(csv.DictReader(io.StringIO(rest)))
    assert len(rows) == 10
    assert [r["conforming"] for r in rows[:4]] == ["1", "1", "1", "0"]


def test_verify_conat_rc0(capsys):
    code, out, _ = run_cli(capsys, "verify-conat", "--rc", "0")
    rep = json.loads(out)["reports"][0]
    assert code == 0
    assert rep["achieved_epsilon"] == pytest.approx(0.5)
    assert rep["conforming"] is True


def test_verify_conat_both(capsys):
    code, out, _ = run_cli(capsys, "verify-conat", "--rc", "1", "--kind", "both", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["kind"] for r in rows] == ["PQ", "MQ"]


def test_other_protocols_run(capsys):
    for argv in (["alt-teleport"], ["superdense"], ["compose", "--variant", "1"], ["compose", "--variant", "2"]):
        code, out, _ = run_cli(capsys, *argv)
        assert code == 0
        assert json.loads(out)["protocol"]


def test_unknown_subcommand_exit_2():
    proc = subprocess.run([sys.executable, "-m", "cvcoherent", "bogus"], capture_output=True)
    assert proc.returncode == 2


def test_invalid_config_exit_2(capsys, tmp_path):
    assert run_cli(capsys, "teleport", "--r", "-1")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert run_cli(capsys, "teleport", "--config", str(bad))[0] == 2
    assert run_cli(capsys, "teleport", "--config", str(tmp_path / "missing.json"))[0] == 2
    bad.write_text("[1, 2]")
    assert run_cli(capsys, "teleport", "--config", str(bad))[0] == 2
    assert run_cli(capsys, "teleport", "--in", "1,2,3")[0] == 2


def test_physics_violation_exit_3(capsys):
    # an absurdly tight oracle tolerance is reported as an engine/oracle disagreement
    code, _, err = run_cli(capsys, "verify", "--samples", "2000", "--sigmas", "0.01")
    assert code == 3
    assert "physics invariant violated" in err


def test_strict_exit_4(capsys):
    assert run_cli(capsys, "superdense", "--r", "0", "--strict")[0] == 4
    assert run_cli(capsys, "superdense", "--r", "0")[0] == 0
    assert run_cli(capsys, "degrade", "--depth", "5", "--strict")[0] == 4
    assert run_cli(capsys, "superdense", "--r", "1", "--strict")[0] == 0


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"r": 0.5, "rc": 2.0}))
    _, out, _ = run_cli(capsys, "teleport", "--config", str(cfg))
    led = json.loads(out)["noise_ledger"]
    assert led["eps1"] == pytest.approx(math.exp(-1))
    assert led["eps2"] == pytest.approx(math.exp(-4) / 2)
    _, out, _ = run_cli(capsys, "teleport", "--config", str(cfg), "--r", "1")
    led = json.loads(out)["noise_ledger"]
    assert led["eps1"] == pytest.approx(math.exp(-2))
    assert led["eps2"] == pytest.approx(math.exp(-4) / 2)


@pytest.mark.parametrize(
    "argv",
    [
        ["baseline", "--r", "1", "--trials", "5000", "--seed", "3"],
        ["verify", "--samples", "5000", "--seed", "9"],
        ["sweep", "--format", "csv", "--workers", "2"],
        ["degrade", "--format", "csv"],
    ],
)
def test_byte_identical_outputs(capsys, tmp_path, argv):
    a, b = tmp_path / "a.out", tmp_path / "b.out"
    assert run_cli(capsys, *argv, "--out", str(a))[0] == 0
    code, out, _ = run_cli(capsys, *argv, "--out", str(b))
    assert code == 0
    assert a.read_bytes() == b.read_bytes()
    assert out  # summary goes to stdout when --out is set


def test_sweep_monotone_and_ordered(capsys):
    grid = "0,0.25,0.5,1,1.5,2,3"
    _, serial, _ = run_cli(capsys, "sweep", "--r-grid", grid, "--rc-grid", "0,1", "--format", "csv")
    _, parallel, _ = run_cli(capsys, "sweep", "--r-grid", grid, "--rc-grid", "0,1", "--format", "csv", "--workers", "3")
    assert serial == parallel
    first, rest = serial.split("\n", 1)
    assert first == "# cvcoherent-sweep v1"
    rows = list(csv.DictReader(io.StringIO(rest)))
    assert [int(r["index"]) for r in rows] == list(range(len(rows)))
    for rc in ("0.0", "1.0"):
        fids = [float(r["fidelity"]) for r in rows if r["rc"] == rc]
        assert len(fids) == 7
        assert all(a <= b for a, b in zip(fids, fids[1:]))


def test_baseline_output(capsys):
    code, out, _ = run_cli(capsys, "baseline", "--r", "0", "--trials", "20000", "--seed", "1")
    data = json.loads(out)
    assert code == 0
    assert abs(data["average_fidelity"] - 0.5) < 5 * data["standard_error"]
    assert data["rng"] == "PCG64"
