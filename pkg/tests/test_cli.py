import csv
import json
import subprocess
import sys

import pytest

from msavg.cli import main

_TINY_CONFIG = """
[sweep]
epsilons = [0.2, 0.1]
n_paths = 100
eta_osc = 10.0

[output]
seed = 3
"""


def _write_config(tmp_path, text=_TINY_CONFIG):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_example71_writes_all_artifacts(tmp_path, capsys):
    cfg = _write_config(tmp_path)
    out = tmp_path / "out"
    status = main(["example71", "--config", str(cfg), "--out", str(out)])
    assert status == 0
    for name in ("rate_forward.csv", "converge_backward.csv", "homogenize.csv",
                 "kappa.csv", "manifest.json"):
        assert (out / name).exists(), name
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "example71"
    assert manifest["seed"] == 3
    assert "kappa_bound" in manifest["verdicts"]
    assert "sweep.gamma" in manifest["defaults_applied"]
    assert manifest["outputs"] == sorted(
        ["rate_forward.csv", "converge_backward.csv", "homogenize.csv", "kappa.csv"]
    )
    captured = capsys.readouterr()
    assert "example71: PASS" in captured.out


def test_avg_verify_time_constant(tmp_path):
    cfg = _write_config(tmp_path, '[scenario]\nname = "gbm"\n' + _TINY_CONFIG)
    out = tmp_path / "out"
    status = main(["avg-verify", "--config", str(cfg), "--out", str(out)])
    assert status == 0
    rows = _read_rows(out / "kappa.csv")
    assert rows[0] == ["kind", "T_hat", "kappa_hat", "argmax_probe"]
    # time-constant coefficients: every kappa_hat is at the rounding floor
    assert all(float(r[2]) <= 1e-30 for r in rows[1:])


def test_rate_sweep_single_epsilon_slope_null(tmp_path):
    cfg = _write_config(
        tmp_path, "[sweep]\nepsilons = [0.1]\nn_paths = 50\neta_osc = 10.0\n"
    )
    out = tmp_path / "out"
    status = main(["rate-sweep", "--config", str(cfg), "--out", str(out)])
    assert status == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["verdicts"]["slope"] is None


def test_config_error_exit_2_with_json_stderr(tmp_path, capsys):
    cfg = _write_config(tmp_path, "[sweep]\nmomentum = 0.9\n")
    status = main(["rate-sweep", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert status == 2
    err = json.loads(capsys.readouterr().err)
    assert err["code"] == 2
    assert "momentum" in err["message"]
    assert err["location"] == "[sweep]"


def test_solve_bsvi_artifacts(tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "out"
    status = main(["solve-bsvi", "--config", str(cfg), "--out", str(out)])
    assert status == 0
    rows = _read_rows(out / "bsvi_solution.csv")
    assert rows[0] == ["run_id", "path", "step", "t", "Y0", "Z0_0", "dK0"]
    # 100 paths * 100 steps of data rows
    assert len(rows) == 1 + 100 * 100
    diag = json.loads((out / "bsvi_diagnostics.json").read_text())
    assert len(diag["condition_numbers"]) == 100


def test_csv_floats_round_trip(tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "out"
    main(["simulate-forward", "--config", str(cfg), "--out", str(out)])
    rows = _read_rows(out / "forward_paths.csv")
    # repr-formatted floats must parse back to the identical double
    for row in rows[1:50]:
        v = float(row[5])
        assert repr(v) == row[5]


def test_reruns_byte_identical_and_thread_invariant(tmp_path):
    cfg = _write_config(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["rate-sweep", "--config", str(cfg), "--out", str(out1),
                 "--threads", "1"]) == 0
    assert main(["rate-sweep", "--config", str(cfg), "--out", str(out2),
                 "--threads", "8"]) == 0
    assert (out1 / "rate_forward.csv").read_bytes() == (out2 / "rate_forward.csv").read_bytes()


def test_seed_override_changes_results(tmp_path):
    cfg = _write_config(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["rate-sweep", "--config", str(cfg), "--out", str(out1)])
    main(["rate-sweep", "--config", str(cfg), "--out", str(out2), "--seed", "99"])
    assert (out1 / "rate_forward.csv").read_bytes() != (out2 / "rate_forward.csv").read_bytes()
    manifest = json.loads((out2 / "manifest.json").read_text())
    assert manifest["seed"] == 99


def test_console_entry_point(tmp_path):
    cfg = _write_config(tmp_path)
    proc = subprocess.run(
        [sys.executable, "-m", "msavg.cli", "avg-verify",
         "--config", str(cfg), "--out", str(tmp_path / "out")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "avg-verify: PASS" in proc.stdout


def test_unknown_subcommand_rejected_by_parser(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
