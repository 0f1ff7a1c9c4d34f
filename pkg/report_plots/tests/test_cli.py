import csv
import json
import subprocess
import sys

import pytest

from report_plots.cli import main

_SWEEP_HEADER = ["epsilon", "error", "ci_low", "ci_high", "n_steps", "predicted"]
_SWEEP_ROWS = [
    [0.2, 0.09, 0.08, 0.10, 400, 0.095],
    [0.1, 0.05, 0.045, 0.055, 400, 0.052],
    [0.05, 0.028, 0.025, 0.031, 400, 0.027],
]


@pytest.fixture
def sweep_csv(tmp_path):
    path = tmp_path / "rate_forward.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SWEEP_HEADER)
        writer.writerows(_SWEEP_ROWS)
    return path


def test_positional_form(sweep_csv, capsys):
    status = main(["plot", str(sweep_csv), "--kind", "rate-loglog"])
    assert status == 0
    assert sweep_csv.with_suffix(".png").is_file()
    assert "rate_forward.csv -> rate_forward.png" in capsys.readouterr().out


def test_positional_form_needs_kind(sweep_csv, capsys):
    status = main(["plot", str(sweep_csv)])
    assert status == 2
    err = json.loads(capsys.readouterr().err)
    assert err["code"] == 2 and "--kind" in err["message"]


def test_spec_file_renders_batch(sweep_csv, tmp_path, capsys):
    spec = tmp_path / "plots.toml"
    spec.write_text(
        '[[plot]]\ninput = "rate_forward.csv"\nkind = "rate-loglog"\n'
        'output = "fig1.png"\ntitle = "forward rate"\n\n'
        '[[plot]]\ninput = "rate_forward.csv"\nkind = "backward-decay"\n'
        'output = "fig2.svg"\n'
    )
    status = main(["plot", "--spec", str(spec)])
    assert status == 0
    assert (tmp_path / "fig1.png").is_file()
    assert (tmp_path / "fig2.svg").is_file()
    assert capsys.readouterr().out.count("->") == 2


def test_spec_file_unknown_key(sweep_csv, tmp_path, capsys):
    spec = tmp_path / "plots.toml"
    spec.write_text('[[plot]]\ninput = "rate_forward.csv"\nkind = "rate-loglog"\ndpi = 300\n')
    status = main(["plot", "--spec", str(spec)])
    assert status == 2
    assert "dpi" in json.loads(capsys.readouterr().err)["message"]


def test_spec_file_missing_required_key(tmp_path, capsys):
    spec = tmp_path / "plots.toml"
    spec.write_text('[[plot]]\nkind = "rate-loglog"\n')
    status = main(["plot", "--spec", str(spec)])
    assert status == 2
    assert "'input'" in json.loads(capsys.readouterr().err)["message"]


def test_spec_and_positional_conflict(sweep_csv, tmp_path, capsys):
    spec = tmp_path / "plots.toml"
    spec.write_text('[[plot]]\ninput = "rate_forward.csv"\nkind = "rate-loglog"\n')
    status = main(["plot", str(sweep_csv), "--spec", str(spec)])
    assert status == 2


def test_schema_error_exit_2_names_column(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("epsilon,error\n0.1,0.05\n")
    status = main(["plot", str(path), "--kind", "rate-loglog"])
    assert status == 2
    err = json.loads(capsys.readouterr().err)
    assert "ci_low" in err["message"]
    assert err["location"] == str(path)


def test_console_entry_point(sweep_csv):
    proc = subprocess.run(
        [sys.executable, "-m", "report_plots.cli", "plot", str(sweep_csv),
         "--kind", "rate-loglog", "--out", str(sweep_csv.parent / "out.png")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (sweep_csv.parent / "out.png").is_file()
