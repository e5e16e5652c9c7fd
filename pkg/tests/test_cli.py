import glob
import os

import pytest

import run
from models.db import RecordStore

HOMOG = ["--set", "r=2", "--set", "s=1/4", "--set", "b=11/20", "--set", "count=2"]

SOLVE = """
[experiment]
kind = solve
seed = 0

[solve]
delta = 1/8
amplitude = 1/10
n_times_per_unit = 200
"""


def test_verify_writes_a_report(tmp_path, capsys):
    assert run.main(["verify", "HOMOG_5", *HOMOG, "--out", str(tmp_path)]) == 0
    path = capsys.readouterr().out.strip()
    assert path.endswith(".csv")
    assert os.path.isfile(path)
    (records,) = glob.glob(str(tmp_path / "*" / "records.jsonl"))
    (record,) = RecordStore(records).read()
    assert record.kind == "HOMOG_5"
    assert len(record.rows) == 2


def test_same_seed_gives_identical_csv(tmp_path, capsys):
    paths = []
    for name in ("first", "second"):
        assert run.main(["verify", "HOMOG_5", *HOMOG, "--seed", "7", "--out", str(tmp_path / name)]) == 0
        paths.append(capsys.readouterr().out.strip())
    with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
        assert a.read() == b.read()


def test_violated_hypothesis_exits_with_one(tmp_path):
    code = run.main(["verify", "TRILINEAR_T2", "--set", "r=1.2", "--set", "s=1/2", "--set", "b=9/10",
                     "--out", str(tmp_path)])
    assert code == 1
    assert not os.listdir(tmp_path)


def test_bad_assignment_exits_with_one(tmp_path):
    assert run.main(["verify", "HOMOG_5", "--set", "r", "--out", str(tmp_path)]) == 1


def test_missing_config_file_exits_with_three(tmp_path):
    assert run.main(["solve", "--config", str(tmp_path / "absent.ini")]) == 3


def test_solve_needs_a_config(tmp_path):
    assert run.main(["solve", "--out", str(tmp_path)]) == 1


def test_solve_and_report(tmp_path, capsys):
    config = tmp_path / "solve.ini"
    config.write_text(SOLVE)
    out = tmp_path / "runs"
    assert run.main(["solve", "--config", str(config), "--out", str(out), "--format", "table"]) == 0
    table = capsys.readouterr().out.strip()
    assert "converged: true" in open(table, encoding="utf-8").read()

    (records,) = glob.glob(str(out / "*" / "records.jsonl"))
    assert run.main(["report", records, "--format", "svg", "--out", str(tmp_path / "figures")]) == 0
    (figure,) = glob.glob(str(tmp_path / "figures" / "*.svg"))
    assert open(figure, encoding="utf-8").read().lstrip().startswith("<?xml")


def test_report_on_missing_records_exits_with_three(tmp_path):
    assert run.main(["report", str(tmp_path / "records.jsonl")]) == 3


def test_unknown_estimate_is_an_argument_error():
    with pytest.raises(SystemExit):
        run.main(["verify", "NOT_AN_ESTIMATE"])
