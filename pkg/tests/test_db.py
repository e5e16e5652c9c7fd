import os
import time
from fractions import Fraction

import pandas as pd
import pytest

from models.db import COLUMNS, RecordStore, RunRecord, make_row, recompute_ratio
from models.errors import EmptyRecordError, ParameterError
from models.helper_functions import create_run_id, delete_old_runs, prepare_output_dir, record_path
from models.report import emit_report, slope_label, summary_rows


def dilation_record():
    record = RunRecord("BILINEAR_L3", "0123456789abcdef", "[experiment]\nkind = probe\n")
    for sample_id, (lam, lhs, rhs) in enumerate([(1.0, 0.3, 0.5), (1.0, 0.1, 0.7), (2.0, 0.25, 0.4)]):
        record.add_row(make_row("BILINEAR_L3", Fraction(2), 0, 0, None, lam, sample_id, lhs, rhs, lhs / rhs))
    record.add_summary({"max_ratio": 0.625, "median_ratio": 0.6, "spread": 1.04})
    return record


def delta_record():
    record = RunRecord("LEMMA2_DELTA", "fedcba9876543210")
    deltas = [1.0, 0.5, 0.25, 0.125]
    for sample_id, delta in enumerate(deltas):
        ratio = 0.8 * delta ** 0.35
        record.add_row(make_row("LEMMA2_DELTA", 2, Fraction(1, 4), Fraction(11, 20), Fraction(-2, 5), 1.0,
                                sample_id, ratio, 1.0, ratio, delta=delta))
    record.add_summary({
        "slope": 0.35, "predicted_slope": 0.05,
        "delta_max_ratio": {delta: 0.8 * delta ** 0.35 for delta in deltas},
    })
    return record


def test_rows_are_plain_json():
    row = make_row("HOMOG_5", Fraction(3, 2), Fraction(1, 6), Fraction(7, 10), None, 1.0, 0, 1.0, 1.0, 1.0)
    record = RunRecord("HOMOG_5", "abc")
    record.add_row(row)
    assert record.rows[0]["r"] == "3/2"
    assert record.rows[0]["b_prime"] is None
    assert record.name == "homog_5-abc"


def test_store_round_trip(tmp_path):
    store = RecordStore(str(tmp_path / "records.jsonl"))
    store.append(dilation_record())
    store.append(delta_record())
    first, second = store.read()
    assert first.rows == dilation_record().rows
    assert first.summary["max_ratio"] == 0.625
    assert second.kind == "LEMMA2_DELTA"
    assert not first.partial and not second.partial


def test_store_is_append_only(tmp_path):
    path = tmp_path / "records.jsonl"
    store = RecordStore(str(path))
    store.append(dilation_record())
    before = path.read_text()
    store.append(delta_record())
    assert path.read_text().startswith(before)


def test_interrupted_run_leaves_a_partial_marker(tmp_path):
    store = RecordStore(str(tmp_path / "records.jsonl"))
    record = RunRecord("SOLVE", "0" * 64)
    with pytest.raises(RuntimeError, match="boom"):
        with store.recording(record):
            record.add_row(make_row("SOLVE", 2, 0, 0, 0, None, 0, 1.0, 1.0, 1.0))
            raise RuntimeError("boom")
    assert record.partial
    (stored,) = store.read()
    assert stored.partial
    assert len(stored.rows) == 1


def test_csv_ratios_recompute(tmp_path):
    path = emit_report(dilation_record(), "csv", str(tmp_path))
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    assert list(frame.columns) == list(COLUMNS)
    rows = frame.to_dict("records")
    samples = [row for row in rows if not row["sample_id"].startswith("summary:")]
    assert len(samples) == 3
    for row in samples:
        ratio = recompute_ratio({"lhs": float(row["lhs"]), "rhs": float(row["rhs"])})
        assert float(row["ratio"]) == pytest.approx(ratio, rel=1e-12)
    summary = {row["sample_id"]: row["ratio"] for row in rows if row["sample_id"].startswith("summary:")}
    assert summary["summary:max_ratio"] == "0.625"


def test_csv_is_byte_identical(tmp_path):
    first = emit_report(dilation_record(), "csv", str(tmp_path / "a"))
    second = emit_report(dilation_record(), "csv", str(tmp_path / "b"))
    with open(first, "rb") as a, open(second, "rb") as b:
        assert a.read() == b.read()


def test_svg_slope_matches_the_csv(tmp_path):
    record = delta_record()
    csv_path = emit_report(record, "csv", str(tmp_path))
    svg_path = emit_report(record, "svg", str(tmp_path))
    frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False)
    slope = float(frame.loc[frame["sample_id"] == "summary:slope", "ratio"].iloc[0])
    with open(svg_path, encoding="utf-8") as handle:
        assert slope_label(slope) in handle.read()


def test_svg_is_reproducible(tmp_path):
    first = emit_report(dilation_record(), "svg", str(tmp_path / "a"))
    second = emit_report(dilation_record(), "svg", str(tmp_path / "b"))
    with open(first, "rb") as a, open(second, "rb") as b:
        assert a.read() == b.read()


def test_table_lists_rows_and_summary(tmp_path):
    path = emit_report(dilation_record(), "table", str(tmp_path))
    text = open(path, encoding="utf-8").read()
    assert text.splitlines()[0].split() == ["kind", "r", "s", "b", "b_prime", "lambda", "sample_id", "lhs", "rhs", "ratio"]
    assert "max_ratio: 0.625" in text


def test_empty_record_is_not_reported(tmp_path):
    with pytest.raises(EmptyRecordError):
        emit_report(RunRecord("HOMOG_5", "abc"), "csv", str(tmp_path))
    with pytest.raises(ParameterError):
        emit_report(dilation_record(), "pdf", str(tmp_path))


def test_summary_rows_skip_structures():
    rows = summary_rows(delta_record())
    assert [row["sample_id"] for row in rows] == ["summary:slope", "summary:predicted_slope"]


def test_output_dir(tmp_path):
    run_id = create_run_id("probe", "0123456789abcdef")
    assert run_id == "probe-0123456789"
    run_dir = prepare_output_dir(str(tmp_path), run_id)
    assert os.path.isdir(run_dir)
    assert record_path(run_dir).endswith("records.jsonl")


def test_delete_old_runs(tmp_path):
    for name in ("old", "new"):
        run_dir = prepare_output_dir(str(tmp_path), name)
        RecordStore(record_path(run_dir)).append(dilation_record())
    stale = time.time() - 48 * 3600
    os.utime(record_path(str(tmp_path / "old")), (stale, stale))
    (tmp_path / "notes").mkdir()
    assert delete_old_runs(str(tmp_path), 24) == ["old"]
    assert sorted(os.listdir(tmp_path)) == ["new", "notes"]
