"""
Report emission for run records: aligned text tables, CSV and SVG figures.

CSV floats are written with repr and SVGs with a fixed hash salt and no date,
so the same record always produces the same bytes.
"""
import logging
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .db import COLUMNS  # noqa: E402
from .errors import EmptyRecordError, ParameterError  # noqa: E402

logger = logging.getLogger(__name__)

FORMATS = ("table", "csv", "svg")
SUMMARY_KEYS = ("max_ratio", "median_ratio", "spread", "slope", "predicted_slope", "residual", "converged")

plt.rcParams["svg.hashsalt"] = "mkdv-lab"
plt.rcParams["svg.fonttype"] = "none"


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summary_rows(record):
    """Scalar summary statistics as extra CSV rows; lhs and rhs stay empty."""
    summary = record.summary
    rows = []
    for key in SUMMARY_KEYS:
        value = summary.get(key)
        if value is None or isinstance(value, (dict, list)):
            continue
        rows.append({"kind": record.kind, "sample_id": f"summary:{key}", "ratio": value})
    return rows


def _require_rows(record):
    if not record.rows:
        raise EmptyRecordError(f"record {record.name} has no rows to report")


def write_csv(record, path):
    cells = [[_cell(row.get(column)) for column in COLUMNS] for row in record.rows + summary_rows(record)]
    pd.DataFrame(cells, columns=list(COLUMNS)).to_csv(path, index=False, lineterminator="\n")
    return path


def write_table(record, path):
    body = [[_cell(row.get(column)) for column in COLUMNS] for row in record.rows]
    widths = [max(len(column), *(len(line[i]) for line in body)) for i, column in enumerate(COLUMNS)]
    lines = ["  ".join(column.ljust(width) for column, width in zip(COLUMNS, widths))]
    lines.append("  ".join("-" * width for width in widths))
    lines += ["  ".join(cell.rjust(width) for cell, width in zip(line, widths)) for line in body]
    lines.append("")
    for key, value in sorted(record.summary.items()):
        if not isinstance(value, (dict, list)):
            lines.append(f"{key}: {_cell(value)}")
    if record.partial:
        lines.append("partial: true")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    return path


def slope_label(slope):
    return f"fitted slope = {slope:.6f}"


def _delta_figure(record, axes):
    deltas = np.array([row["delta"] for row in record.rows], dtype=float)
    ratios = np.array([row["ratio"] for row in record.rows], dtype=float)
    axes.loglog(deltas, ratios, "o", markersize=3, label="samples")
    summary = record.summary
    slope, predicted = summary.get("slope"), summary.get("predicted_slope")
    if slope is not None:
        worst = summary.get("delta_max_ratio", {})
        points = sorted((float(d), v) for d, v in worst.items())
        if points:
            x = np.array([p[0] for p in points])
            y = np.array([p[1] for p in points])
            intercept = np.mean(np.log(y) - slope * np.log(x))
            axes.loglog(x, np.exp(intercept) * x ** slope, "-", label="fit")
        text = slope_label(slope)
        if predicted is not None:
            text += f" (predicted {predicted:.6f})"
        axes.annotate(text, xy=(0.05, 0.92), xycoords="axes fraction")
    axes.set_xlabel("delta")
    axes.set_ylabel("norm ratio")


def _dilation_figure(record, axes, key, log_x=True):
    rows = [row for row in record.rows if row.get("ratio") is not None]
    x = np.array([row[key] for row in rows], dtype=float)
    ratios = np.array([row["ratio"] for row in rows], dtype=float)
    positive = ratios > 0
    axes.plot(x[positive], ratios[positive], "o", markersize=3, label="samples")
    levels = sorted(set(x.tolist()))
    worst = [ratios[x == level].max() for level in levels]
    if all(value > 0 for value in worst):
        axes.plot(levels, worst, "-", label="max")
    axes.set_yscale("log")
    if log_x:
        axes.set_xscale("log")
    axes.set_xlabel("dilation" if key == "lambda" else key)
    axes.set_ylabel("lhs / rhs")


def write_svg(record, path):
    figure, axes = plt.subplots(figsize=(6, 4))
    try:
        first = record.rows[0]
        if first.get("delta") is not None:
            _delta_figure(record, axes)
        elif first.get("lambda") is not None:
            _dilation_figure(record, axes, "lambda")
        elif first.get("time") is not None:
            _dilation_figure(record, axes, "time", log_x=False)
        elif first.get("epsilon") is not None:
            _dilation_figure(record, axes, "epsilon")
        else:
            raise ParameterError(f"record {record.name} has no axis to plot against")
        axes.set_title(record.kind)
        axes.legend(loc="lower right")
        figure.tight_layout()
        figure.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(figure)
    return path


_WRITERS = {"table": (write_table, "txt"), "csv": (write_csv, "csv"), "svg": (write_svg, "svg")}


def emit_report(record, fmt, out_dir):
    """Write `record` as table, csv or svg into out_dir and return the file path."""
    if fmt not in _WRITERS:
        raise ParameterError(f"unknown report format {fmt!r}; choose one of {', '.join(FORMATS)}")
    _require_rows(record)
    os.makedirs(out_dir, exist_ok=True)
    writer, extension = _WRITERS[fmt]
    path = writer(record, os.path.join(out_dir, f"{record.name}.{extension}"))
    logger.info("wrote %s", path)
    return path
