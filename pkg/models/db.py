import json
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

logger = logging.getLogger(__name__)

COLUMNS = ("kind", "r", "s", "b", "b_prime", "lambda", "sample_id", "lhs", "rhs", "ratio")


def jsonable(value):
    """Plain JSON types: fractions as "p/q" text, numpy scalars unwrapped, dict keys as text."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


@dataclass
class RunRecord:
    """Rows of one run. Append-only: rows and summaries are added, never rewritten."""

    kind: str
    config_hash: str
    config: str = ""
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    rows: list = field(default_factory=list)
    summaries: list = field(default_factory=list)
    partial: bool = False
    sink: object = field(default=None, repr=False, compare=False)

    @property
    def name(self):
        return f"{self.kind.lower()}-{self.config_hash[:10]}"

    @property
    def summary(self):
        merged = {}
        for entry in self.summaries:
            merged.update(entry)
        return merged

    def add_row(self, row):
        row = jsonable(dict(row))
        self.rows.append(row)
        if self.sink is not None:
            self.sink({"type": "row", **row})

    def add_summary(self, summary):
        summary = jsonable(dict(summary))
        self.summaries.append(summary)
        if self.sink is not None:
            self.sink({"type": "summary", **summary})

    def header(self):
        return {"type": "record", "kind": self.kind, "config_hash": self.config_hash,
                "timestamp": self.timestamp, "config": self.config}


def make_row(kind, r, s, b, b_prime, lam, sample_id, lhs, rhs, ratio, **extra):
    row = dict(zip(COLUMNS, (kind, r, s, b, b_prime, lam, sample_id, lhs, rhs, ratio)))
    row.update(extra)
    return row


class RecordStore:
    """Line-delimited JSON file of run records; one object per line."""

    def __init__(self, path):
        self.path = path

    @contextmanager
    def get_connection(self, mode='a'):
        handle = open(self.path, mode, encoding='utf-8')
        try:
            yield handle
        finally:
            handle.close()

    @staticmethod
    def _write(handle, entry):
        handle.write(json.dumps(entry, sort_keys=True, allow_nan=True) + "\n")
        handle.flush()

    def append(self, record):
        with self.get_connection() as handle:
            self._write(handle, record.header())
            for row in record.rows:
                self._write(handle, {"type": "row", **row})
            for summary in record.summaries:
                self._write(handle, {"type": "summary", **summary})

    @contextmanager
    def recording(self, record):
        """Stream rows to the store while the run is in progress; an error leaves a partial marker."""
        with self.get_connection() as handle:
            self._write(handle, record.header())
            record.sink = lambda entry: self._write(handle, entry)
            try:
                yield record
            except BaseException as error:
                record.partial = True
                self._write(handle, {"type": "partial", "error": f"{type(error).__name__}: {error}"})
                logger.warning("run %s interrupted, partial marker written", record.name)
                raise
            finally:
                record.sink = None

    def read(self):
        records = []
        with self.get_connection('r') as handle:
            for line in handle:
                if not line.strip():
                    continue
                entry = json.loads(line)
                kind = entry.pop("type")
                if kind == "record":
                    records.append(RunRecord(entry["kind"], entry["config_hash"], entry["config"], entry["timestamp"]))
                elif kind == "row":
                    records[-1].rows.append(entry)
                elif kind == "summary":
                    records[-1].summaries.append(entry)
                elif kind == "partial":
                    records[-1].partial = True
        return records


def recompute_ratio(row):
    """lhs / rhs with the conventions of the probes (0/0 = 0)."""
    lhs, rhs = row["lhs"], row["rhs"]
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return lhs / rhs
