"""
records contains the ExperimentRecord class and the writers that persist
experiment output: one JSON object per line in records.jsonl, a flattened CSV
per experiment kind and a JSON run manifest.
"""

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from . import __version__

logger = logging.getLogger("tomofisher")

JSONL_NAME = "records.jsonl"
MANIFEST_NAME = "manifest.json"

STATUS_OK = "ok"
STATUS_NON_IDENTIFIABLE = "non-identifiable"
STATUS_FAILED = "failed"

COLUMNS = [
    "kind",
    "index",
    "n",
    "d",
    "r",
    "state_seed",
    "design_kind",
    "design_k",
    "design_seed",
    "N",
    "m",
    "metric",
    "value",
    "status",
    "aux",
    "cell",
    "version",
    "timestamp",
]


def _clean(value):
    """ Converts numpy scalars and arrays to plain Python and non-finite floats to None. """
    if isinstance(value, dict):
        return {str(key): _clean(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_clean(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def format_float(value):
    """ Formats a float with 17 significant digits, None as the empty string. """
    if value is None:
        return ""
    return "{:.17g}".format(value)


class ExperimentRecord:
    """
    One metric value of one experiment cell.

    Attributes:
        kind:       Experiment kind, e.g. "settings_sweep".
        n:          Number of qubits, None for Haar experiments.
        d:          Hilbert space dimension.
        r:          Rank.
        state_seed: Seed of the state, None for fixed states.
        design:     Dictionary {"kind", "k", "seed"} describing the design.
        N:          Total sample budget, None where it does not apply.
        m:          Repetitions per setting, None where it does not apply.
        metric:     Name of the metric.
        value:      Metric value, None unless status is "ok".
        status:     "ok", "non-identifiable" or "failed".
        aux:        Dictionary of auxiliary diagnostics.
        cell:       Cell coordinates the record can be replayed from.
        index:      Position of the record in its run.
        version:    Package version the record was produced with.
        timestamp:  Timestamp of the run.
    """

    FIELDS = [
        "kind",
        "n",
        "d",
        "r",
        "state_seed",
        "design",
        "N",
        "m",
        "metric",
        "value",
        "status",
        "aux",
        "cell",
        "index",
        "version",
        "timestamp",
    ]

    def __init__(
        self,
        kind,
        metric,
        value,
        n=None,
        d=None,
        r=None,
        state_seed=None,
        design=None,
        N=None,
        m=None,
        status=STATUS_OK,
        aux=None,
        cell=None,
        index=None,
        version=__version__,
        timestamp=None,
    ):
        self.kind = kind
        self.metric = metric
        self.value = _clean(value)
        self.n = _clean(n)
        self.d = _clean(d)
        self.r = _clean(r)
        self.state_seed = _clean(state_seed)
        self.design = _clean(design or {"kind": None, "k": None, "seed": None})
        self.N = _clean(N)
        self.m = _clean(m)
        self.status = status
        self.aux = _clean(aux or {})
        self.cell = _clean(cell or [])
        self.index = index
        self.version = version
        self.timestamp = timestamp
        if self.status == STATUS_OK and self.value is None:
            self.status = STATUS_FAILED

    def to_dict(self):
        return {field: getattr(self, field) for field in self.FIELDS}

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        return cls(data.pop("kind"), data.pop("metric"), data.pop("value"), **data)

    def to_row(self):
        """ Returns the flattened CSV row in COLUMNS order. """
        row = self.to_dict()
        design = row.pop("design")
        row["design_kind"] = design.get("kind")
        row["design_k"] = design.get("k")
        row["design_seed"] = design.get("seed")
        row["aux"] = json.dumps(row["aux"], sort_keys=True)
        row["cell"] = json.dumps(row["cell"])
        row["value"] = format_float(row["value"])
        return ["" if row[column] is None else row[column] for column in COLUMNS]

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=False)

    def __eq__(self, other):
        if not isinstance(other, ExperimentRecord):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return "ExperimentRecord(kind={}, cell={}, {}={}, status={})".format(
            self.kind, self.cell, self.metric, self.value, self.status
        )


class RecordWriter:
    """
    Writes the records of one run to <output_dir>/records.jsonl and
    <output_dir>/<kind>.csv.  Both files are truncated when the writer opens.
    """

    def __init__(self, output_dir, kind):
        self.output_dir = Path(output_dir)
        self.kind = kind
        self.jsonl_path = self.output_dir / JSONL_NAME
        self.csv_path = self.output_dir / "{}.csv".format(kind)
        self.count = 0
        self._jsonl = None
        self._csv = None
        self._writer = None

    def open(self):
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self._jsonl = open(str(self.jsonl_path), "w")
        self._csv = open(str(self.csv_path), "w", newline="")
        self._writer = csv.writer(self._csv)
        self._writer.writerow(COLUMNS)
        return self

    def write(self, records):
        for record in records:
            self._jsonl.write(record.to_json() + "\n")
            self._writer.writerow(record.to_row())
            self.count += 1

    def close(self):
        for handle in (self._jsonl, self._csv):
            if handle is not None:
                handle.close()
        logger.info(
            "{} records written to {} and {}".format(self.count, self.jsonl_path, self.csv_path)
        )

    def __enter__(self):
        return self.open()

    def __exit__(self, *exc):
        self.close()
        return False


def write_records(output_dir, kind, records):
    """ Writes a complete run of records and returns the writer's (jsonl, csv) paths. """
    with RecordWriter(output_dir, kind) as writer:
        writer.write(records)
    return writer.jsonl_path, writer.csv_path


def read_records(path):
    """ Reads the ExperimentRecords of a records.jsonl file. """
    with open(str(path)) as infile:
        return [ExperimentRecord.from_dict(json.loads(line)) for line in infile if line.strip()]


def write_manifest(output_dir, manifest):
    """ Writes the run manifest dictionary to <output_dir>/manifest.json and returns its path. """
    path = Path(output_dir) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(str(path), "w") as outfile:
        json.dump(_clean(manifest), outfile, sort_keys=True, indent=2, allow_nan=False)
    return path


def read_manifest(path):
    with open(str(path)) as infile:
        return json.load(infile)
