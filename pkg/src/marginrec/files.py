"""Instance and results files.

An instance file is a text header of ``key: json-value`` lines followed by a
points table with columns ``x1..xm,label``.  Floats are written with
shortest round-trip repr, so read(write(instance)) reproduces the numbers
exactly and fixed seeds give byte-identical files.

Results are one CSV row per recovery run, with the provenance needed to
replay the run carried in two trailing JSON columns.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os

import numpy as np

from .geometry import PointSet, Pseudometric
from .instances import Instance
from .oracle import Clustering

MAGIC = "# marginrec-instance v1"

RESULT_COLUMNS = [
    "algorithm", "n", "m", "k", "gamma", "seed",
    "label_queries", "scq_queries", "rounds", "exact",
    "misclassified_ever", "wall_ms", "instance", "config",
]


class InstanceFormatError(ValueError):
    """Malformed instance file; message carries line/field context."""


def _metric_to_obj(d: Pseudometric) -> dict:
    if d.kind == "euclidean":
        return {"kind": "euclidean"}
    if d.kind == "mahalanobis":
        return {"kind": "mahalanobis", "matrix": d.matrix.tolist()}
    if d.kind == "projection":
        return {"kind": "projection", "basis": d.basis.tolist()}
    raise ValueError(f"unknown metric kind {d.kind!r}")


def _metric_from_obj(obj: dict) -> Pseudometric:
    kind = obj.get("kind")
    if kind == "euclidean":
        return Pseudometric.euclidean()
    if kind == "mahalanobis":
        return Pseudometric.mahalanobis(np.asarray(obj["matrix"], dtype=float))
    if kind == "projection":
        return Pseudometric.projection(np.asarray(obj["basis"], dtype=float))
    raise InstanceFormatError(f"unknown metric kind {kind!r}")


def _json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def _cert_value(v: float):
    return "inf" if math.isinf(v) else v


def _parse_cert(v) -> float:
    return float("inf") if v == "inf" else float(v)


def write_instance_text(inst: Instance) -> str:
    m = inst.m
    out = io.StringIO()
    out.write(MAGIC + "\n")
    out.write(f"m: {m}\n")
    out.write(f"k: {inst.k}\n")
    out.write(f"n: {inst.n}\n")
    metrics = (None if inst.metrics is None
               else [_metric_to_obj(d) for d in inst.metrics])
    out.write(f"metrics: {_json(metrics)}\n")
    certified = {name: _cert_value(v) for name, v in sorted(inst.certified.items())}
    out.write(f"certified: {_json(certified)}\n")
    out.write(f"provenance: {_json(inst.provenance)}\n")
    out.write("points:\n")
    out.write(",".join([f"x{j + 1}" for j in range(m)] + ["label"]) + "\n")
    labels = inst.truth.labels
    for row, label in zip(inst.points.coords, labels):
        out.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")
    return out.getvalue()


def write_instance(inst: Instance, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_instance_text(inst))


def read_instance(path: str | os.PathLike) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise InstanceFormatError(f"{path}: line 1: expected {MAGIC!r}")
    header: dict[str, str] = {}
    body_start = None
    for lineno, line in enumerate(lines[1:], start=2):
        if line.strip() == "points:":
            body_start = lineno  # 1-based line of "points:"
            break
        if not line.strip():
            continue
        if ":" not in line:
            raise InstanceFormatError(f"{path}: line {lineno}: expected 'key: value'")
        key, value = line.split(":", 1)
        header[key.strip()] = value.strip()
    if body_start is None:
        raise InstanceFormatError(f"{path}: missing 'points:' section")
    for needed in ("m", "k", "n", "metrics", "certified", "provenance"):
        if needed not in header:
            raise InstanceFormatError(f"{path}: missing header field {needed!r}")
    try:
        m = int(header["m"])
        k = int(header["k"])
        n = int(header["n"])
        metrics_obj = json.loads(header["metrics"])
        certified = {name: _parse_cert(v)
                     for name, v in json.loads(header["certified"]).items()}
        provenance = json.loads(header["provenance"])
    except (ValueError, json.JSONDecodeError) as exc:
        raise InstanceFormatError(f"{path}: bad header value: {exc}") from exc

    table = lines[body_start:]
    if not table:
        raise InstanceFormatError(f"{path}: missing points header row")
    expected_cols = [f"x{j + 1}" for j in range(m)] + ["label"]
    got_cols = [c.strip() for c in table[0].split(",")]
    if got_cols != expected_cols:
        missing = [c for c in expected_cols if c not in got_cols]
        raise InstanceFormatError(
            f"{path}: line {body_start + 1}: points columns {got_cols} "
            f"do not match {expected_cols}"
            + (f" (missing {missing})" if missing else ""))
    coords = np.zeros((n, m))
    labels = np.zeros(n, dtype=int)
    rows = [ln for ln in table[1:] if ln.strip()]
    if len(rows) != n:
        raise InstanceFormatError(
            f"{path}: expected {n} point rows, found {len(rows)}")
    for i, line in enumerate(rows):
        parts = line.split(",")
        if len(parts) != m + 1:
            raise InstanceFormatError(
                f"{path}: line {body_start + 2 + i}: expected {m + 1} fields")
        try:
            coords[i] = [float(v) for v in parts[:m]]
            labels[i] = int(parts[m])
        except ValueError as exc:
            raise InstanceFormatError(
                f"{path}: line {body_start + 2 + i}: {exc}") from exc
    metrics = (None if metrics_obj is None
               else [_metric_from_obj(obj) for obj in metrics_obj])
    return Instance(points=PointSet(coords),
                    truth=Clustering(labels=labels, k=k),
                    metrics=metrics, certified=certified,
                    provenance=provenance)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

def append_result(row: dict, path: str | os.PathLike) -> None:
    """Append one run's row, writing the header on first use."""
    missing = [c for c in RESULT_COLUMNS if c not in row]
    if missing:
        raise ValueError(f"result row missing columns {missing}")
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(RESULT_COLUMNS)
        writer.writerow([_format_cell(row[c]) for c in RESULT_COLUMNS])


def _format_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, dict):
        return _json(v)
    return v


_INT_COLS = {"n", "m", "k", "seed", "label_queries", "scq_queries",
             "rounds", "misclassified_ever"}
_FLOAT_COLS = {"gamma", "wall_ms"}
_JSON_COLS = {"instance", "config"}


def read_results(path: str | os.PathLike) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, val in raw.items():
                if key in _INT_COLS:
                    row[key] = int(val)
                elif key in _FLOAT_COLS:
                    row[key] = float(val)
                elif key in _JSON_COLS:
                    row[key] = json.loads(val) if val else None
                elif key == "exact":
                    row[key] = val == "true"
                else:
                    row[key] = val
            rows.append(row)
    return rows
