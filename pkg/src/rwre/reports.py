"""Deterministic JSON/CSV report files.

Report files hold only run inputs and results, so identical inputs give
byte-identical files.  Wall-clock time and the worker count go to a
``<stem>.timing.json`` sidecar.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from . import __version__


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, rows, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])


def write_report(out_dir, stem, config, result, rows=None, columns=None, timing=None):
    """Write ``<stem>.json`` (config echo + results) and optionally ``<stem>.csv``."""
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    paths = []
    doc = {"tool": "rwre", "version": __version__, "config": config, "result": result}
    if rows is not None:
        doc["csv"] = f"{stem}.csv"
        write_csv(out / f"{stem}.csv", rows, columns)
        paths.append(out / f"{stem}.csv")
    write_json(out / f"{stem}.json", doc)
    paths.append(out / f"{stem}.json")
    if timing is not None:
        write_json(out / f"{stem}.timing.json", timing)
    return paths
