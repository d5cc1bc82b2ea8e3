"""Flat-file outputs: CSV and JSON with 17 significant digits and a metadata header."""

from __future__ import annotations

import csv
import json
import math
import re
from importlib import metadata as _md
from pathlib import Path

import numpy as np

TOOL = "stringbilliard"

try:
    VERSION = _md.version("artifact")
except _md.PackageNotFoundError:  # running from a source tree
    VERSION = "0.1.0"

_FLOAT_TAG = "@@float:"
_FLOAT_RE = re.compile('"' + re.escape(_FLOAT_TAG) + '([^"]*)"')


def fmt(x: float) -> str:
    """17 significant digits; enough to round-trip any double."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def header(config: dict, seed: int | None) -> dict:
    return {"tool": TOOL, "version": VERSION, "config": config, "seed": seed}


def _tag_floats(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        return obj
    if isinstance(obj, (float, np.floating)):
        return _FLOAT_TAG + fmt(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _tag_floats(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _tag_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tag_floats(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, compact: bool = False) -> str:
    """JSON text with every float written at 17 significant digits."""
    if compact:
        text = json.dumps(_tag_floats(obj), sort_keys=True, separators=(",", ":"))
    else:
        text = json.dumps(_tag_floats(obj), indent=2, sort_keys=True) + "\n"
    return _FLOAT_RE.sub(lambda m: m.group(1), text)


def write_json(path, payload: dict, config: dict, seed: int | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps({"meta": header(config, seed), **payload}))
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_csv(path, columns: list[str], rows, config: dict, seed: int | None = None) -> Path:
    """CSV preceded by '#'-comment lines carrying the metadata header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = header(config, seed)
    with path.open("w", newline="") as fh:
        fh.write(f"# tool: {meta['tool']} {meta['version']}\n")
        fh.write(f"# config: {dumps(config, compact=True)}\n")
        fh.write(f"# seed: {seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """(columns, rows as strings), skipping the comment header."""
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]
