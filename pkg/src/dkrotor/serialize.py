"""Deterministic CSV and JSON output.

Floats are serialized with 17 significant digits so every double survives
a write/read/write round trip byte-identically.  Every data file gets a
``<file>.meta.json`` sidecar carrying the resolved configuration and the
code version; sidecars contain no timestamps, keeping outputs reproducible
bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import os

import numpy as np

__all__ = [
    "fmt_float",
    "write_csv",
    "read_csv",
    "write_sidecar",
    "read_sidecar",
    "write_json",
    "SchemaError",
]


class SchemaError(ValueError):
    """A CSV file does not match the expected column schema."""


def fmt_float(x) -> str:
    """17-significant-digit decimal form: exact double round trip."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return fmt_float(x)


def write_csv(path: str, header: list[str], rows) -> None:
    """RFC-4180-style CSV: header row, comma separated, minimal quoting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(x) for x in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path: str, expected_columns: list[str] | None = None):
    """Read a CSV into (header, list of string rows); verify the schema.

    Missing expected columns raise :class:`SchemaError` naming the column.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        rows = [row for row in reader if row]
    if expected_columns is not None:
        for col in expected_columns:
            if col not in header:
                raise SchemaError(f"{path}: missing required column '{col}'")
    return header, rows


def column(header: list[str], rows: list[list[str]], name: str) -> np.ndarray:
    """Float array for one named column."""
    if name not in header:
        raise SchemaError(f"missing required column '{name}'")
    i = header.index(name)
    return np.array([float(row[i]) for row in rows])


def _jsonable(value):
    """Strict-JSON-safe copy: non-finite floats become null."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    return value


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def sidecar_path(data_path: str) -> str:
    return data_path + ".meta.json"


def write_sidecar(data_path: str, config: dict, command: str, extra: dict | None = None) -> None:
    """Reproducibility sidecar: resolved config, command, code version."""
    from . import __version__

    payload = {
        "code_version": __version__,
        "command": command,
        "config": config,
        "notes": [
            "kbar and beta quantize the rotor; their defaults (cesium-derived "
            "kbar, beta = 0) are this package's reconstruction and are "
            "configuration choices, not measured inputs"
        ],
    }
    if extra:
        payload.update(extra)
    write_json(sidecar_path(data_path), payload)


def read_sidecar(data_path: str) -> dict | None:
    path = sidecar_path(data_path)
    if not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
