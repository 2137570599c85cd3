"""CSV and JSON-sidecar output with round-trip-exact float formatting."""

from __future__ import annotations

import csv
import json
import os


def format_value(x) -> str:
    """Shortest decimal string that parses back to the identical double."""
    if hasattr(x, "item"):  # numpy scalar
        x = x.item()
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, columns, rows) -> None:
    """Write a header plus value rows; floats keep full double precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def read_csv(path):
    """Read a CSV written by :func:`write_csv`; returns (columns, float rows)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return columns, rows


def write_sidecar(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_sidecar(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def find_sidecar_for(csv_path):
    """Locate the run sidecar in the CSV's directory that lists it as output."""
    directory = os.path.dirname(os.path.abspath(csv_path))
    name = os.path.basename(csv_path)
    for entry in sorted(os.listdir(directory)):
        if not entry.endswith(".sidecar.json"):
            continue
        sidecar = read_sidecar(os.path.join(directory, entry))
        if name in sidecar.get("outputs", {}):
            return sidecar, os.path.join(directory, entry)
    return None, None
