"""Deterministic writers and readers for matrices, reports and series.

Floats are written with ``repr`` so values round-trip exactly and repeated
runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .fit import FitReport
from .flows import FlowMatrix, Stage
from .registry import CountryRegistry


def fmt(x) -> str:
    return repr(float(x))


def file_checksum(*paths) -> str:
    """SHA-256 over the concatenated contents of the given files."""
    digest = hashlib.sha256()
    for path in paths:
        if path is None:
            continue
        digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def write_matrix_csv(path, flow: FlowMatrix, registry: CountryRegistry) -> None:
    """Wide CSV: country codes as row and column headers."""
    codes = registry.codes
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + codes)
        for i, code in enumerate(codes):
            writer.writerow([code] + [fmt(x) for x in flow.values[i]])


def write_matrix_edges(path, flow: FlowMatrix, registry: CountryRegistry) -> None:
    """Long CSV edge list (origin, destination, share), nonzero entries only."""
    codes = registry.codes
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["origin", "destination", "share"])
        rows, cols = np.nonzero(flow.values)
        for i, j in zip(rows.tolist(), cols.tolist()):
            writer.writerow([codes[i], codes[j], fmt(flow.values[i, j])])


def write_flow_json(path, flow: FlowMatrix, registry: CountryRegistry, input_checksum: str | None = None) -> None:
    """JSON envelope: stage, year, input checksum, codes, full matrix."""
    payload = {
        "stage": flow.stage.value if flow.stage else None,
        "year": flow.year,
        "input_checksum": input_checksum,
        "codes": registry.codes,
        "values": [[float(x) for x in row] for row in flow.values],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def read_flow_json(path) -> tuple[FlowMatrix, list[str], str | None]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    stage = Stage(payload["stage"]) if payload.get("stage") else None
    flow = FlowMatrix(np.array(payload["values"], dtype=float), stage, int(payload["year"]))
    return flow, list(payload["codes"]), payload.get("input_checksum")


def write_fit_csv(path, reports: list[FitReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "stage", "d", "r2_min", "r2_use", "r2_pooled"])
        for report in reports:
            row = report.as_row()
            writer.writerow(row[:2] + [fmt(x) for x in row[2:]])


def write_rows_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) if isinstance(x, float) else x for x in row])


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
