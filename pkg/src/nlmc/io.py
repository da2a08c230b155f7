"""Plain-text artifact formats: field dumps, basis dumps, sweep CSVs, reports.

A *field dump* holds nodal values: a "nx ny" header with the node-grid
dimensions (fine cells per side + 1), then ny rows of nx values, row-major
from the bottom-left node.  The cell-valued medium format lives in
:mod:`nlmc.medium`; this module covers everything derived from solutions.
"""

from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .analysis import ErrorReport, SweepRow, SweepTable, Timings
from .basis import BasisFunction
from .errors import MediumFormatError
from .medium import RegionMap

__all__ = [
    "write_field", "read_field", "write_basis_dump", "read_basis_dump",
    "write_sweep_csv", "sweep_csv_text", "read_sweep_csv", "write_decay_csv",
    "write_report", "write_coarse_table",
]


def write_field(path: str | Path, values: np.ndarray, n_side: int) -> None:
    """Write nodal values (all (n_side+1)² of them) as a field dump."""
    n = n_side + 1
    values = np.asarray(values, dtype=float)
    if values.size != n * n:
        raise ValueError(f"expected {n * n} nodal values, got {values.size}")
    grid = values.reshape(n, n)
    rows = [f"{n} {n}"]
    rows.extend(" ".join(f"{v:.17g}" for v in row) for row in grid)
    Path(path).write_text("\n".join(rows) + "\n")


def read_field(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a field dump; returns (flat nodal values, fine cells per side)."""
    path = Path(path)
    tokens = path.read_text().split()
    if len(tokens) < 2:
        raise MediumFormatError(f"{path}: missing field-dump header")
    try:
        nx, ny = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise MediumFormatError(f"{path}: header must be two integers") from exc
    if nx != ny or nx < 2:
        raise MediumFormatError(f"{path}: node grid must be square (≥2), got {nx}x{ny}")
    body = tokens[2:]
    if len(body) != nx * ny:
        raise MediumFormatError(
            f"{path}: expected {nx * ny} nodal values, found {len(body)}")
    try:
        values = np.array([float(t) for t in body])
    except ValueError as exc:
        raise MediumFormatError(f"{path}: non-numeric value in body") from exc
    return values, nx - 1


def write_basis_dump(path: str | Path, basis: BasisFunction, n_side: int) -> None:
    """Write one basis function: owner metadata, multipliers, then a field dump."""
    lines = [
        f"block: {basis.block}",
        f"region: {basis.region}",
        f"layers: {'global' if basis.layers is None else basis.layers}",
        f"energy: {basis.energy:.17g}",
        "constraint_regions: " + " ".join(str(k) for k in basis.constraint_regions),
        "multipliers: " + " ".join(f"{v:.17g}" for v in basis.multipliers),
        "",
    ]
    n = n_side + 1
    grid = basis.dense(n * n).reshape(n, n)
    lines.append(f"{n} {n}")
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in grid)
    Path(path).write_text("\n".join(lines) + "\n")


def read_basis_dump(path: str | Path) -> dict:
    """Parse a basis dump into a dict with the header fields and nodal values."""
    path = Path(path)
    head, _, body = path.read_text().partition("\n\n")
    meta: dict = {}
    for line in head.splitlines():
        key, _, value = line.partition(":")
        meta[key.strip()] = value.strip()
    out = {
        "block": int(meta["block"]),
        "region": int(meta["region"]),
        "layers": None if meta["layers"] == "global" else int(meta["layers"]),
        "energy": float(meta["energy"]),
        "constraint_regions": np.array(
            [int(t) for t in meta["constraint_regions"].split()]),
        "multipliers": np.array([float(t) for t in meta["multipliers"].split()]),
    }
    tokens = body.split()
    nx, ny = int(tokens[0]), int(tokens[1])
    out["values"] = np.array([float(t) for t in tokens[2:]])
    if out["values"].size != nx * ny:
        raise MediumFormatError(f"{path}: truncated nodal block")
    return out


def sweep_csv_text(table: SweepTable) -> str:
    """Render a sweep table in the CSV interchange format."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["parameter", "e_L2", "e_L2_sq", "e_energy", "seconds"])
    for row in table.rows:
        writer.writerow([f"{row.parameter:.10g}", f"{row.e_L2:.10g}",
                         f"{row.e_L2_sq:.10g}", f"{row.e_energy:.10g}",
                         f"{row.seconds:.10g}"])
    return buf.getvalue()


def write_sweep_csv(path: str | Path, table: SweepTable) -> None:
    Path(path).write_text(sweep_csv_text(table))


def read_sweep_csv(path: str | Path) -> SweepTable:
    """Read a sweep CSV back (the axis name is not stored in the file)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = tuple(
            SweepRow(float(r["parameter"]), float(r["e_L2"]), float(r["e_L2_sq"]),
                     float(r["e_energy"]), float(r["seconds"]))
            for r in reader)
    return SweepTable("unknown", rows)


def write_decay_csv(path: str | Path, profile: np.ndarray) -> None:
    """Write a basis decay profile: ring index, energy fraction outside it."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["ring", "energy_fraction_outside"])
    for r, frac in enumerate(profile):
        writer.writerow([r, f"{frac:.10g}"])
    Path(path).write_text(buf.getvalue())


def write_report(path: str | Path, report: ErrorReport, timings: Timings) -> None:
    """Write the error report plus timings as pretty-printed JSON."""
    payload = {**asdict(report),
               "bins": [list(iv) for iv in report.bins],
               "timings": asdict(timings)}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_coarse_table(path: str | Path, regions: RegionMap, ubar: np.ndarray) -> None:
    """Write the coarse solution: one row per region with its mean value."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["region", "block", "bin", "component", "area", "mean"])
    for region, value in zip(regions.regions, ubar):
        writer.writerow([region.index, region.block, region.bin_id, region.component,
                         f"{region.area:.10g}", f"{value:.10g}"])
    Path(path).write_text(buf.getvalue())
