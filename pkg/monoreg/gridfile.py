"""
gridfile — Grid-function files: a CSV of values plus a JSON sidecar.

    values.csv    i1,...,id,value[,weight]   one row per grid point, 0-based
    values.json   {"box": {"lo": [...], "hi": [...]},
                   "breakpoints": [[...], ...]   (or "level": n, or "shape": [...]),
                   "signature": "+1,0,-1"}       (optional)

Values are written with 17 significant digits, which reproduces every
double bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import InputFormatError, MonoregError
from .grid import Box, GridFunction, GridSpec, dyadic_grid, equidistant_grid
from .order import Signature
from .report import format_float, write_json, write_text


@dataclass(frozen=True, eq=False)
class GridFile:
    values: GridFunction
    weights: GridFunction | None = None
    signature: Signature | None = None


def sidecar_path(path) -> str:
    return os.path.splitext(os.fspath(path))[0] + ".json"


# ═════════════════════════════════════════════════════════════════════════════
# PARSER
# ═════════════════════════════════════════════════════════════════════════════

def _grid_from_sidecar(path: str, meta: dict) -> GridSpec:
    try:
        box = Box(tuple(meta["box"]["lo"]), tuple(meta["box"]["hi"]))
    except (KeyError, TypeError) as exc:
        raise InputFormatError(path, None, f"sidecar needs box.lo and box.hi ({exc})") from None
    except MonoregError as exc:
        raise InputFormatError(path, None, str(exc)) from None
    try:
        if "breakpoints" in meta:
            bps = tuple(np.asarray(b, dtype=float) for b in meta["breakpoints"])
            steps = [np.diff(b) for b in bps]
            equidistant = all(np.allclose(h, h[0], rtol=1e-12, atol=0) for h in steps if h.size)
            counts = [b.size - 1 for b in bps]
            level = None
            if equidistant and len(set(counts)) == 1 and counts[0] & (counts[0] - 1) == 0:
                level = counts[0].bit_length() - 1
            return GridSpec(box, bps, equidistant=equidistant, level=level)
        if "level" in meta:
            return dyadic_grid(box, int(meta["level"]))
        if "shape" in meta:
            return equidistant_grid(box, meta["shape"])
    except (TypeError, ValueError) as exc:
        raise InputFormatError(path, None, f"bad grid description: {exc}") from None
    raise InputFormatError(path, None, "sidecar needs breakpoints, level or shape")


def read_grid(path) -> GridFile:
    """Parse a grid CSV and its sidecar into grid functions."""
    path = os.fspath(path)
    side = sidecar_path(path)
    try:
        with open(side, "r", encoding="utf-8") as f:
            meta = json.load(f)
    except FileNotFoundError:
        raise InputFormatError(side, None, "missing JSON sidecar") from None
    except json.JSONDecodeError as exc:
        raise InputFormatError(side, exc.lineno, exc.msg) from None
    if not isinstance(meta, dict):
        raise InputFormatError(side, None, "sidecar root must be a JSON object")
    grid = _grid_from_sidecar(side, meta)
    signature = None
    if meta.get("signature"):
        try:
            signature = Signature.parse(str(meta["signature"]))
        except MonoregError as exc:
            raise InputFormatError(side, None, str(exc)) from None

    d = grid.dim
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except FileNotFoundError:
        raise InputFormatError(path, None, "file not found") from None
    if not rows:
        raise InputFormatError(path, 1, "empty file")
    header = [h.strip() for h in rows[0]]
    expected = [f"i{k + 1}" for k in range(d)] + ["value"]
    with_weight = header == expected + ["weight"]
    if header != expected and not with_weight:
        raise InputFormatError(path, 1, f"header must be {','.join(expected)}[,weight], got {','.join(header)}")

    values = np.full(grid.shape, np.nan)
    weights = np.full(grid.shape, np.nan) if with_weight else None
    seen = np.zeros(grid.shape, dtype=bool)
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputFormatError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
        try:
            index = tuple(int(c) for c in row[:d])
        except ValueError:
            raise InputFormatError(path, lineno, f"indices must be integers: {row[:d]}") from None
        if any(not 0 <= k < n for k, n in zip(index, grid.shape)):
            raise InputFormatError(path, lineno, f"index {index} outside grid shape {grid.shape}")
        if seen[index]:
            raise InputFormatError(path, lineno, f"duplicate index {index}")
        try:
            values[index] = float(row[d])
            if weights is not None:
                weights[index] = float(row[d + 1])
        except ValueError:
            raise InputFormatError(path, lineno, f"bad number in {row[d:]}") from None
        if not np.isfinite(values[index]) or (weights is not None and not np.isfinite(weights[index])):
            raise InputFormatError(path, lineno, "values must be finite")
        seen[index] = True
    if not seen.all():
        missing = tuple(int(k) for k in np.argwhere(~seen)[0])
        raise InputFormatError(path, None, f"missing value for index {missing}")

    w = None
    if weights is not None:
        if np.any(weights <= 0):
            raise InputFormatError(path, None, "weights must be strictly positive")
        w = GridFunction(grid, weights)
    return GridFile(GridFunction(grid, values), w, signature)


# ═════════════════════════════════════════════════════════════════════════════
# SERIALISER
# ═════════════════════════════════════════════════════════════════════════════

def grid_csv(f: GridFunction, w: GridFunction | None = None) -> str:
    d = f.grid.dim
    out = io.StringIO()
    header = [f"i{k + 1}" for k in range(d)] + ["value"] + (["weight"] if w is not None else [])
    out.write(",".join(header) + "\n")
    for index in np.ndindex(*f.grid.shape):
        cells = [str(k) for k in index] + [format_float(f.values[index])]
        if w is not None:
            cells.append(format_float(w.values[index]))
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def write_grid(path, f: GridFunction, w: GridFunction | None = None,
               signature: Signature | None = None):
    """Write the CSV and its sidecar."""
    if w is not None and not w.grid.same_as(f.grid):
        raise MonoregError("values and weights must share a grid")
    meta = {
        "box": f.grid.box.to_dict(),
        "breakpoints": [b.tolist() for b in f.grid.breakpoints],
    }
    if signature is not None:
        meta["signature"] = str(signature)
    write_text(path, grid_csv(f, w))
    write_json(sidecar_path(path), meta)
