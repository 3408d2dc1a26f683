"""
config — Runtime defaults for tolerances, caps and refinement budgets.

Configuration can be provided with a JSON file.
Search order:
1) $MONOREG_CONFIG (explicit path)
2) <workspace>/.monoreg/config.json
3) ~/.monoreg/config.json

If no config file exists, built-in defaults are used. Keys in the file
override the defaults one by one; unknown keys are ignored.
"""

import json
import os
import sys


WORKSPACE = os.getenv("MONOREG_WORKSPACE", os.getcwd())


_DEFAULT_CONFIG = {
    # Absolute tolerance of the optimality certificate on inputs scaled to
    # sup-norm <= 1.
    "cert_tol": 1e-9,
    # Largest number of candidate subsets (2^points) enumeration accepts.
    "enum_cap": 2 ** 20,
    # Gauss-Legendre nodes per axis and cell.
    "quad_order": 4,
    # Total grid points allowed per refinement level.
    "max_grid_points": 2 ** 20,
    # Active sub-lattices up to this size are solved by exact partitioning
    # from the start; larger ones get a Dykstra warm start first.
    "partition_max_points": 256,
    # Maximum-closure subproblems up to this size are enumerated instead of
    # handed to the LP solver.
    "closure_enum_points": 12,
    "dykstra_max_sweeps": 500,
    "dykstra_tol": 1e-10,
    "polish_max_rounds": 64,
    # Points sampled for sup-norm discretization errors.
    "sup_sample_cap": 2 ** 22,
    "point_budget": 14,
    # Default agreement of successive pointwise values for `point`.
    "point_tol": 1e-4,
    "point_max_cells": 2 ** 18,
    "univariate_mesh": 2000,
    "trials": 200,
    "seed": 0,
}


def _candidate_paths():
    env_path = os.getenv("MONOREG_CONFIG")
    return [
        env_path,
        os.path.join(WORKSPACE, ".monoreg", "config.json"),
        os.path.expanduser("~/.monoreg/config.json"),
    ]


def _load_config():
    config = dict(_DEFAULT_CONFIG)
    for path in _candidate_paths():
        if not path:
            continue
        if not os.path.isfile(path):
            continue
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
            if not isinstance(data, dict):
                raise ValueError("Config root must be a JSON object")
        except Exception as exc:  # pragma: no cover - fall back to defaults
            print(f"[monoreg] Failed to load config at {path}: {exc}", file=sys.stderr)
            break
        for key, value in data.items():
            if key in config:
                config[key] = type(_DEFAULT_CONFIG[key])(value)
        break
    return config


_CONFIG = _load_config()

CERT_TOL = _CONFIG["cert_tol"]
ENUM_CAP = _CONFIG["enum_cap"]
QUAD_ORDER = _CONFIG["quad_order"]
MAX_GRID_POINTS = _CONFIG["max_grid_points"]
PARTITION_MAX_POINTS = _CONFIG["partition_max_points"]
CLOSURE_ENUM_POINTS = _CONFIG["closure_enum_points"]
DYKSTRA_MAX_SWEEPS = _CONFIG["dykstra_max_sweeps"]
DYKSTRA_TOL = _CONFIG["dykstra_tol"]
POLISH_MAX_ROUNDS = _CONFIG["polish_max_rounds"]
SUP_SAMPLE_CAP = _CONFIG["sup_sample_cap"]
POINT_BUDGET = _CONFIG["point_budget"]
POINT_TOL = _CONFIG["point_tol"]
POINT_MAX_CELLS = _CONFIG["point_max_cells"]
UNIVARIATE_MESH = _CONFIG["univariate_mesh"]
TRIALS = _CONFIG["trials"]
SEED = _CONFIG["seed"]
