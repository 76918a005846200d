"""Deterministic file output: CSV grids, JSON reports, config files."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    """Shortest round-trip decimal for floats; plain ints otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def header_line(config: dict, seed) -> str:
    return f"# config_hash={config_hash(config)} seed={seed}"


def grid_csv(values, shape: tuple[int, int], config: dict, seed) -> str:
    """One row per velocity index, one column per position index."""
    n_pos, n_vel = shape
    g = np.asarray(values).reshape(n_vel, n_pos)
    lines = [header_line(config, seed)]
    lines += [",".join(fmt(v) for v in row) for row in g]
    return "\n".join(lines) + "\n"


def read_grid_csv(path) -> np.ndarray:
    rows = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    return np.array([[float(t) for t in r.split(",")] for r in rows])


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=1) + "\n"


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out
