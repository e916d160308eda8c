"""Write experiment artifacts: JSON reports, flat CSV rows and the resolved config."""

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, List

import numpy as np
import pandas as pd


def _to_jsonable(value):
    """Convert numpy scalars/arrays nested in report data; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps(data) -> str:
    """Canonical JSON text: sorted keys, two-space indent."""
    return json.dumps(_to_jsonable(data), indent=2, sort_keys=True, allow_nan=False)


def config_digest(config: dict) -> str:
    """Content hash of a serialized experiment config."""
    canonical = json.dumps(_to_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(dumps(data))
        f.write("\n")
    return path


def write_csv(path, rows: Iterable[dict]) -> Path:
    """Flat table, one dict per row; column order follows first appearance."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [_to_jsonable(r) for r in rows]
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False)
    return path


def prepare_output_dir(out_dir, config: dict) -> Path:
    """Create the artifact directory and store the config that produced it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "config.json", config)
    return out_dir


def load_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Report not found: {path}")
    with open(path) as f:
        return json.load(f)
