import csv
import json
from pathlib import Path
from typing import Any, Dict

import numpy as np

from simulator import Trajectory
from utils.helper import format_float


def trajectory_header(node_count: int) -> list:
    return ["t", *[f"x{k + 1}" for k in range(node_count)], "U", "residual", "dissipation"]


def write_trajectory_csv(trajectory: Trajectory, path: Path, node_count: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(trajectory_header(node_count))
        for row in trajectory.as_rows():
            writer.writerow([format_float(v) for v in row])
    return path


def _unwrap_numpy(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dump_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, allow_nan=True, default=_unwrap_numpy)


def write_summary_json(summary: Dict[str, Any], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(summary) + "\n", encoding="utf-8")
    return path
