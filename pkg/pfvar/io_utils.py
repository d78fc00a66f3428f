"""
Centralized persistence for pfvar artifacts.

  - CSV: header row, '.' decimal, LF line endings, full float precision
  - JSON: sorted keys, two-space indent, no timestamps (byte-stable reruns)
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from .errors import ConfigError

FLOAT_FORMAT = "%.17g"


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays, Paths and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(obj: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        json.dump(to_jsonable(obj), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return path


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    with Path(path).open("r", encoding="utf-8") as f:
        return json.load(f)


def write_csv(rows: Union[pd.DataFrame, List[Dict[str, Any]]], path: Union[str, Path], columns: Sequence[str] = None) -> Path:
    """Write long-format rows (or a DataFrame) as CSV."""
    df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(rows, columns=columns)
    if columns is not None:
        df = df[list(columns)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    return path


# -------------------- Observation records --------------------


def write_observations(y, path: Union[str, Path]) -> Path:
    return write_csv(pd.DataFrame({"y": np.asarray(y, dtype=np.float64)}), path)


def read_observations(path: Union[str, Path], symbolic: bool = False) -> np.ndarray:
    """
    Single-column CSV with header 'y'. With symbolic=True the values are kept
    as text (perturbation symbols of a discrete model) instead of floats.
    """
    df = pd.read_csv(path, dtype=str, keep_default_na=False) if symbolic else pd.read_csv(path)
    if list(df.columns) != ["y"]:
        raise ConfigError(f"expected a single column 'y', found {list(df.columns)}", field=str(path))

    if symbolic:
        y = df["y"].str.strip().to_numpy(dtype=object)
        if any(s == "" for s in y):
            raise ConfigError("observation record contains empty symbols", field=str(path))
        return y
    y = df["y"].to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ConfigError("observation record contains non-finite values", field=str(path))
    return y
