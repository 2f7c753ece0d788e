import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pandas as pd


def dataframeToJson(df: pd.DataFrame) -> list[dict]:
    """Frame rows as plain JSON values; NaN becomes None."""
    return [
        {key: json_safe(value) for key, value in row.items()}
        for row in df.to_dict(orient="records")
    ]


def json_safe(value):
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return [json_safe(v) for v in value.tolist()]
    if isinstance(value, (np.integer, np.floating, np.bool_)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dumps(payload: dict) -> str:
    return json.dumps(json_safe(payload), sort_keys=True, indent=2) + "\n"


def write_json(path: Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
    return path


def file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def format_number(value, decimal_places: int = 3) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "N/A"
    if isinstance(value, (int, np.integer)):
        return f"{value:,}"
    return f"{value:,.{decimal_places}f}"
