"""
JSON and CSV report writers

Report bodies carry no timestamps so that reruns with the same inputs and seed
produce byte-identical files.
"""

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import pandas as pd

from shared.utils.exceptions import DataError

Interval = Tuple[float, float]


def encode_bound(value: float) -> Optional[float]:
    """Infinite bounds are written as null"""
    return None if math.isinf(value) else float(value)


def encode_intervals(intervals: Mapping[int, Interval]) -> Dict[str, list]:
    """Encode a feature interval map as {"feature": [lo, hi]} with null for ±inf"""
    return {str(f): [encode_bound(lo), encode_bound(hi)] for f, (lo, hi) in sorted(intervals.items())}


def decode_intervals(doc: Mapping[str, list]) -> Dict[int, Interval]:
    """Inverse of encode_intervals"""
    return {
        int(f): (-math.inf if lo is None else float(lo), math.inf if hi is None else float(hi))
        for f, (lo, hi) in doc.items()
    }


def write_json(document: Any, path: Path) -> Path:
    """Write a JSON document with a stable layout"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, allow_nan=False)
        f.write("\n")
    return path


def read_json(path: Path) -> Any:
    """Read a JSON document, surfacing parse errors with the file name"""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Write a CSV export without the index"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def config_hash(config: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a config snapshot"""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
