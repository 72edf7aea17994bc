"""Writers for solution documents and sweep tables."""

import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def sanitize(value: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    if isinstance(value, np.ndarray):
        return sanitize(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if hasattr(value, "model_dump"):
        return sanitize(value.model_dump(mode="json"))
    return value


def dumps(data: Dict[str, Any]) -> str:
    return json.dumps(sanitize(data), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {target}")


def write_json(data: Dict[str, Any], path: Optional[str] = None) -> None:
    """Write a structured document, to stdout when no path is given."""
    _emit(dumps(data), path)


def table_to_csv(table: pd.DataFrame) -> str:
    return table.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="")


def write_table(table: pd.DataFrame, path: Optional[str] = None, fmt: str = "csv") -> None:
    """Write a sweep table as CSV (17 significant digits) or as JSON records."""
    if fmt == "json":
        records = table.astype(object).where(table.notna(), None).to_dict(orient="records")
        _emit(dumps({"rows": records}), path)
    else:
        _emit(table_to_csv(table), path)


def meta_path(table_path: str) -> str:
    """<table>.meta.json next to the table."""
    path = Path(table_path)
    return str(path.with_name(path.stem + ".meta.json"))
