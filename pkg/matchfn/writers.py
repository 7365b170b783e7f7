"""
Output writers.

Every file is written to a temporary sibling and moved into place with
``os.replace`` so an interrupted run never leaves a half-written result.
"""

import json
import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Union

import pandas as pd

from .ingest import serialize_panel
from .models import Panel

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@contextmanager
def atomic_path(path: PathLike) -> Iterator[Path]:
    """Yield a temporary path that replaces ``path`` on successful exit."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    os.close(handle)
    temp = Path(temp_name)
    try:
        yield temp
        os.replace(temp, path)
    finally:
        if temp.exists():
            temp.unlink()


def write_text(path: PathLike, text: str) -> Path:
    with atomic_path(path) as temp:
        temp.write_text(text, encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return Path(path)


def write_frame(path: PathLike, frame: pd.DataFrame) -> Path:
    """CSV with empty fields for missing values and 12 significant digits."""
    text = frame.to_csv(index=False, na_rep="", float_format="%.12g", lineterminator="\n")
    return write_text(path, text)


def write_json(path: PathLike, data: dict) -> Path:
    return write_text(path, json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_panel_csv(path: PathLike, panel: Panel) -> Path:
    """Panel in the ingestion CSV format."""
    return write_text(path, serialize_panel(panel))
