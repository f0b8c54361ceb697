"""
Filesystem helpers.

Every artifact of a run is written through ``atomic_write_text`` so a
crashed or interrupted command never leaves a half-written file behind.
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Any

import pandas as pd


def atomic_write_text(path: str | Path, text: str) -> Path:
    """Write text to a temp file in the target directory, then rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return target


def atomic_write_json(path: str | Path, payload: Any) -> Path:
    """Serialize to indented JSON with sorted keys."""
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def atomic_write_tsv(path: str | Path, frame: pd.DataFrame, float_format: str | None = None) -> Path:
    """Tab-separated export without the index."""
    text = frame.to_csv(sep="\t", index=False, lineterminator="\n", float_format=float_format)
    return atomic_write_text(path, text)


def read_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)
