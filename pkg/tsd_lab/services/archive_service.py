"""
Reading and writing archive-format datasets.

Archive format (one instance per row, no header):
    label<delim>v1<delim>v2 ... vT

The delimiter is a tab or a comma, detected from the first non-empty row.
Labels are remapped to 0..C-1 in sorted order of the original labels.
"""

import io
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from tsd_lab.domain.enums import Split
from tsd_lab.domain.errors import ArchiveParseError
from tsd_lab.ml.data.dataset import TimeSeriesDataset
from tsd_lab.shared.io import atomic_write_json, atomic_write_text, read_json

SIDECAR_SUFFIX = ".json"


def detect_delimiter(line: str) -> str:
    return "\t" if "\t" in line else ","


def _content_rows(text: str) -> list[tuple[int, str]]:
    """(1-based line number, stripped line) for every non-blank line."""
    return [(number, line.strip()) for number, line in enumerate(text.splitlines(), start=1) if line.strip()]


def parse_archive(
    text: str,
    name: str = "dataset",
    split: Split = Split.TRAIN,
    label_set: Sequence[int] | None = None,
) -> TimeSeriesDataset:
    """
    Parse archive text into an unprepared dataset.

    Args:
        label_set: Original labels to map onto 0..C-1 (a test file reuses
            the label set of its training file); None takes the labels found

    Raises:
        ArchiveParseError: kind is one of empty, ragged, non_numeric, label, classes
    """
    rows = _content_rows(text)
    if not rows:
        raise ArchiveParseError("archive is empty", kind="empty")
    delimiter = detect_delimiter(rows[0][1])

    widths = [line.count(delimiter) + 1 for _, line in rows]
    expected = widths[0]
    if expected < 2:
        raise ArchiveParseError("rows carry a label but no values", kind="empty", row=rows[0][0], column=1)
    for (number, _), width in zip(rows, widths):
        if width != expected:
            raise ArchiveParseError(
                f"expected {expected} fields, found {width}", kind="ragged", row=number, column=min(width, expected)
            )

    raw = pd.read_csv(
        io.StringIO("\n".join(line for _, line in rows)),
        sep=delimiter,
        header=None,
        dtype=str,
        keep_default_na=False,
        skipinitialspace=True,
    )
    numeric = raw.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad_rows, bad_cols = np.nonzero(~np.isfinite(numeric))
    if bad_rows.size:
        row, column = int(bad_rows[0]), int(bad_cols[0])
        raise ArchiveParseError(
            f"field '{raw.iat[row, column]}' is not a finite number", kind="non_numeric", row=rows[row][0], column=column
        )

    raw_labels = numeric[:, 0]
    fractional = np.nonzero(raw_labels != np.round(raw_labels))[0]
    if fractional.size:
        row = int(fractional[0])
        raise ArchiveParseError(f"label '{raw.iat[row, 0]}' is not an integer", kind="label", row=rows[row][0], column=0)
    original = raw_labels.astype(np.int64)
    if label_set is None:
        classes = np.unique(original)
    else:
        classes = np.unique(np.asarray(list(label_set), dtype=np.int64))
        unknown = np.nonzero(~np.isin(original, classes))[0]
        if unknown.size:
            row = int(unknown[0])
            raise ArchiveParseError(
                f"label {original[row]} is not among {classes.tolist()}", kind="label", row=rows[row][0], column=0
            )
    if classes.size < 2:
        raise ArchiveParseError(f"archive holds {classes.size} class(es); at least 2 are required", kind="classes")

    labels = np.searchsorted(classes, original)
    dataset = TimeSeriesDataset.from_arrays(numeric[:, 1:], labels, num_classes=int(classes.size), name=name, split=split)
    return dataset.with_metadata(source_labels=",".join(str(c) for c in classes.tolist()), delimiter=delimiter)


def load_archive(
    path: str | Path,
    name: str | None = None,
    split: Split = Split.TRAIN,
    label_set: Sequence[int] | None = None,
) -> TimeSeriesDataset:
    """
    Load an archive file.

    Raises:
        FileNotFoundError: Path does not exist
        ArchiveParseError: Malformed content
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Archive file not found: {path}")
    dataset = parse_archive(path.read_text(encoding="utf-8"), name=name or path.stem, split=split, label_set=label_set)
    logger.info(
        f"📖 Loaded {path}: M={len(dataset)}, C={dataset.num_classes}, T={dataset.series_length}"
    )
    return dataset


def format_archive(dataset: TimeSeriesDataset, delimiter: str = "\t") -> str:
    """Archive text with contiguous labels and round-trip float formatting."""
    frame = pd.DataFrame(dataset.values)
    frame.insert(0, "label", dataset.labels)
    buffer = io.StringIO()
    frame.to_csv(buffer, sep=delimiter, header=False, index=False, float_format="%.17g", lineterminator="\n")
    return buffer.getvalue()


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(SIDECAR_SUFFIX)


def save_archive(dataset: TimeSeriesDataset, path: str | Path, delimiter: str = "\t") -> Path:
    """Write the dataset in archive format plus its JSON metadata sidecar."""
    path = Path(path)
    atomic_write_text(path, format_archive(dataset, delimiter))
    atomic_write_json(sidecar_path(path), {**dataset.describe(), **dataset.metadata, "delimiter": delimiter})
    return path


def read_sidecar(path: str | Path) -> dict:
    return read_json(sidecar_path(path))

